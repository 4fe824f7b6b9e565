#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scs/criteria.hpp"
#include "scs/estimators.hpp"
#include "scs/solvers.hpp"

namespace scs {

enum class CriterionKind { qicw, ipcp, ipic, dr_aic, dric };

std::string criterion_name(CriterionKind k);
CriterionKind criterion_from_name(const std::string& name);

/** Log-spaced penalty grid from the shutoff value down. */
struct GridSpec {
  int n_points = 50;
  double ratio = 1e-3;
};

/**
 * Geometric grid of `grid.n_points` values from `lambda_max` down to
 * `grid.ratio * lambda_max`, in decreasing order.
 */
std::vector<double> lambda_grid(double lambda_max, const GridSpec& grid);

struct PathEntry {
  PenaltySpec penalty;
  /** Contrast paths: length p. Group and GLM paths: length p*H, stacked so
   * block h occupies [h*p, (h+1)*p). */
  Eigen::VectorXd coef;
  int active_size = 0;
  bool converged = false;
  CriterionValue criterion;
};

struct SelectionResult {
  CriterionKind criterion = CriterionKind::qicw;
  double lambda_max = 0.0;
  std::vector<PathEntry> entries;  // decreasing lambda
  int chosen = -1;                 // -1 when every entry failed

  bool ok() const { return chosen >= 0; }
  const PathEntry& best() const;
};

/**
 * Contrast least-squares path: fits `base` (lasso, elastic_net, scad or
 * mcplus; lambda replaced per grid point) over the grid with warm starts and
 * scores each fit. `criterion` must be qicw or ipcp; ipcp additionally
 * requires a lasso or elastic_net penalty.
 */
SelectionResult select_lsq(const WeightedLsqProblem& prob,
                           const ContrastSpec& contrast,
                           const Eigen::MatrixXd& e, double sigma2,
                           CriterionKind criterion, const PenaltySpec& base,
                           const GridSpec& grid = {},
                           const SolveOptions& opts = {},
                           bool warm_start = true);

/**
 * Same path, several criteria: the grid is fitted once and every criterion
 * scores the shared fits. Results come back in the order of `criteria`, each
 * with its own chosen index (-1 if all of its entries failed — the
 * single-criterion wrappers turn that into an error).
 */
std::vector<SelectionResult> select_lsq_multi(
    const WeightedLsqProblem& prob, const ContrastSpec& contrast,
    const Eigen::MatrixXd& e, double sigma2,
    const std::vector<CriterionKind>& criteria, const PenaltySpec& base,
    const GridSpec& grid = {}, const SolveOptions& opts = {},
    bool warm_start = true);

/**
 * Group (row-tied) least-squares path over pseudo-outcomes W, one group per
 * covariate row. `criterion` must be qicw or ipcp.
 */
SelectionResult select_group(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                             const Eigen::MatrixXd& e, double sigma2,
                             CriterionKind criterion,
                             const GridSpec& grid = {},
                             const SolveOptions& opts = {},
                             bool warm_start = true);

/**
 * Penalized likelihood path for an assembled GLM objective. `ctx` must match
 * the objective (same data, weights and, for doubly robust objectives, the
 * same augmentation model). qicw and ipic accept every supported penalty
 * (scad/mcplus switch ipic to its nonconvex form); dr_aic and dric require a
 * lasso penalty.
 */
SelectionResult select_glm(const GlmObjective& obj,
                           const GlmCriterionContext& ctx,
                           CriterionKind criterion, const PenaltySpec& base,
                           const GridSpec& grid = {},
                           const SolveOptions& opts = {},
                           bool warm_start = true);

/** Shared-path GLM variant of select_lsq_multi. */
std::vector<SelectionResult> select_glm_multi(
    const GlmObjective& obj, const GlmCriterionContext& ctx,
    const std::vector<CriterionKind>& criteria, const PenaltySpec& base,
    const GridSpec& grid = {}, const SolveOptions& opts = {},
    bool warm_start = true);

}  // namespace scs
