#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "scs/common.hpp"
#include "scs/data.hpp"

namespace scs {

/** Shared solver tolerances; defaults are the library-wide contract. */
struct SolveOptions {
  double tol_kkt = 1e-6;     // KKT tolerance, relative to max |gradient| at 0
  double coord_tol = 1e-8;   // stop when no coefficient moves more than this
  int max_iter = 10000;      // coordinate sweeps (outer iterations for GLMs)
  double eps_active = 1e-8;  // |coef| above this counts as active
};

/** Outcome of one penalized fit. */
struct FitResult {
  Eigen::VectorXd coef;
  std::vector<int> active;   // ascending indices with |coef| > eps_active
  double lambda = 0.0;
  double lambda2 = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool kkt_ok = false;
  double kkt_violation = 0.0;  // worst violation on the gradient scale
  std::vector<std::string> flags;
};

/**
 * Penalized least squares on pseudo-outcomes:
 *   minimize over theta: sum_i (w_i - x_i' theta)^2 + penalty(theta).
 * No 1/n scaling — lambda is on the total-sum scale, and the same lambda
 * feeds the matching criteria.
 */
struct WeightedLsqProblem {
  Eigen::MatrixXd x;  // n x p
  Eigen::VectorXd w;  // n
};

/** Smallest lambda with an all-zero lasso solution: 2 max_j |sum_i w_i x_ij|. */
double lasso_shutoff(const WeightedLsqProblem& prob);

/** Cyclic coordinate descent for the l1 penalty. */
FitResult solve_lasso_lsq(const WeightedLsqProblem& prob, double lambda,
                          const SolveOptions& opts = {},
                          const Eigen::VectorXd* warm = nullptr);

/** Per-coordinate l1 levels (the majorization step of SCAD / MC+). */
FitResult solve_weighted_l1_lsq(const WeightedLsqProblem& prob,
                                const Eigen::VectorXd& lambda_j,
                                const SolveOptions& opts = {},
                                const Eigen::VectorXd* warm = nullptr);

/**
 * Elastic net: sum_i (w_i - x_i' theta)^2 + l1 ||theta||_1 + l2 ||theta||_2^2.
 * The returned coefficient vector is the naive minimizer rescaled by
 * (1 + l2); the active set and KKT check refer to the pre-rescaled solution.
 * Warm starts take a previous *returned* (rescaled) coefficient vector.
 */
FitResult solve_elastic_net_lsq(const WeightedLsqProblem& prob, double l1,
                                double l2, const SolveOptions& opts = {},
                                const Eigen::VectorXd* warm = nullptr);

/**
 * Group-tied least squares across H targets sharing one design:
 *   minimize over Theta (p x H):
 *     sum_h sum_i (W(i,h) - x_i' Theta(:,h))^2 + lambda * sum_g ||Theta_g||_2
 * where block g collects the columns with one group label across all H
 * targets (singleton labels — the default — tie coefficient j across
 * targets only).
 */
struct GroupFit {
  Eigen::MatrixXd coef;            // p x H
  std::vector<int> active_groups;  // 0-based group ids with nonzero block
  std::vector<int> active_cols;    // columns belonging to active groups
  double lambda = 0.0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool kkt_ok = false;
  double kkt_violation = 0.0;
  std::vector<std::string> flags;
};

/** Smallest lambda with an all-zero group solution. */
double group_lasso_shutoff(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                           const std::vector<int>& groups = {});

GroupFit solve_group_lasso_lsq(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& W, double lambda,
                               const std::vector<int>& groups = {},
                               const SolveOptions& opts = {},
                               const Eigen::MatrixXd* warm = nullptr);

/** LLA wrappers: initialized from the lasso solution at the same lambda. */
FitResult solve_scad_lsq(const WeightedLsqProblem& prob, double lambda,
                         double a, const SolveOptions& opts = {},
                         const Eigen::VectorXd* warm = nullptr);
FitResult solve_mcplus_lsq(const WeightedLsqProblem& prob, double lambda,
                           double gamma, const SolveOptions& opts = {},
                           const Eigen::VectorXd* warm = nullptr);

/** SCAD / MC+ scalar penalty values and derivatives (u = |coef|, u >= 0). */
double scad_value(double u, double lambda, double a);
double scad_derivative(double u, double lambda, double a);
double scad_second_derivative(double u, double lambda, double a);
double mcplus_value(double u, double lambda, double gamma);
double mcplus_derivative(double u, double lambda, double gamma);
double mcplus_second_derivative(double u, double lambda, double gamma);

/**
 * One additive term of a stacked GLM objective: data row i enters group
 * block h. For the binomial family the smooth loss contribution is
 *   (1/N) [ -u * eta + c * m * log(1 + exp(eta)) ],
 * for the Gaussian family
 *   (1/(2 N sigma2)) * c * (v - eta)^2,
 * with eta = x_i' beta^[h].
 */
struct GlmTerm {
  int i = 0;
  int h = 0;
  double u = 0.0;  // binomial linear coefficient
  double v = 0.0;  // gaussian target
  double c = 0.0;  // log-partition weight / quadratic weight
  double m = 1.0;  // binomial trials
};

/**
 * Smooth part of a penalized GLM objective over the stacked coefficient
 * vector beta of length p*H; block h occupies indices [h*p, (h+1)*p).
 * `constant` is a value-only offset carried into reported objectives.
 */
struct GlmObjective {
  Family family = Family::gaussian;
  const Eigen::MatrixXd* x = nullptr;  // n x p
  int H = 1;
  int N = 0;
  double sigma2 = 1.0;
  std::vector<GlmTerm> terms;
  double constant = 0.0;

  int p() const { return static_cast<int>(x->cols()); }
  int dim() const { return p() * H; }

  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
};

/** Smallest lasso lambda with the all-zero GLM solution: max_j |grad_j(0)|. */
double glm_shutoff(const GlmObjective& obj);

/**
 * Proximal Newton (IRLS + penalized coordinate descent) for the stacked GLM.
 * Supported penalties: lasso, elastic_net (no rescaling for GLMs), scad and
 * mcplus (both via LLA started from the lasso solution at the same lambda).
 */
FitResult solve_penalized_glm(const GlmObjective& obj, const PenaltySpec& pen,
                              const SolveOptions& opts = {},
                              const Eigen::VectorXd* warm = nullptr);

}  // namespace scs
