#pragma once

#include <Eigen/Dense>

#include "scs/data.hpp"
#include "scs/nuisance.hpp"
#include "scs/solvers.hpp"

namespace scs {

/** Group-assignment probabilities ready for inverse weighting. */
struct PropensityValues {
  Eigen::MatrixXd e;  // n x H, clipped to [eps, 1-eps] and row-normalized
  bool estimated = false;
};

/** Validates user-supplied probabilities (rows sum to 1 within 1e-6). */
PropensityValues known_propensity(const Eigen::MatrixXd& e_raw,
                                  double eps = 1e-3);
PropensityValues estimated_propensity(const PropensityFit& fit,
                                      double eps = 1e-3);

/** w_i = c^[g_i] y_i / e_i^[g_i]: the contrast pseudo-outcome. */
Eigen::VectorXd contrast_pseudo_outcome(const Dataset& data,
                                        const ContrastSpec& contrast,
                                        const Eigen::MatrixXd& e);

/** W(i,h) = 1[t_i = h] y_i / e_i^[h]: one pseudo-outcome per group. */
Eigen::MatrixXd group_pseudo_outcomes(const Dataset& data,
                                      const Eigen::MatrixXd& e);

/** Least squares problem whose solution estimates sum_h c^[h] theta^[h]. */
WeightedLsqProblem ipw_contrast_problem(const Dataset& data,
                                        const ContrastSpec& contrast,
                                        const Eigen::MatrixXd& e);

/**
 * Inverse-probability-weighted GLM objective on the stacked per-group
 * coefficients: -(1/N) sum_i (1/e_i^[g_i]) log f(y_i | x_i; beta^[g_i]),
 * dropping beta-free constants. The returned objective keeps pointers into
 * `data`, which must outlive it.
 */
GlmObjective ipw_glm_objective(const Dataset& data, const ModelFamily& family,
                               const Eigen::MatrixXd& e);

/**
 * Doubly robust GLM objective: adds, for every group h, the augmentation
 * term {1 - 1[t_i=h]/e_i^[h]} E{ log f(y^[h] | x; beta^[h]) | z; gamma },
 * again up to beta-free constants. Convex: the total curvature weight of
 * every (i, h) term is one.
 */
GlmObjective dr_glm_objective(const Dataset& data, const ModelFamily& family,
                              const Eigen::MatrixXd& e,
                              const AugmentationModel& aug);

/** Penalty dispatch for the pseudo-outcome least squares path. */
FitResult solve_penalized_lsq(const WeightedLsqProblem& prob,
                              const PenaltySpec& pen,
                              const SolveOptions& opts = {},
                              const Eigen::VectorXd* warm = nullptr);

}  // namespace scs
