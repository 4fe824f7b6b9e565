#pragma once

#include <Eigen/Dense>

#include <limits>
#include <string>

#include "scs/data.hpp"
#include "scs/estimators.hpp"
#include "scs/nuisance.hpp"
#include "scs/solvers.hpp"

namespace scs {

/** One evaluated criterion; value = gof + penalty when ok. */
struct CriterionValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  double gof = std::numeric_limits<double>::quiet_NaN();
  double penalty = std::numeric_limits<double>::quiet_NaN();
  int active_size = 0;
  bool ok = false;
  std::string reason;  // failure description when !ok
};

/**
 * Plug-in residual variance for the pseudo-outcome regression: the
 * unpenalized least squares fit's RSS / (n - p). Requires n > p.
 */
double resolve_sigma2(const WeightedLsqProblem& prob);

/** QICw for the pseudo-outcome path: gof / sigma2 + 2 * active size. */
CriterionValue qicw_lsq(const WeightedLsqProblem& prob, const FitResult& fit,
                        double sigma2);

/**
 * Unbiased weighted-risk estimate for the contrast lasso:
 *   ||w - x theta||^2
 *   + 2 sigma2 tr[(sum x2 x2')^{-1} sum_i sum_h (c_h^2 / e_ih) x2 x2'].
 */
CriterionValue ipcp_lasso(const WeightedLsqProblem& prob, const FitResult& fit,
                          const ContrastSpec& contrast,
                          const Eigen::MatrixXd& e, double sigma2);

/** Elastic-net variant; lambda2 is read from the fit. */
CriterionValue ipcp_elastic_net(const WeightedLsqProblem& prob,
                                const FitResult& fit,
                                const ContrastSpec& contrast,
                                const Eigen::MatrixXd& e, double sigma2);

/**
 * Group-tied variant on the per-group pseudo-outcomes W (zero at
 * unobserved rows). Supports the default singleton column blocks.
 */
CriterionValue ipcp_group(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                          const GroupFit& fit, const Eigen::MatrixXd& e,
                          double sigma2);

/**
 * Shared inputs of the likelihood-based criteria. `e` must be the same
 * (clipped) probabilities the fit used. `propensity` is required by dric
 * (estimated-assignment mode); `aug` by the doubly robust criteria.
 * For the gaussian family, family.sigma2 and aug->sigma2_f must agree.
 */
struct GlmCriterionContext {
  const Dataset* data = nullptr;
  ModelFamily family;
  Eigen::MatrixXd e;
  const PropensityFit* propensity = nullptr;
  const AugmentationModel* aug = nullptr;
};

/** -2 sum_i (1/e_i) log f(y_i | x_i; beta^[g_i]), full constants included. */
double glm_gof(const GlmCriterionContext& ctx, const Eigen::VectorXd& beta);

/** Empirical curvature/score matrices on the stacked coefficient vector. */
Eigen::MatrixXd j_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta);
Eigen::MatrixXd k_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta);
Eigen::MatrixXd q_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active = 1e-8);
Eigen::MatrixXd r_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active = 1e-8);
Eigen::MatrixXd s_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active = 1e-8);

CriterionValue qicw_glm(const GlmCriterionContext& ctx, const FitResult& fit);
CriterionValue ipic(const GlmCriterionContext& ctx, const FitResult& fit);
CriterionValue dr_aic(const GlmCriterionContext& ctx, const FitResult& fit);
CriterionValue dric(const GlmCriterionContext& ctx, const FitResult& fit);

/** IPIC analogue for SCAD / MC+ fits (twice-differentiable off the origin). */
CriterionValue ipic_nonconvex(const GlmCriterionContext& ctx,
                              const FitResult& fit, const PenaltySpec& pen);

}  // namespace scs
