#pragma once

#include <Eigen/Dense>

#include "scs/data.hpp"

namespace scs {

/**
 * Multinomial-logit group-assignment model with the last group as the
 * reference category:
 *   P(t = h | z) = exp(z'alpha_h) / sum_g exp(z'alpha_g),  alpha_H = 0.
 */
struct PropensityFit {
  Eigen::MatrixXd alpha;  // (H-1) x q; the reference row is implicit zero
  Eigen::MatrixXd probs;  // n x H at alpha, unclipped
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;
};

/** Probabilities for every row of z at the given coefficients. */
Eigen::MatrixXd multinomial_probs(const Eigen::MatrixXd& z,
                                  const Eigen::MatrixXd& alpha);

/** Newton maximum likelihood with step halving. */
PropensityFit fit_propensity(const Dataset& data, int max_iter = 100);

/** Clips to [eps, 1-eps] and renormalizes each row to sum to one. */
Eigen::MatrixXd clip_probabilities(const Eigen::MatrixXd& probs,
                                   double eps = 1e-3);

/**
 * Outcome regression y | z pooled across groups:
 *   gaussian: y ~ N(z'gamma, sigma2), sigma2 pooled or per observed group;
 *   binomial: y ~ Bin(m, logistic(z'gamma)).
 * Maximum likelihood (variance divisor is the sample count).
 */
struct OutcomeNuisanceFit {
  Family family = Family::gaussian;
  Eigen::VectorXd gamma;     // q
  Eigen::VectorXd sigma2_g;  // size 1 when pooled, else size H
  bool pooled_sigma = true;
  int iterations = 0;
  bool converged = false;

  double sigma2_for(int h) const {
    return pooled_sigma ? sigma2_g[0] : sigma2_g[h];
  }
};

OutcomeNuisanceFit fit_outcome_nuisance(const Dataset& data,
                                        const ModelFamily& family,
                                        bool pooled_sigma = true);

/**
 * Expected causal-model log likelihood given the outcome regression,
 *   a(eta, z) = E{ log f(y | eta) | z; gamma },
 * as a function of the causal linear predictor eta, up to terms free of eta
 * (the binomial combinatorial constant is dropped). sigma2_f is the causal
 * model's response variance (gaussian only).
 */
struct AugmentationModel {
  Family family = Family::gaussian;
  const OutcomeNuisanceFit* fit = nullptr;
  const Dataset* data = nullptr;
  double sigma2_f = 1.0;

  /** E[y | z_i] under the outcome regression. */
  double mean(int i) const;
  /** h is the group whose potential outcome is being averaged over. */
  double value(int i, int h, double eta) const;
  double deta(int i, double eta) const;
  double d2eta(int i, double eta) const;
  /** d^2 a / (dgamma deta), a q-vector. */
  Eigen::VectorXd cross_gamma(int i, double eta) const;
};

}  // namespace scs
