#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "scs/common.hpp"

namespace scs {

/**
 * One observational sample: outcome y, assignment t in {1..H}, model
 * covariates x (the regressors of the causal model) and confounders z (the
 * covariates of the assignment / outcome-nuisance models). Binomial outcomes
 * may carry a per-row trial count; when absent, `trials_or(m)` supplies a
 * constant.
 */
struct Dataset {
  Eigen::VectorXd y;       // n
  Eigen::VectorXi t;       // n, values in 1..n_groups
  Eigen::MatrixXd x;       // n x p
  Eigen::MatrixXd z;       // n x q
  int n_groups = 1;        // H
  Eigen::VectorXd trials;  // optional, size 0 or n (binomial trial counts)

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(x.cols()); }
  int q() const { return static_cast<int>(z.cols()); }
  int H() const { return n_groups; }

  /** 0-based group index of row i. */
  int group(int i) const { return t[i] - 1; }

  /** Group indicator t_i^[h] for 0-based h, computed on demand. */
  double indicator(int i, int h) const { return group(i) == h ? 1.0 : 0.0; }

  /** Trial count for row i, falling back to `fallback` when no column. */
  double trials_or(int i, double fallback) const {
    return trials.size() > 0 ? trials[i] : fallback;
  }

  /** Throws validation_error on any shape/domain violation. */
  void validate() const;
};

/**
 * Contrast weights across the H groups; must sum to 0 with unit sum of
 * squares (both within 1e-10).
 */
struct ContrastSpec {
  Eigen::VectorXd c;  // H

  void validate(int H) const;
};

enum class Family { gaussian, binomial_logit };

/**
 * Outcome family of the causal model. For the Gaussian family sigma2 may be
 * marked unknown, in which case criteria resolve it via the plug-in policy
 * (see resolve_sigma2).
 */
struct ModelFamily {
  Family family = Family::gaussian;
  double sigma2 = 1.0;
  bool sigma2_known = true;
  double default_trials = 1.0;  // binomial m when the dataset has no column

  static ModelFamily gaussian_known(double sigma2) {
    return ModelFamily{Family::gaussian, sigma2, true, 1.0};
  }
  static ModelFamily gaussian_unknown() {
    return ModelFamily{Family::gaussian, 0.0, false, 1.0};
  }
  static ModelFamily binomial(double m) {
    return ModelFamily{Family::binomial_logit, 1.0, true, m};
  }

  void validate() const;
};

enum class PenaltyKind { lasso, group_lasso, elastic_net, scad, mcplus };

/**
 * Penalty configuration. `lambda` is always the leading regularization
 * level; elastic_net adds the ridge level `lambda2`, scad its shoulder `a`
 * (> 2) and mcplus its concavity span `gamma` (> 1). For group_lasso,
 * `groups` optionally assigns a 1-based contiguous label to every column of
 * x; columns sharing a label are tied into one block (and every block is
 * additionally tied across the H per-group targets). An empty map means one
 * group per column.
 */
struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::lasso;
  double lambda = 0.0;
  double lambda2 = 0.0;
  double a = 3.7;
  double gamma = 3.0;
  std::vector<int> groups;

  static PenaltySpec lasso_at(double lambda) {
    PenaltySpec s;
    s.kind = PenaltyKind::lasso;
    s.lambda = lambda;
    return s;
  }

  void validate(int p) const;
};

/**
 * Column standardization is never applied implicitly; this helper performs
 * it explicitly and records the transform so that coefficients can be mapped
 * back to the original scale.
 */
struct Standardization {
  Eigen::VectorXd center;  // column means
  Eigen::VectorXd scale;   // column standard deviations (population, /n)

  /** Coefficients of the standardized fit -> original-scale coefficients. */
  Eigen::VectorXd unscale_coef(const Eigen::VectorXd& coef) const;
};

/** Standardize columns of m in place (constant columns get scale 1). */
Standardization standardize_columns(Eigen::MatrixXd& m);

}  // namespace scs
