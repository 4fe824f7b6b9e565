#include "scs/estimators.hpp"

#include <cmath>

#include "scs/common.hpp"

namespace scs {

PropensityValues known_propensity(const Eigen::MatrixXd& e_raw, double eps) {
  for (int i = 0; i < e_raw.rows(); ++i) {
    double sum = 0.0;
    for (int h = 0; h < e_raw.cols(); ++h) {
      const double v = e_raw(i, h);
      if (!std::isfinite(v) || !(v > 0.0) || v > 1.0)
        throw validation_error("propensity values must lie in (0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw validation_error("propensity rows must sum to 1 (row " +
                             std::to_string(i + 1) + ")");
  }
  PropensityValues out;
  out.e = clip_probabilities(e_raw, eps);
  out.estimated = false;
  return out;
}

PropensityValues estimated_propensity(const PropensityFit& fit, double eps) {
  PropensityValues out;
  out.e = clip_probabilities(fit.probs, eps);
  out.estimated = true;
  return out;
}

Eigen::VectorXd contrast_pseudo_outcome(const Dataset& data,
                                        const ContrastSpec& contrast,
                                        const Eigen::MatrixXd& e) {
  contrast.validate(data.H());
  if (e.rows() != data.n() || e.cols() != data.H())
    throw validation_error("propensity matrix shape mismatch");
  Eigen::VectorXd w(data.n());
  for (int i = 0; i < data.n(); ++i) {
    const int g = data.group(i);
    w[i] = contrast.c[g] * data.y[i] / e(i, g);
  }
  return w;
}

Eigen::MatrixXd group_pseudo_outcomes(const Dataset& data,
                                      const Eigen::MatrixXd& e) {
  if (e.rows() != data.n() || e.cols() != data.H())
    throw validation_error("propensity matrix shape mismatch");
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(data.n(), data.H());
  for (int i = 0; i < data.n(); ++i) {
    const int g = data.group(i);
    W(i, g) = data.y[i] / e(i, g);
  }
  return W;
}

WeightedLsqProblem ipw_contrast_problem(const Dataset& data,
                                        const ContrastSpec& contrast,
                                        const Eigen::MatrixXd& e) {
  WeightedLsqProblem prob;
  prob.x = data.x;
  prob.w = contrast_pseudo_outcome(data, contrast, e);
  return prob;
}

GlmObjective ipw_glm_objective(const Dataset& data, const ModelFamily& family,
                               const Eigen::MatrixXd& e) {
  if (e.rows() != data.n() || e.cols() != data.H())
    throw validation_error("propensity matrix shape mismatch");
  GlmObjective obj;
  obj.family = family.family;
  obj.x = &data.x;
  obj.H = data.H();
  obj.N = data.n();
  obj.sigma2 = family.family == Family::gaussian ? family.sigma2 : 1.0;
  obj.terms.reserve(data.n());
  for (int i = 0; i < data.n(); ++i) {
    const int g = data.group(i);
    GlmTerm t;
    t.i = i;
    t.h = g;
    const double inv = 1.0 / e(i, g);
    if (family.family == Family::gaussian) {
      t.c = inv;
      t.v = data.y[i];
    } else {
      t.u = inv * data.y[i];
      t.c = inv;
      t.m = data.trials_or(i, family.default_trials);
    }
    obj.terms.push_back(t);
  }
  return obj;
}

GlmObjective dr_glm_objective(const Dataset& data, const ModelFamily& family,
                              const Eigen::MatrixXd& e,
                              const AugmentationModel& aug) {
  if (e.rows() != data.n() || e.cols() != data.H())
    throw validation_error("propensity matrix shape mismatch");
  GlmObjective obj;
  obj.family = family.family;
  obj.x = &data.x;
  obj.H = data.H();
  obj.N = data.n();
  obj.sigma2 = family.family == Family::gaussian ? aug.sigma2_f : 1.0;
  obj.terms.reserve(static_cast<std::size_t>(data.n()) * data.H());
  for (int i = 0; i < data.n(); ++i) {
    const int g = data.group(i);
    const double mu = aug.mean(i);
    for (int h = 0; h < data.H(); ++h) {
      const double omega = h == g ? 1.0 / e(i, g) : 0.0;
      const double tilde = 1.0 - omega;
      if (family.family == Family::gaussian) {
        if (omega != 0.0) {
          GlmTerm t;
          t.i = i;
          t.h = h;
          t.c = omega;
          t.v = data.y[i];
          obj.terms.push_back(t);
        }
        GlmTerm t;
        t.i = i;
        t.h = h;
        t.c = tilde;
        t.v = mu;
        obj.terms.push_back(t);
      } else {
        // One term with total log-partition weight omega + tilde = 1 and
        // pseudo-response omega y + tilde mu.
        GlmTerm t;
        t.i = i;
        t.h = h;
        t.u = omega * data.y[i] + tilde * mu;
        t.c = 1.0;
        t.m = data.trials_or(i, family.default_trials);
        obj.terms.push_back(t);
      }
    }
  }
  return obj;
}

FitResult solve_penalized_lsq(const WeightedLsqProblem& prob,
                              const PenaltySpec& pen, const SolveOptions& opts,
                              const Eigen::VectorXd* warm) {
  pen.validate(static_cast<int>(prob.x.cols()));
  switch (pen.kind) {
    case PenaltyKind::lasso:
      return solve_lasso_lsq(prob, pen.lambda, opts, warm);
    case PenaltyKind::elastic_net:
      return solve_elastic_net_lsq(prob, pen.lambda, pen.lambda2, opts, warm);
    case PenaltyKind::scad:
      return solve_scad_lsq(prob, pen.lambda, pen.a, opts, warm);
    case PenaltyKind::mcplus:
      return solve_mcplus_lsq(prob, pen.lambda, pen.gamma, opts, warm);
    case PenaltyKind::group_lasso:
      throw validation_error(
          "group penalty needs the per-group pseudo-outcome path");
  }
  throw validation_error("unknown penalty kind");
}

}  // namespace scs
