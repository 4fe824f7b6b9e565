#include "scs/criteria.hpp"

#include <cmath>

#include "scs/common.hpp"

namespace scs {
namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

/** Family scalars at one observation's linear predictor. */
struct FamilyOps {
  const GlmCriterionContext& ctx;

  double eta(const Eigen::VectorXd& beta, int i, int h) const {
    const int p = ctx.data->p();
    return ctx.data->x.row(i).dot(beta.segment(h * p, p));
  }
  double loglik(int i, double eta) const {
    const double y = ctx.data->y[i];
    if (ctx.family.family == Family::gaussian) {
      const double s2 = ctx.family.sigma2;
      const double r = y - eta;
      return -r * r / (2.0 * s2) - 0.5 * (kLogTwoPi + std::log(s2));
    }
    const double m = ctx.data->trials_or(i, ctx.family.default_trials);
    return y * eta - m * log1pexp(eta) + std::lgamma(m + 1.0) -
           std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0);
  }
  double score(int i, double eta) const {
    if (ctx.family.family == Family::gaussian)
      return (ctx.data->y[i] - eta) / ctx.family.sigma2;
    const double m = ctx.data->trials_or(i, ctx.family.default_trials);
    return ctx.data->y[i] - m * logistic(clamp_eta(eta));
  }
  double curvature(int i, double eta) const {
    if (ctx.family.family == Family::gaussian) return 1.0 / ctx.family.sigma2;
    const double m = ctx.data->trials_or(i, ctx.family.default_trials);
    const double s = logistic(clamp_eta(eta));
    return m * s * (1.0 - s);
  }
};

/** Condition-guarded inverse for a general (possibly asymmetric) matrix. */
bool general_inverse(const Eigen::MatrixXd& m, Eigen::MatrixXd* out,
                     double max_cond = 1e12) {
  if (m.rows() == 0) {
    *out = m;
    return true;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smax = svd.singularValues().maxCoeff();
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 0.0) || !std::isfinite(smax) || smax / smin >= max_cond)
    return false;
  *out = svd.solve(Eigen::MatrixXd::Identity(m.rows(), m.rows()));
  return true;
}

CriterionValue failed(const std::string& reason) {
  CriterionValue v;
  v.ok = false;
  v.reason = reason;
  return v;
}

/** Row weight sum_h c_h^2 / e_ih of the contrast-lasso correction matrix. */
Eigen::VectorXd contrast_row_weights(const ContrastSpec& contrast,
                                     const Eigen::MatrixXd& e) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(e.rows());
  for (int i = 0; i < e.rows(); ++i)
    for (int h = 0; h < e.cols(); ++h)
      d[i] += contrast.c[h] * contrast.c[h] / e(i, h);
  return d;
}

/** (1/N) sum_i (1/e_i) score_i x-tilde_i — the weighted mean score. */
Eigen::VectorXd mean_weighted_score(const GlmCriterionContext& ctx,
                                    const Eigen::VectorXd& beta) {
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int p = d.p();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(p * d.H());
  for (int i = 0; i < d.n(); ++i) {
    const int g = d.group(i);
    const double sl = ops.score(i, ops.eta(beta, i, g));
    v.segment(g * p, p).noalias() +=
        (sl / ctx.e(i, g)) * d.x.row(i).transpose();
  }
  return v / d.n();
}

void check_context(const GlmCriterionContext& ctx) {
  if (!ctx.data) throw validation_error("criterion context has no dataset");
  if (ctx.e.rows() != ctx.data->n() || ctx.e.cols() != ctx.data->H())
    throw validation_error("criterion context propensity shape mismatch");
}

}  // namespace

double resolve_sigma2(const WeightedLsqProblem& prob) {
  const int n = static_cast<int>(prob.x.rows());
  const int p = static_cast<int>(prob.x.cols());
  if (n <= p)
    throw validation_error(
        "variance plug-in needs more rows than columns (n > p)");
  const Eigen::MatrixXd G = prob.x.transpose() * prob.x;
  const SymInverse inv = guarded_inverse(G);
  if (!inv.ok)
    throw numerical_error("singular design in the variance plug-in");
  const Eigen::VectorXd theta = inv.inv * (prob.x.transpose() * prob.w);
  return (prob.w - prob.x * theta).squaredNorm() / (n - p);
}

CriterionValue qicw_lsq(const WeightedLsqProblem& prob, const FitResult& fit,
                        double sigma2) {
  if (!(sigma2 > 0.0)) return failed("sigma2 must be positive");
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = (prob.w - prob.x * fit.coef).squaredNorm() / sigma2;
  v.penalty = 2.0 * v.active_size;
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

CriterionValue ipcp_lasso(const WeightedLsqProblem& prob, const FitResult& fit,
                          const ContrastSpec& contrast,
                          const Eigen::MatrixXd& e, double sigma2) {
  if (!(sigma2 > 0.0)) return failed("sigma2 must be positive");
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = (prob.w - prob.x * fit.coef).squaredNorm();
  if (fit.active.empty()) {
    v.penalty = 0.0;
  } else {
    Eigen::MatrixXd xa(prob.x.rows(), fit.active.size());
    for (std::size_t k = 0; k < fit.active.size(); ++k)
      xa.col(k) = prob.x.col(fit.active[k]);
    const Eigen::MatrixXd G = xa.transpose() * xa;
    const SymInverse inv = guarded_inverse(G);
    if (!inv.ok) return failed("active Gram matrix is ill-conditioned");
    const Eigen::VectorXd d = contrast_row_weights(contrast, e);
    const Eigen::MatrixXd M = xa.transpose() * d.asDiagonal() * xa;
    v.penalty = 2.0 * sigma2 * (inv.inv * M).trace();
  }
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

CriterionValue ipcp_elastic_net(const WeightedLsqProblem& prob,
                                const FitResult& fit,
                                const ContrastSpec& contrast,
                                const Eigen::MatrixXd& e, double sigma2) {
  if (!(sigma2 > 0.0)) return failed("sigma2 must be positive");
  const double l2 = fit.lambda2;
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = (prob.w - prob.x * fit.coef).squaredNorm();
  if (fit.active.empty()) {
    v.penalty = 0.0;
  } else {
    Eigen::MatrixXd xa(prob.x.rows(), fit.active.size());
    for (std::size_t k = 0; k < fit.active.size(); ++k)
      xa.col(k) = prob.x.col(fit.active[k]);
    Eigen::MatrixXd G = xa.transpose() * xa;
    G.diagonal().array() += l2;
    const SymInverse inv = guarded_inverse(G);
    if (!inv.ok) return failed("regularized Gram matrix is ill-conditioned");
    const Eigen::VectorXd d = contrast_row_weights(contrast, e);
    const Eigen::MatrixXd M =
        (1.0 + l2) * (xa.transpose() * d.asDiagonal() * xa);
    v.penalty = 2.0 * sigma2 * (inv.inv * M).trace();
  }
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

CriterionValue ipcp_group(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                          const GroupFit& fit, const Eigen::MatrixXd& e,
                          double sigma2) {
  if (!(sigma2 > 0.0)) return failed("sigma2 must be positive");
  const int H = static_cast<int>(W.cols());
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active_cols.size());
  v.gof = (W - x * fit.coef).squaredNorm();
  const int k = v.active_size;
  if (k == 0) {
    v.penalty = 0.0;
    v.value = v.gof + v.penalty;
    v.ok = true;
    return v;
  }

  Eigen::MatrixXd xa(x.rows(), k);
  for (int a = 0; a < k; ++a) xa.col(a) = x.col(fit.active_cols[a]);
  const Eigen::MatrixXd G = xa.transpose() * xa;
  const SymInverse ginv = guarded_inverse(G);
  if (!ginv.ok) return failed("active Gram matrix is ill-conditioned");

  // Derivative-coupling matrix of the tied blocks (kH x kH, h-major). Its
  // (h, h') block couples d theta^[h] / d y through the shared row norms:
  //   R_hh  = I + (lambda/2) G^{-1} diag(1/nrm_j - theta_jh^2 / nrm_j^3),
  //   R_hh' =   - (lambda/2) G^{-1} diag(theta_jh theta_jh' / nrm_j^3).
  Eigen::VectorXd nrm(k);
  for (int a = 0; a < k; ++a) nrm[a] = fit.coef.row(fit.active_cols[a]).norm();
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(k * H, k * H);
  for (int h = 0; h < H; ++h) {
    for (int h2 = 0; h2 < H; ++h2) {
      Eigen::VectorXd diag(k);
      for (int a = 0; a < k; ++a) {
        const double th = fit.coef(fit.active_cols[a], h);
        const double th2 = fit.coef(fit.active_cols[a], h2);
        const double n3 = nrm[a] * nrm[a] * nrm[a];
        diag[a] = h == h2 ? 1.0 / nrm[a] - th * th / n3 : -th * th2 / n3;
      }
      Eigen::MatrixXd blk =
          0.5 * fit.lambda * ginv.inv * diag.asDiagonal();
      if (h == h2) blk += Eigen::MatrixXd::Identity(k, k);
      R.block(h * k, h2 * k, k, k) = blk;
    }
  }
  Eigen::MatrixXd rinv;
  if (!general_inverse(R, &rinv))
    return failed("derivative-coupling matrix is ill-conditioned");

  double trace = 0.0;
  for (int h = 0; h < H; ++h) {
    const Eigen::MatrixXd Mh =
        xa.transpose() * e.col(h).cwiseInverse().asDiagonal() * xa;
    trace += (rinv.block(h * k, h * k, k, k) * (ginv.inv * Mh)).trace();
  }
  v.penalty = 2.0 * sigma2 * trace;
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

double glm_gof(const GlmCriterionContext& ctx, const Eigen::VectorXd& beta) {
  check_context(ctx);
  const FamilyOps ops{ctx};
  double s = 0.0;
  for (int i = 0; i < ctx.data->n(); ++i) {
    const int g = ctx.data->group(i);
    s += ops.loglik(i, ops.eta(beta, i, g)) / ctx.e(i, g);
  }
  return -2.0 * s;
}

Eigen::MatrixXd j_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta) {
  check_context(ctx);
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int p = d.p();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(p * d.H(), p * d.H());
  for (int i = 0; i < d.n(); ++i) {
    const int g = d.group(i);
    const double c = ops.curvature(i, ops.eta(beta, i, g)) / ctx.e(i, g);
    J.block(g * p, g * p, p, p).noalias() +=
        c * d.x.row(i).transpose() * d.x.row(i);
  }
  return J / d.n();
}

Eigen::MatrixXd k_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta) {
  check_context(ctx);
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int p = d.p();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(p * d.H(), p * d.H());
  // The observed-data weight t/e and the augmentation weight 1 - t/e share
  // the same curvature scalar, so every (i, h) term enters with weight one.
  for (int i = 0; i < d.n(); ++i) {
    for (int h = 0; h < d.H(); ++h) {
      const double c = ops.curvature(i, ops.eta(beta, i, h));
      K.block(h * p, h * p, p, p).noalias() +=
          c * d.x.row(i).transpose() * d.x.row(i);
    }
  }
  return K / d.n();
}

Eigen::MatrixXd q_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active) {
  check_context(ctx);
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int p = d.p();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p * d.H(), p * d.H());
  for (int i = 0; i < d.n(); ++i) {
    const int g = d.group(i);
    const double sl = ops.score(i, ops.eta(beta, i, g));
    const double w = sl * sl / (ctx.e(i, g) * ctx.e(i, g));
    Q.block(g * p, g * p, p, p).noalias() +=
        w * d.x.row(i).transpose() * d.x.row(i);
  }
  Q /= d.n();
  if (lambda != 0.0) {
    const Eigen::VectorXd s = sign_on_active(beta, active_set(beta, eps_active));
    const Eigen::VectorXd v = mean_weighted_score(ctx, beta);
    Q.noalias() -= lambda * s * v.transpose();
  }
  return Q;
}

Eigen::MatrixXd r_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active) {
  check_context(ctx);
  if (!ctx.aug)
    throw validation_error("r_hat needs the augmentation model");
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int p = d.p();
  const int dim = p * d.H();
  const Eigen::VectorXd s = sign_on_active(beta, active_set(beta, eps_active));
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd a(dim), b(dim);
  for (int i = 0; i < d.n(); ++i) {
    const int g = d.group(i);
    const double inv = 1.0 / ctx.e(i, g);
    const double sl = ops.score(i, ops.eta(beta, i, g));
    a = -lambda * s;
    a.segment(g * p, p).noalias() += inv * sl * d.x.row(i).transpose();
    b.setZero();
    for (int h = 0; h < d.H(); ++h) {
      const double de = ctx.aug->deta(i, ops.eta(beta, i, h));
      double w = de;
      if (h == g) w = inv * sl + (1.0 - inv) * de;
      b.segment(h * p, p).noalias() += w * d.x.row(i).transpose();
    }
    R.noalias() += a * b.transpose();
  }
  return R / d.n();
}

Eigen::MatrixXd s_hat(const GlmCriterionContext& ctx,
                      const Eigen::VectorXd& beta, double lambda,
                      double eps_active) {
  check_context(ctx);
  if (!ctx.aug || !ctx.aug->fit)
    throw validation_error("s_hat needs the augmentation model");
  if (!ctx.propensity)
    throw validation_error("s_hat needs the fitted assignment model");
  const FamilyOps ops{ctx};
  const Dataset& d = *ctx.data;
  const int n = d.n();
  const int p = d.p();
  const int q = d.q();
  const int H = d.H();
  const int dim = p * H;
  const int na = (H - 1) * q;
  const OutcomeNuisanceFit& of = *ctx.aug->fit;
  if (of.family == Family::gaussian && !of.pooled_sigma)
    throw validation_error("s_hat needs a pooled outcome variance");

  // Raw (model) assignment probabilities drive the score and information of
  // the assignment model; the clipped weights stay in the 1/e factors.
  const Eigen::MatrixXd& pr = ctx.propensity->probs;

  // Assignment-model information (H-1)q x (H-1)q.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(na, na);
  for (int i = 0; i < n; ++i)
    for (int h = 0; h < H - 1; ++h)
      for (int h2 = 0; h2 < H - 1; ++h2) {
        const double w =
            pr(i, h) * ((h == h2 ? 1.0 : 0.0) - pr(i, h2));
        A.block(h * q, h2 * q, q, q).noalias() +=
            (w / n) * d.z.row(i).transpose() * d.z.row(i);
      }
  SymInverse ainv;
  if (na > 0) {
    ainv = guarded_inverse(A);
    if (!ainv.ok)
      throw numerical_error("assignment information matrix is singular");
  }

  // Outcome-model information q x q.
  Eigen::MatrixXd Gam = Eigen::MatrixXd::Zero(q, q);
  const double s2g = of.family == Family::gaussian ? of.sigma2_g[0] : 1.0;
  for (int i = 0; i < n; ++i) {
    double w;
    if (of.family == Family::gaussian) {
      w = 1.0 / s2g;
    } else {
      const double m = d.trials_or(i, ctx.family.default_trials);
      const double prn = logistic(clamp_eta(d.z.row(i).dot(of.gamma)));
      w = m * prn * (1.0 - prn);
    }
    Gam.noalias() += (w / n) * d.z.row(i).transpose() * d.z.row(i);
  }
  const SymInverse gaminv = guarded_inverse(Gam);
  if (!gaminv.ok)
    throw numerical_error("outcome information matrix is singular");

  auto alpha_score = [&](int i, int h) {
    // d log e^[h] / d alpha, stacked over the H-1 free coefficient rows.
    Eigen::VectorXd out(na);
    for (int h2 = 0; h2 < H - 1; ++h2)
      out.segment(h2 * q, q) =
          ((h2 == h ? 1.0 : 0.0) - pr(i, h2)) * d.z.row(i).transpose();
    return out;
  };

  // Per-group cross matrices C1[h]: (H-1)q x p and C2[h]: q x p (the
  // nonzero column block of the stacked versions).
  std::vector<Eigen::MatrixXd> C1(H), C2(H);
  for (int h = 0; h < H; ++h) {
    Eigen::MatrixXd B1 = Eigen::MatrixXd::Zero(na, p);
    Eigen::MatrixXd B2 = Eigen::MatrixXd::Zero(q, p);
    for (int i = 0; i < n; ++i) {
      const int g = d.group(i);
      const double etah = ops.eta(beta, i, h);
      const double de = ctx.aug->deta(i, etah);
      if (g == h && na > 0) {
        const double sl = ops.score(i, etah);
        B1.noalias() += (1.0 / (n * ctx.e(i, h))) * alpha_score(i, h) *
                        ((sl - de) * d.x.row(i));
      }
      const double w = 1.0 - (g == h ? 1.0 / ctx.e(i, h) : 0.0);
      B2.noalias() +=
          (w / n) * ctx.aug->cross_gamma(i, etah) * d.x.row(i);
    }
    C1[h] = na > 0 ? Eigen::MatrixXd(ainv.inv * B1)
                   : Eigen::MatrixXd::Zero(0, p);
    C2[h] = gaminv.inv * B2;
  }

  const Eigen::VectorXd sg = sign_on_active(beta, active_set(beta, eps_active));
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd a(dim), row(dim);
  for (int i = 0; i < n; ++i) {
    const int g = d.group(i);
    const double inv = 1.0 / ctx.e(i, g);
    const double sl = ops.score(i, ops.eta(beta, i, g));
    a = -lambda * sg;
    a.segment(g * p, p).noalias() += inv * sl * d.x.row(i).transpose();

    // Outcome-model score at observation i.
    Eigen::VectorXd gscore(q);
    if (of.family == Family::gaussian) {
      gscore = ((d.y[i] - d.z.row(i).dot(of.gamma)) / s2g) *
               d.z.row(i).transpose();
    } else {
      const double m = d.trials_or(i, ctx.family.default_trials);
      const double prn = logistic(clamp_eta(d.z.row(i).dot(of.gamma)));
      gscore = (d.y[i] - m * prn) * d.z.row(i).transpose();
    }

    row.setZero();
    if (na > 0)
      row.segment(g * p, p) = (alpha_score(i, g).transpose() * C1[g]) +
                              (gscore.transpose() * C2[g]);
    else
      row.segment(g * p, p) = gscore.transpose() * C2[g];
    S.noalias() += a * row.transpose();
  }
  return S / n;
}

namespace {

CriterionValue trace_criterion(const GlmCriterionContext& ctx,
                               const FitResult& fit,
                               const Eigen::MatrixXd& curv,
                               const Eigen::MatrixXd& bias,
                               const std::string& singular_reason) {
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = glm_gof(ctx, fit.coef);
  if (fit.active.empty()) {
    v.penalty = 0.0;
  } else {
    const Eigen::MatrixXd c22 = submatrix(curv, fit.active);
    const Eigen::MatrixXd b22 = submatrix(bias, fit.active);
    const SymInverse inv = guarded_inverse(c22);
    if (!inv.ok) return failed(singular_reason);
    v.penalty = 2.0 * (inv.inv * b22).trace();
  }
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

}  // namespace

CriterionValue qicw_glm(const GlmCriterionContext& ctx, const FitResult& fit) {
  check_context(ctx);
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = glm_gof(ctx, fit.coef);
  v.penalty = 2.0 * v.active_size;
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

CriterionValue ipic(const GlmCriterionContext& ctx, const FitResult& fit) {
  check_context(ctx);
  return trace_criterion(ctx, fit, j_hat(ctx, fit.coef),
                         q_hat(ctx, fit.coef, fit.lambda),
                         "curvature matrix is ill-conditioned");
}

CriterionValue dr_aic(const GlmCriterionContext& ctx, const FitResult& fit) {
  check_context(ctx);
  if (!ctx.aug) return failed("doubly robust criterion needs the outcome model");
  if (ctx.family.family == Family::gaussian &&
      std::abs(ctx.family.sigma2 - ctx.aug->sigma2_f) >
          1e-9 * std::max(1.0, ctx.family.sigma2))
    return failed("family and augmentation variances disagree");
  return trace_criterion(ctx, fit, j_hat(ctx, fit.coef),
                         r_hat(ctx, fit.coef, fit.lambda),
                         "curvature matrix is ill-conditioned");
}

CriterionValue dric(const GlmCriterionContext& ctx, const FitResult& fit) {
  check_context(ctx);
  if (!ctx.aug) return failed("doubly robust criterion needs the outcome model");
  if (!ctx.propensity)
    return failed("dric needs an estimated assignment model");
  if (ctx.family.family == Family::gaussian &&
      std::abs(ctx.family.sigma2 - ctx.aug->sigma2_f) >
          1e-9 * std::max(1.0, ctx.family.sigma2))
    return failed("family and augmentation variances disagree");
  Eigen::MatrixXd bias;
  try {
    bias = r_hat(ctx, fit.coef, fit.lambda) +
           s_hat(ctx, fit.coef, fit.lambda);
  } catch (const numerical_error& err) {
    return failed(err.what());
  }
  return trace_criterion(ctx, fit, k_hat(ctx, fit.coef), bias,
                         "complete-information matrix is ill-conditioned");
}

CriterionValue ipic_nonconvex(const GlmCriterionContext& ctx,
                              const FitResult& fit, const PenaltySpec& pen) {
  check_context(ctx);
  if (pen.kind != PenaltyKind::scad && pen.kind != PenaltyKind::mcplus)
    throw validation_error("nonconvex criterion needs a scad or mcplus fit");
  CriterionValue v;
  v.active_size = static_cast<int>(fit.active.size());
  v.gof = glm_gof(ctx, fit.coef);
  if (fit.active.empty()) {
    v.penalty = 0.0;
    v.value = v.gof;
    v.ok = true;
    return v;
  }
  const int k = v.active_size;
  const Eigen::MatrixXd J22 = submatrix(j_hat(ctx, fit.coef), fit.active);
  const Eigen::VectorXd v22 =
      subvector(mean_weighted_score(ctx, fit.coef), fit.active);
  const Eigen::MatrixXd Q022 =
      submatrix(q_hat(ctx, fit.coef, 0.0), fit.active);
  Eigen::VectorXd drho(k);
  Eigen::MatrixXd curv = J22;
  for (int a = 0; a < k; ++a) {
    const double bj = fit.coef[fit.active[a]];
    const double u = std::abs(bj);
    const double d1 = pen.kind == PenaltyKind::scad
                          ? scad_derivative(u, pen.lambda, pen.a)
                          : mcplus_derivative(u, pen.lambda, pen.gamma);
    const double d2 = pen.kind == PenaltyKind::scad
                          ? scad_second_derivative(u, pen.lambda, pen.a)
                          : mcplus_second_derivative(u, pen.lambda, pen.gamma);
    drho[a] = d1 * (bj > 0 ? 1.0 : -1.0);
    curv(a, a) += d2;
  }
  const SymInverse inv = guarded_inverse(curv);
  if (!inv.ok) return failed("regularized curvature matrix is ill-conditioned");
  const Eigen::MatrixXd bias = drho * drho.transpose() + Q022 -
                               v22 * drho.transpose() -
                               drho * v22.transpose();
  v.penalty = 2.0 * (inv.inv * bias).trace();
  v.value = v.gof + v.penalty;
  v.ok = true;
  return v;
}

}  // namespace scs
