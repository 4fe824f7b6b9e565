#include "scs/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scs {
namespace {

/**
 * Penalized quadratic minimizer by cyclic coordinate descent:
 *   f(theta) = 0.5 theta'A theta - b'theta
 *              + sum_j l1_j |theta_j| + 0.5 sum_j l2_j theta_j^2.
 * Coordinates with A_jj + l2_j == 0 are pinned at zero.
 */
struct QuadCd {
  Eigen::VectorXd coef;
  int sweeps = 0;
  bool sweep_converged = false;
  bool kkt_ok = false;
  double kkt_violation = 0.0;
  std::vector<int> pinned;
};

QuadCd quad_cd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
               const Eigen::VectorXd& l1, const Eigen::VectorXd& l2,
               const SolveOptions& opts, Eigen::VectorXd theta) {
  const int p = static_cast<int>(A.rows());
  QuadCd out;
  for (int j = 0; j < p; ++j) {
    if (A(j, j) + l2[j] <= 0.0) {
      out.pinned.push_back(j);
      theta[j] = 0.0;
    }
  }
  Eigen::VectorXd u = A * theta;  // maintained as A * theta

  const double scale0 = std::max(b.cwiseAbs().maxCoeff(), 1e-12);
  const double tol_abs = opts.tol_kkt * scale0;

  auto kkt = [&](double* viol) {
    double worst = 0.0;
    for (int j = 0; j < p; ++j) {
      const double g = u[j] - b[j] + l2[j] * theta[j];
      double v;
      if (std::abs(theta[j]) > opts.eps_active) {
        v = std::abs(g + l1[j] * (theta[j] > 0 ? 1.0 : -1.0));
      } else {
        v = std::max(0.0, std::abs(g) - l1[j]);
      }
      worst = std::max(worst, v);
    }
    *viol = worst;
    return worst <= tol_abs;
  };

  double maxd = std::numeric_limits<double>::infinity();
  while (out.sweeps < opts.max_iter) {
    ++out.sweeps;
    maxd = 0.0;
    for (int j = 0; j < p; ++j) {
      const double denom = A(j, j) + l2[j];
      if (denom <= 0.0) continue;
      const double rho = b[j] - (u[j] - A(j, j) * theta[j]);
      const double next = soft_threshold(rho, l1[j]) / denom;
      const double d = next - theta[j];
      if (d != 0.0) {
        u.noalias() += A.col(j) * d;
        theta[j] = next;
        maxd = std::max(maxd, std::abs(d));
      }
    }
    if (maxd < opts.coord_tol) {
      out.sweep_converged = true;
      if (kkt(&out.kkt_violation)) {
        out.kkt_ok = true;
        break;
      }
      if (maxd < opts.coord_tol * 1e-3) break;  // no further progress possible
    }
  }
  if (!out.kkt_ok) out.kkt_ok = kkt(&out.kkt_violation);
  out.coef = std::move(theta);
  return out;
}

std::vector<int> active_from(const Eigen::VectorXd& coef, double eps) {
  return active_set(coef, eps);
}

void finish_lsq_result(const WeightedLsqProblem& prob, const QuadCd& cd,
                       double l1_for_obj, double l2_for_obj,
                       const SolveOptions& opts, FitResult* fit) {
  fit->coef = cd.coef;
  fit->active = active_from(cd.coef, opts.eps_active);
  fit->iterations = cd.sweeps;
  fit->converged = cd.sweep_converged;
  fit->kkt_ok = cd.kkt_ok;
  fit->kkt_violation = cd.kkt_violation;
  const Eigen::VectorXd r = prob.w - prob.x * cd.coef;
  fit->objective = r.squaredNorm() + l1_for_obj * cd.coef.lpNorm<1>() +
                   l2_for_obj * cd.coef.squaredNorm();
  for (int j : cd.pinned) fit->flags.push_back("zero_column:" + std::to_string(j));
}

Eigen::VectorXd lla_penalty_levels(const Eigen::VectorXd& coef,
                                   const PenaltySpec& pen) {
  Eigen::VectorXd lam(coef.size());
  for (int j = 0; j < coef.size(); ++j) {
    const double u = std::abs(coef[j]);
    lam[j] = pen.kind == PenaltyKind::scad
                 ? scad_derivative(u, pen.lambda, pen.a)
                 : mcplus_derivative(u, pen.lambda, pen.gamma);
  }
  return lam;
}

double folded_penalty_value(const Eigen::VectorXd& coef,
                            const PenaltySpec& pen) {
  double s = 0.0;
  for (int j = 0; j < coef.size(); ++j) {
    const double u = std::abs(coef[j]);
    s += pen.kind == PenaltyKind::scad ? scad_value(u, pen.lambda, pen.a)
                                       : mcplus_value(u, pen.lambda, pen.gamma);
  }
  return s;
}

}  // namespace

double lasso_shutoff(const WeightedLsqProblem& prob) {
  if (prob.x.cols() == 0) return 0.0;
  return 2.0 * (prob.x.transpose() * prob.w).cwiseAbs().maxCoeff();
}

FitResult solve_lasso_lsq(const WeightedLsqProblem& prob, double lambda,
                          const SolveOptions& opts,
                          const Eigen::VectorXd* warm) {
  const int p = static_cast<int>(prob.x.cols());
  return solve_weighted_l1_lsq(prob, Eigen::VectorXd::Constant(p, lambda),
                               opts, warm);
}

FitResult solve_weighted_l1_lsq(const WeightedLsqProblem& prob,
                                const Eigen::VectorXd& lambda_j,
                                const SolveOptions& opts,
                                const Eigen::VectorXd* warm) {
  const int p = static_cast<int>(prob.x.cols());
  if (lambda_j.size() != p)
    throw validation_error("lambda vector length must match column count");
  if (lambda_j.minCoeff() < 0.0)
    throw validation_error("penalty levels must be nonnegative");
  const Eigen::MatrixXd A = 2.0 * prob.x.transpose() * prob.x;
  const Eigen::VectorXd b = 2.0 * prob.x.transpose() * prob.w;
  Eigen::VectorXd start = warm && warm->size() == p
                              ? *warm
                              : Eigen::VectorXd::Zero(p);
  const QuadCd cd = quad_cd(A, b, lambda_j, Eigen::VectorXd::Zero(p), opts,
                            std::move(start));
  FitResult fit;
  fit.lambda = lambda_j.size() > 0 ? lambda_j.maxCoeff() : 0.0;
  fit.coef = cd.coef;
  fit.active = active_from(cd.coef, opts.eps_active);
  fit.iterations = cd.sweeps;
  fit.converged = cd.sweep_converged;
  fit.kkt_ok = cd.kkt_ok;
  fit.kkt_violation = cd.kkt_violation;
  const Eigen::VectorXd r = prob.w - prob.x * cd.coef;
  fit.objective = r.squaredNorm() + lambda_j.dot(cd.coef.cwiseAbs());
  for (int j : cd.pinned) fit.flags.push_back("zero_column:" + std::to_string(j));
  return fit;
}

FitResult solve_elastic_net_lsq(const WeightedLsqProblem& prob, double l1,
                                double l2, const SolveOptions& opts,
                                const Eigen::VectorXd* warm) {
  if (l1 < 0.0 || l2 < 0.0)
    throw validation_error("penalty levels must be nonnegative");
  const int p = static_cast<int>(prob.x.cols());
  const Eigen::MatrixXd A = 2.0 * prob.x.transpose() * prob.x;
  const Eigen::VectorXd b = 2.0 * prob.x.transpose() * prob.w;
  Eigen::VectorXd start = Eigen::VectorXd::Zero(p);
  if (warm && warm->size() == p) start = *warm / (1.0 + l2);  // back to naive scale
  const QuadCd cd = quad_cd(A, b, Eigen::VectorXd::Constant(p, l1),
                            Eigen::VectorXd::Constant(p, 2.0 * l2), opts,
                            std::move(start));
  FitResult fit;
  fit.lambda = l1;
  fit.lambda2 = l2;
  finish_lsq_result(prob, cd, l1, l2, opts, &fit);
  fit.coef = cd.coef * (1.0 + l2);
  fit.active = active_from(cd.coef, opts.eps_active);
  return fit;
}

double group_lasso_shutoff(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                           const std::vector<int>& groups) {
  const int p = static_cast<int>(x.cols());
  const Eigen::MatrixXd B = x.transpose() * W;  // p x H
  if (groups.empty()) {
    double best = 0.0;
    for (int j = 0; j < p; ++j) best = std::max(best, B.row(j).norm());
    return 2.0 * best;
  }
  const int ng = *std::max_element(groups.begin(), groups.end());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ng);
  for (int j = 0; j < p; ++j) acc[groups[j] - 1] += B.row(j).squaredNorm();
  return 2.0 * std::sqrt(acc.maxCoeff());
}

GroupFit solve_group_lasso_lsq(const Eigen::MatrixXd& x,
                               const Eigen::MatrixXd& W, double lambda,
                               const std::vector<int>& groups,
                               const SolveOptions& opts,
                               const Eigen::MatrixXd* warm) {
  const int p = static_cast<int>(x.cols());
  const int H = static_cast<int>(W.cols());
  if (x.rows() != W.rows())
    throw validation_error("design and target row counts differ");
  if (lambda < 0.0) throw validation_error("lambda must be nonnegative");
  if (!groups.empty() && static_cast<int>(groups.size()) != p)
    throw validation_error("group label count must match column count");

  // Column lists per block; default is one block per column.
  std::vector<std::vector<int>> blocks;
  if (groups.empty()) {
    blocks.resize(p);
    for (int j = 0; j < p; ++j) blocks[j] = {j};
  } else {
    blocks.resize(*std::max_element(groups.begin(), groups.end()));
    for (int j = 0; j < p; ++j) blocks[groups[j] - 1].push_back(j);
  }
  const int nblocks = static_cast<int>(blocks.size());

  const Eigen::MatrixXd G = x.transpose() * x;  // p x p
  const Eigen::MatrixXd B = x.transpose() * W;  // p x H

  GroupFit fit;
  fit.lambda = lambda;
  Eigen::MatrixXd theta = (warm && warm->rows() == p && warm->cols() == H)
                              ? *warm
                              : Eigen::MatrixXd::Zero(p, H);
  Eigen::MatrixXd u = G * theta;  // maintained as G * theta

  // Pin blocks whose design columns are all zero.
  std::vector<bool> pinned(nblocks, false);
  for (int g = 0; g < nblocks; ++g) {
    double diag = 0.0;
    for (int j : blocks[g]) diag += G(j, j);
    if (diag <= 0.0) {
      pinned[g] = true;
      for (int j : blocks[g]) {
        theta.row(j).setZero();
        fit.flags.push_back("zero_column:" + std::to_string(j));
      }
    }
  }
  u = G * theta;

  double scale0 = 1e-12;
  for (int g = 0; g < nblocks; ++g) {
    double s = 0.0;
    for (int j : blocks[g]) s += B.row(j).squaredNorm();
    scale0 = std::max(scale0, 2.0 * std::sqrt(s));
  }
  const double tol_abs = opts.tol_kkt * scale0;

  auto block_norm = [&](int g) {
    double s = 0.0;
    for (int j : blocks[g]) s += theta.row(j).squaredNorm();
    return std::sqrt(s);
  };

  auto kkt = [&](double* viol) {
    double worst = 0.0;
    for (int g = 0; g < nblocks; ++g) {
      if (pinned[g]) continue;
      const double nrm = block_norm(g);
      double s = 0.0;
      for (int j : blocks[g]) {
        for (int h = 0; h < H; ++h) {
          double grad = 2.0 * (u(j, h) - B(j, h));
          if (nrm > opts.eps_active) grad += lambda * theta(j, h) / nrm;
          s += grad * grad;
        }
      }
      const double gnorm = std::sqrt(s);
      const double v = nrm > opts.eps_active ? gnorm
                                             : std::max(0.0, gnorm - lambda);
      worst = std::max(worst, v);
    }
    *viol = worst;
    return worst <= tol_abs;
  };

  double maxd = std::numeric_limits<double>::infinity();
  while (fit.iterations < opts.max_iter) {
    ++fit.iterations;
    maxd = 0.0;
    for (int g = 0; g < nblocks; ++g) {
      if (pinned[g]) continue;
      const auto& J = blocks[g];
      const int k = static_cast<int>(J.size());
      // Partial residual in Gram space: P = B_J - (G theta)_J + G_JJ theta_J.
      Eigen::MatrixXd old(k, H), P(k, H);
      Eigen::MatrixXd Gjj(k, k);
      for (int a = 0; a < k; ++a) {
        old.row(a) = theta.row(J[a]);
        for (int b2 = 0; b2 < k; ++b2) Gjj(a, b2) = G(J[a], J[b2]);
      }
      for (int a = 0; a < k; ++a)
        P.row(a) = B.row(J[a]) - u.row(J[a]) + (Gjj.row(a) * old);

      Eigen::MatrixXd next(k, H);
      if (k == 1) {
        const double nrm = P.row(0).norm();
        const double shrink = nrm > 0.0
                                  ? std::max(0.0, 1.0 - 0.5 * lambda / nrm)
                                  : 0.0;
        next.row(0) = (shrink / Gjj(0, 0)) * P.row(0);
      } else {
        // Inner proximal gradient on 0.5-scaled objective
        //   V'GjjV - 2 tr(P'V) + lambda ||V||_F (times 1), step 1/L.
        const double L =
            2.0 * Gjj.selfadjointView<Eigen::Lower>()
                      .eigenvalues()
                      .cwiseAbs()
                      .maxCoeff();
        next = old;
        for (int it = 0; it < 200; ++it) {
          const Eigen::MatrixXd grad = 2.0 * (Gjj * next - P);
          Eigen::MatrixXd cand = next - grad / L;
          const double nrm = cand.norm();
          cand *= nrm > 0.0 ? std::max(0.0, 1.0 - lambda / (L * nrm)) : 0.0;
          const double step = (cand - next).cwiseAbs().maxCoeff();
          next = cand;
          if (step < opts.coord_tol) break;
        }
      }
      const Eigen::MatrixXd d = next - old;
      const double dmax = d.cwiseAbs().maxCoeff();
      if (dmax > 0.0) {
        for (int a = 0; a < k; ++a) {
          u.noalias() += G.col(J[a]) * d.row(a);
          theta.row(J[a]) = next.row(a);
        }
        maxd = std::max(maxd, dmax);
      }
    }
    if (maxd < opts.coord_tol) {
      fit.converged = true;
      if (kkt(&fit.kkt_violation)) {
        fit.kkt_ok = true;
        break;
      }
      if (maxd < opts.coord_tol * 1e-3) break;
    }
  }
  if (!fit.kkt_ok) fit.kkt_ok = kkt(&fit.kkt_violation);

  fit.coef = theta;
  double pen = 0.0;
  for (int g = 0; g < nblocks; ++g) {
    const double nrm = block_norm(g);
    pen += nrm;
    if (nrm > opts.eps_active) {
      fit.active_groups.push_back(g);
      for (int j : blocks[g]) fit.active_cols.push_back(j);
    }
  }
  std::sort(fit.active_cols.begin(), fit.active_cols.end());
  fit.objective = (W - x * theta).squaredNorm() + lambda * pen;
  return fit;
}

double scad_value(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda) return lambda * u;
  if (u <= a * lambda)
    return (2.0 * a * lambda * u - u * u - lambda * lambda) / (2.0 * (a - 1.0));
  return lambda * lambda * (a + 1.0) / 2.0;
}

double scad_derivative(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda) return lambda;
  return std::max(0.0, (a * lambda - u) / (a - 1.0));
}

double scad_second_derivative(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda || u >= a * lambda) return 0.0;
  return -1.0 / (a - 1.0);
}

double mcplus_value(double u, double lambda, double gamma) {
  u = std::abs(u);
  if (u <= gamma * lambda) return lambda * u - u * u / (2.0 * gamma);
  return gamma * lambda * lambda / 2.0;
}

double mcplus_derivative(double u, double lambda, double gamma) {
  u = std::abs(u);
  return std::max(0.0, lambda - u / gamma);
}

double mcplus_second_derivative(double u, double lambda, double gamma) {
  u = std::abs(u);
  if (u >= gamma * lambda) return 0.0;
  return -1.0 / gamma;
}

namespace {

FitResult solve_folded_lsq(const WeightedLsqProblem& prob,
                           const PenaltySpec& pen, const SolveOptions& opts,
                           const Eigen::VectorXd* warm) {
  FitResult fit = solve_lasso_lsq(prob, pen.lambda, opts, warm);
  int rounds = 0;
  for (; rounds < 5; ++rounds) {
    const Eigen::VectorXd lam = lla_penalty_levels(fit.coef, pen);
    FitResult next = solve_weighted_l1_lsq(prob, lam, opts, &fit.coef);
    const double change = (next.coef - fit.coef).cwiseAbs().maxCoeff();
    fit = std::move(next);
    if (change < opts.coord_tol) break;
  }
  // Re-certify at the final coefficients: the fixed point satisfies the
  // stationarity conditions of the folded penalty itself.
  const Eigen::VectorXd lam = lla_penalty_levels(fit.coef, pen);
  const Eigen::VectorXd g =
      2.0 * prob.x.transpose() * (prob.x * fit.coef - prob.w);
  const double scale0 =
      std::max((2.0 * prob.x.transpose() * prob.w).cwiseAbs().maxCoeff(),
               1e-12);
  double worst = 0.0;
  for (int j = 0; j < fit.coef.size(); ++j) {
    double v;
    if (std::abs(fit.coef[j]) > opts.eps_active)
      v = std::abs(g[j] + lam[j] * (fit.coef[j] > 0 ? 1.0 : -1.0));
    else
      v = std::max(0.0, std::abs(g[j]) - lam[j]);
    worst = std::max(worst, v);
  }
  fit.kkt_violation = worst;
  fit.kkt_ok = worst <= opts.tol_kkt * scale0;
  fit.lambda = pen.lambda;
  fit.objective = (prob.w - prob.x * fit.coef).squaredNorm() +
                  folded_penalty_value(fit.coef, pen);
  fit.flags.push_back("lla_rounds:" + std::to_string(rounds + 1));
  return fit;
}

}  // namespace

FitResult solve_scad_lsq(const WeightedLsqProblem& prob, double lambda,
                         double a, const SolveOptions& opts,
                         const Eigen::VectorXd* warm) {
  PenaltySpec pen;
  pen.kind = PenaltyKind::scad;
  pen.lambda = lambda;
  pen.a = a;
  pen.validate(static_cast<int>(prob.x.cols()));
  return solve_folded_lsq(prob, pen, opts, warm);
}

FitResult solve_mcplus_lsq(const WeightedLsqProblem& prob, double lambda,
                           double gamma, const SolveOptions& opts,
                           const Eigen::VectorXd* warm) {
  PenaltySpec pen;
  pen.kind = PenaltyKind::mcplus;
  pen.lambda = lambda;
  pen.gamma = gamma;
  pen.validate(static_cast<int>(prob.x.cols()));
  return solve_folded_lsq(prob, pen, opts, warm);
}

double GlmObjective::value(const Eigen::VectorXd& beta) const {
  const int pp = p();
  double s = 0.0;
  for (const GlmTerm& t : terms) {
    const double eta = x->row(t.i).dot(beta.segment(t.h * pp, pp));
    if (family == Family::gaussian) {
      const double r = t.v - eta;
      s += 0.5 * t.c * r * r / sigma2;
    } else {
      s += -t.u * eta + t.c * t.m * log1pexp(eta);
    }
  }
  return s / static_cast<double>(N) + constant;
}

Eigen::VectorXd GlmObjective::gradient(const Eigen::VectorXd& beta) const {
  const int pp = p();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim());
  for (const GlmTerm& t : terms) {
    const double eta = x->row(t.i).dot(beta.segment(t.h * pp, pp));
    double deta;
    if (family == Family::gaussian) {
      deta = t.c * (eta - t.v) / sigma2;
    } else {
      deta = t.c * t.m * logistic(eta) - t.u;
    }
    g.segment(t.h * pp, pp).noalias() += deta * x->row(t.i).transpose();
  }
  return g / static_cast<double>(N);
}

double glm_shutoff(const GlmObjective& obj) {
  return obj.gradient(Eigen::VectorXd::Zero(obj.dim())).cwiseAbs().maxCoeff();
}

namespace {

double x_row_dot(const GlmObjective& obj, const GlmTerm& t,
                 const Eigen::VectorXd& beta) {
  const int pp = obj.p();
  return obj.x->row(t.i).dot(beta.segment(t.h * pp, pp));
}

/** Block-diagonal curvature and linear term of the local quadratic model. */
void glm_quadratic(const GlmObjective& obj, const Eigen::VectorXd& beta,
                   Eigen::MatrixXd* A, Eigen::VectorXd* b) {
  const int pp = obj.p();
  const int dim = obj.dim();
  A->setZero(dim, dim);
  for (const GlmTerm& t : obj.terms) {
    double w;
    if (obj.family == Family::gaussian) {
      w = t.c / obj.sigma2;
    } else {
      const double eta = clamp_eta(x_row_dot(obj, t, beta));
      const double s = logistic(eta);
      w = t.c * t.m * s * (1.0 - s);
      w = std::max(w, 1e-8 * std::max(t.c * t.m, 1.0));  // curvature floor
    }
    A->block(t.h * pp, t.h * pp, pp, pp).noalias() +=
        (w / obj.N) * obj.x->row(t.i).transpose() * obj.x->row(t.i);
  }
  *b = (*A) * beta - obj.gradient(beta);
}

FitResult solve_glm_weighted_l1(const GlmObjective& obj,
                                const Eigen::VectorXd& l1,
                                const Eigen::VectorXd& l2,
                                const SolveOptions& opts,
                                const Eigen::VectorXd* warm) {
  const int dim = obj.dim();
  Eigen::VectorXd beta =
      warm && warm->size() == dim ? *warm : Eigen::VectorXd::Zero(dim);

  auto penalty_value = [&](const Eigen::VectorXd& v) {
    return l1.dot(v.cwiseAbs()) + 0.5 * l2.dot(v.cwiseAbs2());
  };

  const double scale0 =
      std::max(obj.gradient(Eigen::VectorXd::Zero(dim)).cwiseAbs().maxCoeff(),
               1e-12);
  const double tol_abs = opts.tol_kkt * scale0;

  auto kkt = [&](const Eigen::VectorXd& v, double* viol) {
    const Eigen::VectorXd g = obj.gradient(v) + l2.cwiseProduct(v);
    double worst = 0.0;
    for (int j = 0; j < dim; ++j) {
      double s;
      if (std::abs(v[j]) > opts.eps_active)
        s = std::abs(g[j] + l1[j] * (v[j] > 0 ? 1.0 : -1.0));
      else
        s = std::max(0.0, std::abs(g[j]) - l1[j]);
      worst = std::max(worst, s);
    }
    *viol = worst;
    return worst <= tol_abs;
  };

  FitResult fit;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  SolveOptions inner = opts;
  inner.max_iter = std::min(opts.max_iter, 2000);
  double fcur = obj.value(beta) + penalty_value(beta);
  bool line_search_failed = false;

  const int outer_cap = obj.family == Family::gaussian ? 1 : 200;
  for (int outer = 0; outer < outer_cap; ++outer) {
    ++fit.iterations;
    glm_quadratic(obj, beta, &A, &b);
    const QuadCd cd = quad_cd(A, b, l1, l2, inner, beta);
    for (int j : cd.pinned)
      fit.flags.push_back("zero_column:" + std::to_string(j));
    Eigen::VectorXd cand = cd.coef;
    if (obj.family == Family::gaussian) {
      beta = std::move(cand);
      fit.converged = cd.sweep_converged;
      break;
    }
    const Eigen::VectorXd dir = cand - beta;
    const double dmax = dir.cwiseAbs().maxCoeff();
    double t = 1.0;
    double fnext = obj.value(cand) + penalty_value(cand);
    while (fnext > fcur + 1e-12 * std::abs(fcur) && t > 1e-6) {
      t *= 0.5;
      cand = beta + t * dir;
      fnext = obj.value(cand) + penalty_value(cand);
    }
    if (fnext > fcur + 1e-12 * std::abs(fcur)) {
      line_search_failed = true;
      break;  // keep the previous iterate
    }
    beta = std::move(cand);
    fcur = fnext;
    if (t * dmax < opts.coord_tol) {
      double viol;
      if (kkt(beta, &viol)) {
        fit.converged = true;
        break;
      }
      if (dmax < opts.coord_tol * 1e-3) break;
    }
  }
  if (line_search_failed) fit.flags.push_back("line_search_stalled");

  fit.coef = beta;
  fit.active = active_set(beta, opts.eps_active);
  fit.kkt_ok = kkt(beta, &fit.kkt_violation);
  if (obj.family == Family::gaussian) fit.converged = fit.kkt_ok;
  fit.objective = obj.value(beta) + penalty_value(beta);
  return fit;
}

}  // namespace

FitResult solve_penalized_glm(const GlmObjective& obj, const PenaltySpec& pen,
                              const SolveOptions& opts,
                              const Eigen::VectorXd* warm) {
  if (!obj.x) throw validation_error("GLM objective has no design matrix");
  if (obj.N <= 0) throw validation_error("GLM objective needs a positive N");
  const int dim = obj.dim();
  pen.validate(dim);
  switch (pen.kind) {
    case PenaltyKind::lasso: {
      FitResult fit = solve_glm_weighted_l1(
          obj, Eigen::VectorXd::Constant(dim, pen.lambda),
          Eigen::VectorXd::Zero(dim), opts, warm);
      fit.lambda = pen.lambda;
      return fit;
    }
    case PenaltyKind::elastic_net: {
      FitResult fit = solve_glm_weighted_l1(
          obj, Eigen::VectorXd::Constant(dim, pen.lambda),
          Eigen::VectorXd::Constant(dim, 2.0 * pen.lambda2), opts, warm);
      fit.lambda = pen.lambda;
      fit.lambda2 = pen.lambda2;
      return fit;
    }
    case PenaltyKind::scad:
    case PenaltyKind::mcplus: {
      FitResult fit = solve_glm_weighted_l1(
          obj, Eigen::VectorXd::Constant(dim, pen.lambda),
          Eigen::VectorXd::Zero(dim), opts, warm);
      int rounds = 0;
      for (; rounds < 5; ++rounds) {
        const Eigen::VectorXd lam = lla_penalty_levels(fit.coef, pen);
        FitResult next = solve_glm_weighted_l1(
            obj, lam, Eigen::VectorXd::Zero(dim), opts, &fit.coef);
        const double change = (next.coef - fit.coef).cwiseAbs().maxCoeff();
        fit = std::move(next);
        if (change < opts.coord_tol) break;
      }
      fit.lambda = pen.lambda;
      fit.objective = obj.value(fit.coef) + folded_penalty_value(fit.coef, pen);
      fit.flags.push_back("lla_rounds:" + std::to_string(rounds + 1));
      return fit;
    }
    case PenaltyKind::group_lasso:
      throw validation_error("group penalty is not supported for GLM fits");
  }
  throw validation_error("unknown penalty kind");
}

}  // namespace scs
