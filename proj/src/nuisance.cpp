#include "scs/nuisance.hpp"

#include <cmath>

#include "scs/common.hpp"

namespace scs {

Eigen::MatrixXd multinomial_probs(const Eigen::MatrixXd& z,
                                  const Eigen::MatrixXd& alpha) {
  const int n = static_cast<int>(z.rows());
  const int H = static_cast<int>(alpha.rows()) + 1;
  Eigen::MatrixXd eta(n, H);
  eta.col(H - 1).setZero();
  if (H > 1) eta.leftCols(H - 1) = z * alpha.transpose();
  Eigen::MatrixXd probs(n, H);
  for (int i = 0; i < n; ++i) {
    const double mx = eta.row(i).maxCoeff();
    double denom = 0.0;
    for (int h = 0; h < H; ++h) {
      probs(i, h) = std::exp(eta(i, h) - mx);
      denom += probs(i, h);
    }
    probs.row(i) /= denom;
  }
  return probs;
}

PropensityFit fit_propensity(const Dataset& data, int max_iter) {
  const int n = data.n();
  const int q = data.q();
  const int H = data.H();
  PropensityFit fit;
  fit.alpha = Eigen::MatrixXd::Zero(std::max(H - 1, 0), q);
  if (H <= 1) {
    fit.probs = Eigen::MatrixXd::Ones(n, 1);
    fit.converged = true;
    return fit;
  }
  if (q == 0) {
    // Intercept-free model with no covariates: all groups equally likely.
    fit.probs = Eigen::MatrixXd::Constant(n, H, 1.0 / H);
    fit.converged = true;
    return fit;
  }

  const int dim = (H - 1) * q;
  const double tol = 1e-8 * n;

  auto loglik = [&](const Eigen::MatrixXd& probs) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      s += std::log(std::max(probs(i, data.group(i)), 1e-300));
    return s;
  };

  fit.probs = multinomial_probs(data.z, fit.alpha);
  double cur = loglik(fit.probs);
  for (int it = 0; it < max_iter; ++it) {
    ++fit.iterations;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
      for (int h = 0; h < H - 1; ++h) {
        const double d = (data.group(i) == h ? 1.0 : 0.0) - fit.probs(i, h);
        g.segment(h * q, q).noalias() += d * data.z.row(i).transpose();
        for (int h2 = 0; h2 < H - 1; ++h2) {
          const double w = fit.probs(i, h) * ((h == h2 ? 1.0 : 0.0) -
                                              fit.probs(i, h2));
          Hm.block(h * q, h2 * q, q, q).noalias() +=
              w * data.z.row(i).transpose() * data.z.row(i);
        }
      }
    }
    fit.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (fit.grad_norm < tol) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd Hreg = Hm + 1e-10 * n * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::VectorXd step = Hreg.ldlt().solve(g);
    double t = 1.0;
    Eigen::MatrixXd alpha_next = fit.alpha;
    for (int back = 0; back < 40; ++back) {
      alpha_next = fit.alpha;
      for (int h = 0; h < H - 1; ++h)
        alpha_next.row(h) += t * step.segment(h * q, q).transpose();
      const Eigen::MatrixXd probs_next = multinomial_probs(data.z, alpha_next);
      const double next = loglik(probs_next);
      if (next >= cur - 1e-12 * std::abs(cur)) {
        fit.alpha = alpha_next;
        fit.probs = probs_next;
        cur = next;
        break;
      }
      t *= 0.5;
    }
  }
  if (!fit.converged) {
    fit.separation =
        fit.alpha.cwiseAbs().maxCoeff() > 15.0 || !std::isfinite(cur);
  }
  return fit;
}

Eigen::MatrixXd clip_probabilities(const Eigen::MatrixXd& probs, double eps) {
  Eigen::MatrixXd out = probs.cwiseMax(eps).cwiseMin(1.0 - eps);
  for (int i = 0; i < out.rows(); ++i) out.row(i) /= out.row(i).sum();
  return out;
}

OutcomeNuisanceFit fit_outcome_nuisance(const Dataset& data,
                                        const ModelFamily& family,
                                        bool pooled_sigma) {
  const int n = data.n();
  const int q = data.q();
  const int H = data.H();
  if (q == 0)
    throw validation_error("outcome regression needs at least one z column");

  OutcomeNuisanceFit fit;
  fit.family = family.family;
  fit.pooled_sigma = pooled_sigma;

  if (family.family == Family::gaussian) {
    // gamma is the least squares solution regardless of the variance
    // grouping; variances are residual mean squares with divisor n_h.
    const Eigen::MatrixXd G = data.z.transpose() * data.z;
    fit.gamma = G.ldlt().solve(data.z.transpose() * data.y);
    const Eigen::VectorXd r = data.y - data.z * fit.gamma;
    if (pooled_sigma) {
      fit.sigma2_g = Eigen::VectorXd::Constant(1, r.squaredNorm() / n);
    } else {
      fit.sigma2_g = Eigen::VectorXd::Zero(H);
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(H);
      for (int i = 0; i < n; ++i) {
        fit.sigma2_g[data.group(i)] += r[i] * r[i];
        counts[data.group(i)] += 1.0;
      }
      for (int h = 0; h < H; ++h)
        fit.sigma2_g[h] = counts[h] > 0 ? fit.sigma2_g[h] / counts[h] : 0.0;
    }
    fit.converged = true;
    fit.iterations = 1;
    return fit;
  }

  // Binomial: Newton with step halving on y ~ Bin(m, logistic(z'gamma)).
  fit.gamma = Eigen::VectorXd::Zero(q);
  fit.sigma2_g = Eigen::VectorXd::Constant(1, 0.0);
  auto loglik = [&](const Eigen::VectorXd& gamma) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double eta = data.z.row(i).dot(gamma);
      const double m = data.trials_or(i, family.default_trials);
      s += data.y[i] * eta - m * log1pexp(eta);
    }
    return s;
  };
  double cur = loglik(fit.gamma);
  for (int it = 0; it < 100; ++it) {
    ++fit.iterations;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd Hm = Eigen::MatrixXd::Zero(q, q);
    for (int i = 0; i < n; ++i) {
      const double eta = clamp_eta(data.z.row(i).dot(fit.gamma));
      const double m = data.trials_or(i, family.default_trials);
      const double pr = logistic(eta);
      g.noalias() += (data.y[i] - m * pr) * data.z.row(i).transpose();
      Hm.noalias() +=
          m * pr * (1.0 - pr) * data.z.row(i).transpose() * data.z.row(i);
    }
    if (g.lpNorm<Eigen::Infinity>() < 1e-8 * n) {
      fit.converged = true;
      break;
    }
    Eigen::MatrixXd Hreg = Hm + 1e-10 * n * Eigen::MatrixXd::Identity(q, q);
    const Eigen::VectorXd step = Hreg.ldlt().solve(g);
    double t = 1.0;
    for (int back = 0; back < 40; ++back) {
      const Eigen::VectorXd cand = fit.gamma + t * step;
      const double next = loglik(cand);
      if (next >= cur - 1e-12 * std::abs(cur)) {
        fit.gamma = cand;
        cur = next;
        break;
      }
      t *= 0.5;
    }
  }
  return fit;
}

double AugmentationModel::mean(int i) const {
  const double zg = data->z.row(i).dot(fit->gamma);
  if (family == Family::gaussian) return zg;
  const double m = data->trials_or(i, 1.0);
  return m * logistic(clamp_eta(zg));
}

double AugmentationModel::value(int i, int h, double eta) const {
  if (family == Family::gaussian) {
    const double d = mean(i) - eta;
    const double s2g = fit->sigma2_for(h);
    return -(d * d + s2g) / (2.0 * sigma2_f) -
           0.5 * std::log(2.0 * M_PI * sigma2_f);
  }
  return mean(i) * eta - data->trials_or(i, 1.0) * log1pexp(eta);
}

double AugmentationModel::deta(int i, double eta) const {
  if (family == Family::gaussian) return (mean(i) - eta) / sigma2_f;
  return mean(i) - data->trials_or(i, 1.0) * logistic(clamp_eta(eta));
}

double AugmentationModel::d2eta(int i, double eta) const {
  if (family == Family::gaussian) return -1.0 / sigma2_f;
  const double m = data->trials_or(i, 1.0);
  const double s = logistic(clamp_eta(eta));
  return -m * s * (1.0 - s);
}

Eigen::VectorXd AugmentationModel::cross_gamma(int i, double eta) const {
  (void)eta;
  if (family == Family::gaussian)
    return data->z.row(i).transpose() / sigma2_f;
  const double m = data->trials_or(i, 1.0);
  const double pr = logistic(clamp_eta(data->z.row(i).dot(fit->gamma)));
  return m * pr * (1.0 - pr) * data->z.row(i).transpose();
}

}  // namespace scs
