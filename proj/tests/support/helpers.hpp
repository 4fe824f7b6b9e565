#pragma once

// Shared oracles and builders for the test suites. Everything here is kept
// independent of the library's own solver / criterion code paths: grid
// searches enumerate objectives directly, penalty formulas are restated from
// scratch, and derivatives come from central differences. When a test agrees
// with one of these oracles, the agreement is between two separately written
// computations.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "scs/data.hpp"

namespace testkit {

// ---------------------------------------------------------------------------
// comparisons

/** Relative discrepancy ||a - b|| / max(1, ||b||). */
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

/**
 * Runs fn and returns the message of the exception of type Ex it throws.
 * Returns "" when fn does not throw or throws something else, so
 * CHECK(contains(catch_message<...>(fn), "...")) asserts both the type and
 * the message in one go.
 */
template <class Ex, class Fn>
inline std::string catch_message(Fn&& fn) {
  try {
    fn();
  } catch (const Ex& e) {
    return e.what();
  } catch (...) {
    return {};
  }
  return {};
}

// ---------------------------------------------------------------------------
// finite differences

/** Central-difference gradient of a scalar function. */
inline Eigen::VectorXd fd_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi[j] += h;
    lo[j] -= h;
    g[j] = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

/** Central-difference Jacobian (row i = d f_i / d x). */
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    Eigen::VectorXd hi = x;
    Eigen::VectorXd lo = x;
    hi[j] += h;
    lo[j] -= h;
    jac.col(j) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return jac;
}

/** Central-difference derivative of a scalar function of one variable. */
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// exhaustive grid minimization (oracle for small penalized problems)

/** Argmin of f over the grid {lo, lo+step, ..., hi}. */
inline double grid_min_1d(const std::function<double(double)>& f, double lo,
                          double hi, double step) {
  double best_x = lo;
  double best = f(lo);
  for (double v = lo + step; v <= hi + 0.5 * step; v += step) {
    const double fv = f(v);
    if (fv < best) {
      best = fv;
      best_x = v;
    }
  }
  return best_x;
}

/** Coarse pass over [lo, hi], then a fine pass around the winner. */
inline double grid_min_1d_refined(const std::function<double(double)>& f,
                                  double lo, double hi, double coarse = 1e-2,
                                  double fine = 1e-5) {
  const double c = grid_min_1d(f, lo, hi, coarse);
  return grid_min_1d(f, c - coarse, c + coarse, fine);
}

/** Two-stage exhaustive minimization over [lo, hi]^2. */
inline Eigen::Vector2d grid_min_2d(
    const std::function<double(const Eigen::Vector2d&)>& f, double lo,
    double hi, double coarse = 5e-3, double fine = 1e-4) {
  Eigen::Vector2d best_x(lo, lo);
  double best = f(best_x);
  for (double u = lo; u <= hi + 0.5 * coarse; u += coarse) {
    for (double v = lo; v <= hi + 0.5 * coarse; v += coarse) {
      const Eigen::Vector2d xy(u, v);
      const double fv = f(xy);
      if (fv < best) {
        best = fv;
        best_x = xy;
      }
    }
  }
  Eigen::Vector2d refined = best_x;
  for (double u = best_x[0] - coarse; u <= best_x[0] + coarse + 0.5 * fine;
       u += fine) {
    for (double v = best_x[1] - coarse; v <= best_x[1] + coarse + 0.5 * fine;
         v += fine) {
      const Eigen::Vector2d xy(u, v);
      const double fv = f(xy);
      if (fv < best) {
        best = fv;
        refined = xy;
      }
    }
  }
  return refined;
}

// ---------------------------------------------------------------------------
// reference penalty formulas (restated piecewise, not shared with src/)

inline double scad_ref(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda) return lambda * u;
  if (u <= a * lambda) {
    return (2.0 * a * lambda * u - u * u - lambda * lambda) /
           (2.0 * (a - 1.0));
  }
  return 0.5 * (a + 1.0) * lambda * lambda;
}

inline double scad_ref_d1(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda) return lambda;
  if (u <= a * lambda) return (a * lambda - u) / (a - 1.0);
  return 0.0;
}

inline double scad_ref_d2(double u, double lambda, double a) {
  u = std::abs(u);
  if (u <= lambda) return 0.0;
  if (u <= a * lambda) return -1.0 / (a - 1.0);
  return 0.0;
}

inline double mcp_ref(double u, double lambda, double gamma) {
  u = std::abs(u);
  if (u <= gamma * lambda) return lambda * u - u * u / (2.0 * gamma);
  return 0.5 * gamma * lambda * lambda;
}

inline double mcp_ref_d1(double u, double lambda, double gamma) {
  u = std::abs(u);
  if (u <= gamma * lambda) return lambda - u / gamma;
  return 0.0;
}

inline double mcp_ref_d2(double u, double lambda, double gamma) {
  u = std::abs(u);
  if (u <= gamma * lambda) return -1.0 / gamma;
  return 0.0;
}

// ---------------------------------------------------------------------------
// data builders

/** Gaussian toy: x, z standard normal, groups uniform, y linear + noise. */
inline scs::Dataset make_gaussian_dataset(int n, int p, int q, int H,
                                          unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, H);
  scs::Dataset d;
  d.n_groups = H;
  d.y.resize(n);
  d.t.resize(n);
  d.x.resize(n, p);
  d.z.resize(n, std::max(q, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = normal(rng);
    for (int j = 0; j < q; ++j) d.z(i, j) = normal(rng);
    d.t[i] = pick(rng);
    double mean = 0.0;
    for (int j = 0; j < p; ++j) {
      mean += 0.3 * (j % 2 == 0 ? 1.0 : -1.0) * d.x(i, j);
    }
    if (q > 0) mean += 0.5 * d.z(i, 0);
    d.y[i] = mean + normal(rng);
  }
  return d;
}

/** Binomial toy with a constant trial count m on every row. */
inline scs::Dataset make_binomial_dataset(int n, int p, int q, int H, int m,
                                          unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, H);
  scs::Dataset d;
  d.n_groups = H;
  d.y.resize(n);
  d.t.resize(n);
  d.x.resize(n, p);
  d.z.resize(n, std::max(q, 0));
  d.trials = Eigen::VectorXd::Constant(n, static_cast<double>(m));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) d.x(i, j) = normal(rng);
    for (int j = 0; j < q; ++j) d.z(i, j) = normal(rng);
    d.t[i] = pick(rng);
    double eta = 0.0;
    for (int j = 0; j < p; ++j) {
      eta += 0.4 * (j % 2 == 0 ? 1.0 : -1.0) * d.x(i, j);
    }
    const double prob = 1.0 / (1.0 + std::exp(-eta));
    std::binomial_distribution<int> draw(m, prob);
    d.y[i] = static_cast<double>(draw(rng));
  }
  return d;
}

/** Random assignment probabilities, bounded away from zero, rows sum to 1. */
inline Eigen::MatrixXd make_propensity(int n, int H, unsigned seed,
                                       double floor = 0.15) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(floor, 1.0);
  Eigen::MatrixXd e(n, H);
  for (int i = 0; i < n; ++i) {
    for (int h = 0; h < H; ++h) e(i, h) = unif(rng);
    e.row(i) /= e.row(i).sum();
  }
  return e;
}

}  // namespace testkit
