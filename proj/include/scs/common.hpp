#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace scs {

/** Invalid input or configuration; the CLI maps this to exit code 2. */
class validation_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/** A computation that cannot continue numerically; CLI exit code 3. */
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Soft-thresholding: sign(v) * max(|v| - t, 0). */
inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

/** Linear predictors are clamped to +/- eta_max before exponentiation. */
constexpr double kEtaMax = 30.0;

inline double clamp_eta(double eta) {
  if (eta > kEtaMax) return kEtaMax;
  if (eta < -kEtaMax) return -kEtaMax;
  return eta;
}

/** Logistic function with the standard eta clamp. */
inline double logistic(double eta) {
  eta = clamp_eta(eta);
  if (eta >= 0.0) {
    const double ex = std::exp(-eta);
    return 1.0 / (1.0 + ex);
  }
  const double ex = std::exp(eta);
  return ex / (1.0 + ex);
}

/** log(1 + exp(eta)), overflow-safe, with the standard eta clamp. */
inline double log1pexp(double eta) {
  eta = clamp_eta(eta);
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}

/**
 * Inverse of a symmetric matrix via eigendecomposition with a condition
 * guard. `ok == false` (condition number above `max_cond`, or a non-finite
 * entry) means the caller must treat the quantity as failed rather than
 * propagate garbage.
 */
struct SymInverse {
  Eigen::MatrixXd inv;
  double cond = 0.0;
  bool ok = false;
};

SymInverse guarded_inverse(const Eigen::MatrixXd& m, double max_cond = 1e12);

/** Indices j with |coef[j]| > eps, ascending. */
std::vector<int> active_set(const Eigen::VectorXd& coef, double eps);

/** Sign vector restricted to an active set (0 elsewhere). */
Eigen::VectorXd sign_on_active(const Eigen::VectorXd& coef,
                               const std::vector<int>& active);

/** Rows/columns of `m` restricted to `idx` (in the given order). */
Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx);
Eigen::VectorXd subvector(const Eigen::VectorXd& v, const std::vector<int>& idx);

/**
 * Deterministic per-replicate RNG stream: the generator for replicate r of a
 * study seeded with `seed` depends only on (seed, r), never on worker count
 * or scheduling, so sharded runs aggregate bit-identically.
 */
std::mt19937_64 replicate_rng(std::uint64_t seed, std::uint64_t replicate);

/** FNV-1a 64-bit digest of a byte string (non-cryptographic). */
std::uint64_t fnv1a64(const std::string& bytes);

/** Number of worker threads: SCS_THREADS if set, else hardware concurrency. */
int worker_count();

}  // namespace scs
