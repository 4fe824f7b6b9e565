#include "scs/data.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace scs {

void Dataset::validate() const {
  const int N = n();
  if (N == 0) throw validation_error("dataset: no rows");
  if (n_groups < 1) throw validation_error("dataset: n_groups must be >= 1");
  if (t.size() != N) throw validation_error("dataset: t length != y length");
  if (x.rows() != N) throw validation_error("dataset: x rows != y length");
  if (z.rows() != N) throw validation_error("dataset: z rows != y length");
  if (x.cols() < 1) throw validation_error("dataset: x must have >= 1 column");
  if (trials.size() != 0 && trials.size() != N)
    throw validation_error("dataset: trials length must be 0 or n");
  for (int i = 0; i < N; ++i) {
    if (t[i] < 1 || t[i] > n_groups)
      throw validation_error("dataset: t[" + std::to_string(i) +
                             "] outside 1.." + std::to_string(n_groups));
    if (!std::isfinite(y[i]))
      throw validation_error("dataset: non-finite y at row " + std::to_string(i));
    if (trials.size() > 0) {
      if (!(trials[i] > 0) || trials[i] != std::floor(trials[i]))
        throw validation_error("dataset: trials must be positive integers");
      if (y[i] < 0 || y[i] > trials[i])
        throw validation_error("dataset: y outside [0, trials] at row " +
                               std::to_string(i));
    }
  }
  if (!x.allFinite()) throw validation_error("dataset: non-finite entry in x");
  if (!z.allFinite()) throw validation_error("dataset: non-finite entry in z");
}

void ContrastSpec::validate(int H) const {
  if (c.size() != H)
    throw validation_error("contrast: length " + std::to_string(c.size()) +
                           " != number of groups " + std::to_string(H));
  const double sum = c.sum();
  const double ss = c.squaredNorm();
  if (std::abs(sum) > 1e-10)
    throw validation_error("contrast: weights must sum to 0 (got " +
                           std::to_string(sum) + ")");
  if (std::abs(ss - 1.0) > 1e-10)
    throw validation_error("contrast: weights must have unit sum of squares (got " +
                           std::to_string(ss) + ")");
}

void ModelFamily::validate() const {
  if (family == Family::gaussian) {
    if (sigma2_known && !(sigma2 > 0))
      throw validation_error("family: gaussian sigma2 must be positive");
  } else {
    if (!(default_trials > 0) || default_trials != std::floor(default_trials))
      throw validation_error("family: binomial trials must be a positive integer");
  }
}

void PenaltySpec::validate(int p) const {
  if (!(lambda >= 0)) throw validation_error("penalty: lambda must be >= 0");
  switch (kind) {
    case PenaltyKind::elastic_net:
      if (!(lambda2 >= 0))
        throw validation_error("penalty: lambda2 must be >= 0");
      break;
    case PenaltyKind::scad:
      if (!(a > 2.0)) throw validation_error("penalty: scad a must be > 2");
      break;
    case PenaltyKind::mcplus:
      if (!(gamma > 1.0)) throw validation_error("penalty: mcplus gamma must be > 1");
      break;
    default:
      break;
  }
  if (!groups.empty()) {
    if (static_cast<int>(groups.size()) != p)
      throw validation_error("penalty: group map length != number of columns");
    // Labels must be 1-based and contiguous: {1, ..., G} all present.
    std::set<int> labels(groups.begin(), groups.end());
    if (*labels.begin() < 1)
      throw validation_error("penalty: group labels are 1-based");
    const int G = *labels.rbegin();
    if (static_cast<int>(labels.size()) != G)
      throw validation_error("penalty: group labels must be contiguous 1..G");
  }
}

Eigen::VectorXd Standardization::unscale_coef(const Eigen::VectorXd& coef) const {
  Eigen::VectorXd out = coef;
  for (int j = 0; j < out.size(); ++j) out[j] /= scale[j];
  return out;
}

Standardization standardize_columns(Eigen::MatrixXd& m) {
  Standardization s;
  const int n = static_cast<int>(m.rows());
  const int p = static_cast<int>(m.cols());
  s.center.resize(p);
  s.scale.resize(p);
  for (int j = 0; j < p; ++j) {
    const double mean = m.col(j).mean();
    const double var = (m.col(j).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    s.center[j] = mean;
    s.scale[j] = sd > 0 ? sd : 1.0;
    m.col(j) = (m.col(j).array() - mean) / s.scale[j];
  }
  return s;
}

}  // namespace scs
