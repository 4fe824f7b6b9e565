#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "scs/csv.hpp"
#include "scs/data.hpp"
#include "scs/selection.hpp"

namespace scs {

/**
 * Which assumed nuisance model the generated data violates. The assumed
 * models see only the first confounder column; misspecification routes the
 * second (hidden) confounder into the corresponding true model.
 */
enum class Misspec { none, treatment, outcome, both };

std::string misspec_name(Misspec m);
Misspec misspec_from_name(const std::string& name);

/**
 * Two-group Gaussian benchmark: x ~ N(0, I_p), z ~ N(0,1), group 1 drawn
 * with probability expit(z), y = x' theta^[g] + z + N(0, sigma2). The first
 * p/4 coordinates of theta^[1] equal theta1, the next p/4 equal theta2, the
 * rest are zero, and theta^[2] = -theta^[1]. The estimand is the contrast
 * (theta^[2] - theta^[1]) / sqrt(2), i.e. c = (-1, 1)/sqrt(2). Propensities
 * are treated as known.
 */
struct GaussianContrastDgp {
  int p = 8;
  int N = 40;
  double theta1 = 0.2;
  double theta2 = 0.2;
  double sigma2 = 1.0;
};

/**
 * Multi-group GLM benchmark with estimated nuisances. Assignment follows a
 * softmax in the true confounders (groups below H share one coefficient
 * row; group H is the reference with zero coefficients). Outcomes are
 * binomial with m trials and logit mean x' beta^[g] + z' gamma, or Gaussian
 * with that mean and unit variance. The observed confounder column is the
 * scalar z1; the hidden second confounder is z1^2/sqrt(2) - 1/sqrt(2)
 * (binomial) or an independent N(0,1) draw (gaussian).
 */
struct GlmDgp {
  Family family = Family::binomial_logit;
  int p = 2;
  int H = 4;
  int N = 200;
  int m = 10;  // trials; ignored for gaussian
  double beta_star = 0.1;
  double alpha_star = 0.1;
  double gamma_star = 0.2;
  Misspec misspec = Misspec::none;
};

struct ContrastTruth {
  Eigen::MatrixXd theta_h;  // p x H per-group coefficients
  Eigen::VectorXd theta;    // contrast target sum_h c_h theta^[h]
  ContrastSpec contrast;
  Eigen::MatrixXd e;   // true propensities, n x H
  Eigen::MatrixXd mu;  // true means x' theta^[h] + z, n x H
};

struct ContrastSample {
  Dataset data;
  ContrastTruth truth;
};

struct GlmTruth {
  Eigen::MatrixXd beta_h;  // p x H
  Eigen::VectorXd beta;    // stacked, block h = [h*p, (h+1)*p)
  Eigen::MatrixXd e;       // true propensities, n x H
};

struct GlmSample {
  Dataset data;
  GlmTruth truth;
};

ContrastSample generate_contrast(const GaussianContrastDgp& dgp,
                                 std::mt19937_64& rng);
GlmSample generate_glm(const GlmDgp& dgp, std::mt19937_64& rng);

/** Per-bucket statistic keyed by attained active-set size 0..size()-1. */
struct BucketRow {
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<int> count;
  /** increment[j] = mean[j] - mean[j-1] for j >= 1 (NaN if either side is
   * unoccupied); increment_se combines the two bucket standard errors. */
  std::vector<double> increment;
  std::vector<double> increment_se;
};

struct BiasStudyResult {
  int buckets = 0;  // bucket indices run 0..buckets-1
  /** Gaussian study: "ipcp" (mean penalty term) and "true" (risk third-term
   * plug-in). GLM study: "ipic"/"true1" on the weighted path and
   * "dric"/"true2" on the doubly robust path. */
  std::map<std::string, BucketRow> rows;
  int replications = 0;
  std::uint64_t seed = 0;
};

BiasStudyResult run_bias_study(const GaussianContrastDgp& dgp, int replications,
                               std::uint64_t seed, const GridSpec& grid = {});
BiasStudyResult run_bias_study(const GlmDgp& dgp, int replications,
                               std::uint64_t seed, const GridSpec& grid = {});

struct SelectionStats {
  double p1_mean = 0, p1_sd = 0;      // active among true-nonzero
  double rmse1_mean = 0, rmse1_sd = 0;  // sqrt(sum sq err, nonzero) x10
  double p2_mean = 0, p2_sd = 0;      // active among true-zero
  double rmse2_mean = 0, rmse2_sd = 0;
  double p_mean = 0, p_sd = 0;
  double rmse_mean = 0, rmse_sd = 0;
  int n_used = 0;
  int failures = 0;
};

struct SelectionStudyResult {
  std::map<std::string, SelectionStats> by_criterion;
  int replications = 0;
  std::uint64_t seed = 0;
};

SelectionStudyResult run_selection_study(const GaussianContrastDgp& dgp,
                                         const std::vector<CriterionKind>& criteria,
                                         int replications, std::uint64_t seed,
                                         const GridSpec& grid = {});
SelectionStudyResult run_selection_study(const GlmDgp& dgp,
                                         const std::vector<CriterionKind>& criteria,
                                         int replications, std::uint64_t seed,
                                         const GridSpec& grid = {});

/**
 * Paired check that the unbiased-risk identity holds: at each of a fixed
 * geometric lambda grid (anchored by a pilot replicate), the Monte Carlo
 * mean of the criterion equals the mean of risk plug-in + squared-noise
 * constant. diff = criterion - oracle, per replicate.
 */
struct SureCheckResult {
  std::vector<double> lambdas;
  std::vector<double> criterion_mean, criterion_se;
  std::vector<double> oracle_mean, oracle_se;
  std::vector<double> diff_mean, diff_se;
  int replications = 0;
  std::uint64_t seed = 0;
};

SureCheckResult run_sure_check(const GaussianContrastDgp& dgp, int replications,
                               std::uint64_t seed, int n_lambda = 5,
                               double ratio = 0.02);

/** CSV mirrors: one row per cell (setting, criterion, statistic, mean, sd,
 * n_reps); unoccupied buckets are omitted rather than zero-filled. */
CsvTable bias_study_table(const BiasStudyResult& result,
                          const std::string& setting);
CsvTable selection_study_table(const SelectionStudyResult& result,
                               const std::string& setting);
CsvTable sure_check_table(const SureCheckResult& result,
                          const std::string& setting);

}  // namespace scs
