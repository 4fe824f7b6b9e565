#include "scs/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <thread>
#include <utility>

#include "scs/common.hpp"
#include "scs/criteria.hpp"
#include "scs/estimators.hpp"
#include "scs/nuisance.hpp"

namespace scs {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/**
 * Runs body(r) for r = 0..reps-1, striding replicates across workers so the
 * partition (and therefore every per-replicate RNG stream) is independent of
 * the worker count. Results must be written to per-replicate slots; callers
 * aggregate serially afterwards in replicate order.
 */
void parallel_replicates(int reps, const std::function<void(int)>& body) {
  int workers = std::min(worker_count(), reps);
  if (workers <= 1) {
    for (int r = 0; r < reps; ++r) body(r);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w, reps, workers] {
      try {
        for (int r = w; r < reps; r += workers) body(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/** Per-replicate bucket values (NaN = bucket not attained) -> BucketRow. */
BucketRow summarize_buckets(const std::vector<std::vector<double>>& values,
                            int buckets) {
  BucketRow row;
  row.mean.assign(buckets, kNaN);
  row.sd.assign(buckets, kNaN);
  row.count.assign(buckets, 0);
  row.increment.assign(buckets, kNaN);
  row.increment_se.assign(buckets, kNaN);
  for (int j = 0; j < buckets; ++j) {
    std::vector<double> occupied;
    for (const auto& rep : values) {
      if (j < static_cast<int>(rep.size()) && std::isfinite(rep[j])) {
        occupied.push_back(rep[j]);
      }
    }
    row.count[j] = static_cast<int>(occupied.size());
    if (!occupied.empty()) {
      auto [m, s] = mean_sd(occupied);
      row.mean[j] = m;
      row.sd[j] = s;
    }
  }
  for (int j = 1; j < buckets; ++j) {
    if (row.count[j] > 0 && row.count[j - 1] > 0) {
      row.increment[j] = row.mean[j] - row.mean[j - 1];
      double a = row.sd[j] * row.sd[j] / row.count[j];
      double b = row.sd[j - 1] * row.sd[j - 1] / row.count[j - 1];
      row.increment_se[j] = std::sqrt(a + b);
    }
  }
  return row;
}

void check_contrast_dgp(const GaussianContrastDgp& dgp) {
  if (dgp.p < 4 || dgp.p % 4 != 0) {
    throw validation_error("contrast benchmark needs p divisible by 4");
  }
  if (dgp.N <= 0) throw validation_error("sample size must be positive");
  if (!(dgp.sigma2 > 0.0)) {
    throw validation_error("noise variance must be positive");
  }
}

void check_glm_dgp(const GlmDgp& dgp) {
  if (dgp.N <= 0) throw validation_error("sample size must be positive");
  if (dgp.H < 2) throw validation_error("need at least two groups");
  if (dgp.family == Family::binomial_logit) {
    if (dgp.m < 1) throw validation_error("binomial trials must be >= 1");
    if (dgp.p < 2 || dgp.p > 4) {
      throw validation_error("binomial benchmark supports p in {2, 3, 4}");
    }
  } else if (dgp.p != 2 && dgp.p != 4) {
    throw validation_error("gaussian benchmark supports p in {2, 4}");
  }
}

/**
 * Per-group causal coefficients. The two-coordinate seed patterns cycle with
 * period four: (2b, 0), (0, b), (-b, 0), (0, -2b). Wider vectors repeat
 * coordinates: the binomial benchmark appends the first (p = 3) and then the
 * second (p = 4) seed coordinate, while the gaussian one duplicates each seed
 * coordinate in place (p = 4).
 */
Eigen::MatrixXd glm_beta_patterns(const GlmDgp& dgp) {
  const double b = dgp.beta_star;
  const double seeds[4][2] = {
      {2 * b, 0.0}, {0.0, b}, {-b, 0.0}, {0.0, -2 * b}};
  Eigen::MatrixXd beta_h = Eigen::MatrixXd::Zero(dgp.p, dgp.H);
  for (int h = 0; h < dgp.H; ++h) {
    const double* s = seeds[h % 4];
    if (dgp.family == Family::binomial_logit) {
      for (int j = 0; j < dgp.p; ++j) beta_h(j, h) = s[j % 2];
    } else {
      for (int j = 0; j < dgp.p; ++j) beta_h(j, h) = s[j / 2];
    }
  }
  return beta_h;
}

struct GlmPaths {
  ModelFamily family = ModelFamily::gaussian_known(1.0);
  PropensityFit propensity;
  Eigen::MatrixXd e;
  OutcomeNuisanceFit nuisance;
  double sigma2_f = 1.0;
  bool usable = false;

  /** Bound late so the model points at this object's final location. */
  AugmentationModel augmentation(const Dataset& data) const {
    return AugmentationModel{family.family, &nuisance, &data, sigma2_f};
  }
};

/**
 * Estimated nuisances shared by the weighted and doubly robust paths. The
 * gaussian causal-model variance is the plug-in gamma'gamma + sigma2 implied
 * by the outcome regression (both paths use it, so their goodness-of-fit
 * terms are on one scale).
 */
GlmPaths prepare_glm_paths(const GlmDgp& dgp, const Dataset& data,
                           bool need_augmentation) {
  GlmPaths paths;
  paths.propensity = fit_propensity(data);
  if (paths.propensity.separation || !paths.propensity.converged) {
    return paths;
  }
  paths.e = clip_probabilities(paths.propensity.probs);
  if (dgp.family == Family::gaussian || need_augmentation) {
    paths.nuisance = fit_outcome_nuisance(
        data,
        dgp.family == Family::gaussian
            ? ModelFamily::gaussian_unknown()
            : ModelFamily::binomial(static_cast<double>(dgp.m)));
    if (!paths.nuisance.converged) return paths;
    if (dgp.family == Family::gaussian) {
      paths.sigma2_f =
          paths.nuisance.gamma.squaredNorm() + paths.nuisance.sigma2_g[0];
    }
  }
  paths.family = dgp.family == Family::gaussian
                     ? ModelFamily::gaussian_known(paths.sigma2_f)
                     : ModelFamily::binomial(static_cast<double>(dgp.m));
  paths.usable = true;
  return paths;
}

struct SelectionDraws {
  // One slot per criterion; ok = false counts as a selection failure.
  std::vector<bool> ok;
  std::vector<double> p1, rmse1, p2, rmse2, p, rmse;
};

/** Support-recovery and error statistics of one chosen coefficient vector. */
void record_selection(SelectionDraws& draws, int slot,
                      const SelectionResult& result,
                      const Eigen::VectorXd& truth) {
  if (!result.ok()) return;
  const Eigen::VectorXd& coef = result.best().coef;
  if (coef.size() != truth.size()) return;
  double sq1 = 0.0, sq2 = 0.0;
  int p1 = 0, p2 = 0;
  for (int j = 0; j < truth.size(); ++j) {
    double err = coef[j] - truth[j];
    bool active = std::abs(coef[j]) > 1e-8;
    if (truth[j] != 0.0) {
      sq1 += err * err;
      if (active) ++p1;
    } else {
      sq2 += err * err;
      if (active) ++p2;
    }
  }
  draws.ok[slot] = true;
  draws.p1[slot] = p1;
  draws.p2[slot] = p2;
  draws.p[slot] = p1 + p2;
  draws.rmse1[slot] = 10.0 * std::sqrt(sq1);
  draws.rmse2[slot] = 10.0 * std::sqrt(sq2);
  draws.rmse[slot] = 10.0 * std::sqrt(sq1 + sq2);
}

SelectionStudyResult summarize_selection(
    const std::vector<SelectionDraws>& reps,
    const std::vector<CriterionKind>& criteria, int replications,
    std::uint64_t seed) {
  SelectionStudyResult out;
  out.replications = replications;
  out.seed = seed;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    std::vector<double> p1, rmse1, p2, rmse2, p, rmse;
    int failures = 0;
    for (const auto& rep : reps) {
      if (k < rep.ok.size() && rep.ok[k]) {
        p1.push_back(rep.p1[k]);
        rmse1.push_back(rep.rmse1[k]);
        p2.push_back(rep.p2[k]);
        rmse2.push_back(rep.rmse2[k]);
        p.push_back(rep.p[k]);
        rmse.push_back(rep.rmse[k]);
      } else {
        ++failures;
      }
    }
    SelectionStats stats;
    std::tie(stats.p1_mean, stats.p1_sd) = mean_sd(p1);
    std::tie(stats.rmse1_mean, stats.rmse1_sd) = mean_sd(rmse1);
    std::tie(stats.p2_mean, stats.p2_sd) = mean_sd(p2);
    std::tie(stats.rmse2_mean, stats.rmse2_sd) = mean_sd(rmse2);
    std::tie(stats.p_mean, stats.p_sd) = mean_sd(p);
    std::tie(stats.rmse_mean, stats.rmse_sd) = mean_sd(rmse);
    stats.n_used = static_cast<int>(p.size());
    stats.failures = failures;
    out.by_criterion[criterion_name(criteria[k])] = stats;
  }
  return out;
}

std::string stat_row_name(const char* prefix, int j) {
  return std::string(prefix) + "_" + std::to_string(j);
}

}  // namespace

std::string misspec_name(Misspec m) {
  switch (m) {
    case Misspec::none: return "none";
    case Misspec::treatment: return "treatment";
    case Misspec::outcome: return "outcome";
    case Misspec::both: return "both";
  }
  return "none";
}

Misspec misspec_from_name(const std::string& name) {
  if (name == "none") return Misspec::none;
  if (name == "treatment") return Misspec::treatment;
  if (name == "outcome") return Misspec::outcome;
  if (name == "both") return Misspec::both;
  throw validation_error("unknown misspecification '" + name +
                         "' (expected none, treatment, outcome or both)");
}

ContrastSample generate_contrast(const GaussianContrastDgp& dgp,
                                 std::mt19937_64& rng) {
  check_contrast_dgp(dgp);
  const int n = dgp.N, p = dgp.p;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  ContrastSample out;
  ContrastTruth& truth = out.truth;
  truth.theta_h = Eigen::MatrixXd::Zero(p, 2);
  for (int j = 0; j < p / 4; ++j) truth.theta_h(j, 0) = dgp.theta1;
  for (int j = p / 4; j < p / 2; ++j) truth.theta_h(j, 0) = dgp.theta2;
  truth.theta_h.col(1) = -truth.theta_h.col(0);
  truth.contrast.c.resize(2);
  truth.contrast.c << -1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  truth.theta = truth.theta_h * truth.contrast.c;
  truth.e.resize(n, 2);
  truth.mu.resize(n, 2);

  Dataset& data = out.data;
  data.y.resize(n);
  data.t.resize(n);
  data.x.resize(n, p);
  data.z.resize(n, 1);
  data.n_groups = 2;

  const double noise_sd = std::sqrt(dgp.sigma2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.x(i, j) = normal(rng);
    double z = normal(rng);
    data.z(i, 0) = z;
    double e1 = logistic(z);
    truth.e(i, 0) = e1;
    truth.e(i, 1) = 1.0 - e1;
    int g = uniform(rng) < e1 ? 0 : 1;
    data.t[i] = g + 1;
    for (int h = 0; h < 2; ++h) {
      truth.mu(i, h) = data.x.row(i).dot(truth.theta_h.col(h)) + z;
    }
    data.y[i] = truth.mu(i, g) + noise_sd * normal(rng);
  }
  return out;
}

GlmSample generate_glm(const GlmDgp& dgp, std::mt19937_64& rng) {
  check_glm_dgp(dgp);
  const int n = dgp.N, p = dgp.p, H = dgp.H;
  const bool binomial = dgp.family == Family::binomial_logit;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  GlmSample out;
  GlmTruth& truth = out.truth;
  truth.beta_h = glm_beta_patterns(dgp);
  truth.beta.resize(p * H);
  for (int h = 0; h < H; ++h) {
    truth.beta.segment(h * p, p) = truth.beta_h.col(h);
  }
  truth.e.resize(n, H);

  // True nuisance coefficients over (z1, z2). The assumed models only ever
  // see z1; misspecification moves weight onto the hidden z2.
  bool misspec_t =
      dgp.misspec == Misspec::treatment || dgp.misspec == Misspec::both;
  bool misspec_y =
      dgp.misspec == Misspec::outcome || dgp.misspec == Misspec::both;
  Eigen::Vector2d alpha_row(dgp.alpha_star, misspec_t ? dgp.alpha_star : 0.0);
  Eigen::Vector2d gamma(dgp.gamma_star, misspec_y ? dgp.gamma_star : 0.0);

  Dataset& data = out.data;
  data.y.resize(n);
  data.t.resize(n);
  data.x.resize(n, p);
  data.z.resize(n, 1);
  data.n_groups = H;
  if (binomial) {
    data.trials = Eigen::VectorXd::Constant(n, static_cast<double>(dgp.m));
  }

  Eigen::VectorXd probs(H);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) data.x(i, j) = normal(rng);
    double z1 = normal(rng);
    double z2 = binomial ? z1 * z1 / std::sqrt(2.0) - 1.0 / std::sqrt(2.0)
                         : normal(rng);
    data.z(i, 0) = z1;
    Eigen::Vector2d zt(z1, z2);

    // Groups below H share one coefficient row; group H is the reference.
    double shared = zt.dot(alpha_row);
    double denom = std::exp(shared) * (H - 1) + 1.0;
    for (int h = 0; h < H - 1; ++h) probs[h] = std::exp(shared) / denom;
    probs[H - 1] = 1.0 / denom;
    truth.e.row(i) = probs.transpose();

    double u = uniform(rng);
    int g = H - 1;
    double cum = 0.0;
    for (int h = 0; h < H; ++h) {
      cum += probs[h];
      if (u < cum) {
        g = h;
        break;
      }
    }
    data.t[i] = g + 1;

    double eta = data.x.row(i).dot(truth.beta_h.col(g)) + zt.dot(gamma);
    if (binomial) {
      std::binomial_distribution<int> outcome(dgp.m, logistic(eta));
      data.y[i] = static_cast<double>(outcome(rng));
    } else {
      data.y[i] = eta + normal(rng);
    }
  }
  return out;
}

BiasStudyResult run_bias_study(const GaussianContrastDgp& dgp,
                               int replications, std::uint64_t seed,
                               const GridSpec& grid) {
  check_contrast_dgp(dgp);
  if (replications <= 0) {
    throw validation_error("replication count must be positive");
  }
  const int buckets = dgp.p + 1;
  std::vector<std::vector<double>> pen(replications), tru(replications);

  parallel_replicates(replications, [&](int r) {
    pen[r].assign(buckets, kNaN);
    tru[r].assign(buckets, kNaN);
    std::mt19937_64 rng =
        replicate_rng(seed, static_cast<std::uint64_t>(r));
    ContrastSample sample = generate_contrast(dgp, rng);
    const Dataset& data = sample.data;
    PropensityValues pv = known_propensity(sample.truth.e);
    WeightedLsqProblem prob =
        ipw_contrast_problem(data, sample.truth.contrast, pv.e);
    std::vector<SelectionResult> results;
    try {
      results = select_lsq_multi(prob, sample.truth.contrast, pv.e,
                                 dgp.sigma2, {CriterionKind::ipcp},
                                 PenaltySpec::lasso_at(1.0), grid);
    } catch (const numerical_error&) {
      return;
    }
    for (const PathEntry& entry : results[0].entries) {
      if (entry.coef.size() == 0) continue;
      int a = entry.active_size;
      if (a < 0 || a >= buckets || std::isfinite(tru[r][a])) continue;
      // Largest-lambda grid point attaining each active size claims its
      // bucket; the risk third term is the plug-in
      //   2 sum_i (c_g / e_ig) (y_i - mu_i) x_i' theta_hat.
      double third = 0.0;
      for (int i = 0; i < data.n(); ++i) {
        int g = data.group(i);
        double resid = data.y[i] - sample.truth.mu(i, g);
        third += (sample.truth.contrast.c[g] / pv.e(i, g)) * resid *
                 data.x.row(i).dot(entry.coef);
      }
      tru[r][a] = 2.0 * third;
      if (entry.criterion.ok) pen[r][a] = entry.criterion.penalty;
    }
  });

  BiasStudyResult out;
  out.buckets = buckets;
  out.replications = replications;
  out.seed = seed;
  out.rows["ipcp"] = summarize_buckets(pen, buckets);
  out.rows["true"] = summarize_buckets(tru, buckets);
  return out;
}

BiasStudyResult run_bias_study(const GlmDgp& dgp, int replications,
                               std::uint64_t seed, const GridSpec& grid) {
  check_glm_dgp(dgp);
  if (replications <= 0) {
    throw validation_error("replication count must be positive");
  }
  const int buckets = dgp.p * dgp.H + 1;
  std::vector<std::vector<double>> ipic(replications), true1(replications);
  std::vector<std::vector<double>> dric(replications), true2(replications);

  parallel_replicates(replications, [&](int r) {
    ipic[r].assign(buckets, kNaN);
    true1[r].assign(buckets, kNaN);
    dric[r].assign(buckets, kNaN);
    true2[r].assign(buckets, kNaN);
    std::mt19937_64 rng =
        replicate_rng(seed, static_cast<std::uint64_t>(r));
    GlmSample train = generate_glm(dgp, rng);
    GlmSample copy = generate_glm(dgp, rng);
    GlmPaths paths = prepare_glm_paths(dgp, train.data, true);
    if (!paths.usable) return;
    AugmentationModel aug = paths.augmentation(train.data);

    // The out-of-sample benchmark scores the trained fit on an independent
    // draw, weighted by the trained assignment model evaluated there.
    GlmCriterionContext copy_ctx;
    copy_ctx.data = &copy.data;
    copy_ctx.family = paths.family;
    copy_ctx.e = clip_probabilities(
        multinomial_probs(copy.data.z, paths.propensity.alpha));

    GlmCriterionContext ctx;
    ctx.data = &train.data;
    ctx.family = paths.family;
    ctx.e = paths.e;
    ctx.propensity = &paths.propensity;
    ctx.aug = &aug;

    auto scan = [&](const GlmObjective& obj, CriterionKind kind,
                    std::vector<double>& crit_row,
                    std::vector<double>& true_row) {
      std::vector<SelectionResult> results;
      try {
        results = select_glm_multi(obj, ctx, {kind},
                                   PenaltySpec::lasso_at(1.0), grid);
      } catch (const numerical_error&) {
        return;
      }
      for (const PathEntry& entry : results[0].entries) {
        if (entry.coef.size() == 0) continue;
        int a = entry.active_size;
        if (a < 0 || a >= buckets || std::isfinite(true_row[a])) continue;
        true_row[a] =
            glm_gof(copy_ctx, entry.coef) - entry.criterion.gof;
        if (entry.criterion.ok) crit_row[a] = entry.criterion.penalty;
      }
    };

    GlmObjective ipw = ipw_glm_objective(train.data, paths.family, paths.e);
    scan(ipw, CriterionKind::ipic, ipic[r], true1[r]);
    GlmObjective dr =
        dr_glm_objective(train.data, paths.family, paths.e, aug);
    scan(dr, CriterionKind::dric, dric[r], true2[r]);
  });

  BiasStudyResult out;
  out.buckets = buckets;
  out.replications = replications;
  out.seed = seed;
  out.rows["ipic"] = summarize_buckets(ipic, buckets);
  out.rows["true1"] = summarize_buckets(true1, buckets);
  out.rows["dric"] = summarize_buckets(dric, buckets);
  out.rows["true2"] = summarize_buckets(true2, buckets);
  return out;
}

SelectionStudyResult run_selection_study(
    const GaussianContrastDgp& dgp, const std::vector<CriterionKind>& criteria,
    int replications, std::uint64_t seed, const GridSpec& grid) {
  check_contrast_dgp(dgp);
  if (replications <= 0) {
    throw validation_error("replication count must be positive");
  }
  if (criteria.empty()) throw validation_error("no criteria requested");
  for (CriterionKind kind : criteria) {
    if (kind != CriterionKind::qicw && kind != CriterionKind::ipcp) {
      throw validation_error("the contrast study supports qicw and ipcp");
    }
  }
  std::vector<SelectionDraws> draws(replications);

  parallel_replicates(replications, [&](int r) {
    SelectionDraws& d = draws[r];
    d.ok.assign(criteria.size(), false);
    d.p1.assign(criteria.size(), 0.0);
    d.rmse1.assign(criteria.size(), 0.0);
    d.p2.assign(criteria.size(), 0.0);
    d.rmse2.assign(criteria.size(), 0.0);
    d.p.assign(criteria.size(), 0.0);
    d.rmse.assign(criteria.size(), 0.0);
    std::mt19937_64 rng =
        replicate_rng(seed, static_cast<std::uint64_t>(r));
    ContrastSample sample = generate_contrast(dgp, rng);
    PropensityValues pv = known_propensity(sample.truth.e);
    WeightedLsqProblem prob =
        ipw_contrast_problem(sample.data, sample.truth.contrast, pv.e);
    std::vector<SelectionResult> results;
    try {
      results = select_lsq_multi(prob, sample.truth.contrast, pv.e,
                                 dgp.sigma2, criteria,
                                 PenaltySpec::lasso_at(1.0), grid);
    } catch (const numerical_error&) {
      return;
    }
    for (std::size_t k = 0; k < criteria.size(); ++k) {
      record_selection(d, static_cast<int>(k), results[k],
                       sample.truth.theta);
    }
  });

  return summarize_selection(draws, criteria, replications, seed);
}

SelectionStudyResult run_selection_study(
    const GlmDgp& dgp, const std::vector<CriterionKind>& criteria,
    int replications, std::uint64_t seed, const GridSpec& grid) {
  check_glm_dgp(dgp);
  if (replications <= 0) {
    throw validation_error("replication count must be positive");
  }
  if (criteria.empty()) throw validation_error("no criteria requested");
  bool need_dr = false;
  for (CriterionKind kind : criteria) {
    if (kind == CriterionKind::ipcp) {
      throw validation_error("ipcp does not apply to the likelihood paths");
    }
    if (kind == CriterionKind::dr_aic || kind == CriterionKind::dric) {
      need_dr = true;
    }
  }
  std::vector<CriterionKind> ipw_kinds, dr_kinds;
  std::vector<int> ipw_slots, dr_slots;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (criteria[k] == CriterionKind::dr_aic ||
        criteria[k] == CriterionKind::dric) {
      dr_kinds.push_back(criteria[k]);
      dr_slots.push_back(static_cast<int>(k));
    } else {
      ipw_kinds.push_back(criteria[k]);
      ipw_slots.push_back(static_cast<int>(k));
    }
  }
  std::vector<SelectionDraws> draws(replications);

  parallel_replicates(replications, [&](int r) {
    SelectionDraws& d = draws[r];
    d.ok.assign(criteria.size(), false);
    d.p1.assign(criteria.size(), 0.0);
    d.rmse1.assign(criteria.size(), 0.0);
    d.p2.assign(criteria.size(), 0.0);
    d.rmse2.assign(criteria.size(), 0.0);
    d.p.assign(criteria.size(), 0.0);
    d.rmse.assign(criteria.size(), 0.0);
    std::mt19937_64 rng =
        replicate_rng(seed, static_cast<std::uint64_t>(r));
    GlmSample train = generate_glm(dgp, rng);
    GlmPaths paths = prepare_glm_paths(dgp, train.data, need_dr);
    if (!paths.usable) return;
    AugmentationModel aug = paths.augmentation(train.data);

    GlmCriterionContext ctx;
    ctx.data = &train.data;
    ctx.family = paths.family;
    ctx.e = paths.e;
    ctx.propensity = &paths.propensity;
    ctx.aug = need_dr ? &aug : nullptr;

    if (!ipw_kinds.empty()) {
      GlmObjective ipw =
          ipw_glm_objective(train.data, paths.family, paths.e);
      try {
        std::vector<SelectionResult> results = select_glm_multi(
            ipw, ctx, ipw_kinds, PenaltySpec::lasso_at(1.0), grid);
        for (std::size_t k = 0; k < ipw_kinds.size(); ++k) {
          record_selection(d, ipw_slots[k], results[k], train.truth.beta);
        }
      } catch (const numerical_error&) {
      }
    }
    if (!dr_kinds.empty()) {
      GlmObjective dr =
          dr_glm_objective(train.data, paths.family, paths.e, aug);
      try {
        std::vector<SelectionResult> results = select_glm_multi(
            dr, ctx, dr_kinds, PenaltySpec::lasso_at(1.0), grid);
        for (std::size_t k = 0; k < dr_kinds.size(); ++k) {
          record_selection(d, dr_slots[k], results[k], train.truth.beta);
        }
      } catch (const numerical_error&) {
      }
    }
  });

  return summarize_selection(draws, criteria, replications, seed);
}

SureCheckResult run_sure_check(const GaussianContrastDgp& dgp,
                               int replications, std::uint64_t seed,
                               int n_lambda, double ratio) {
  check_contrast_dgp(dgp);
  if (replications <= 0) {
    throw validation_error("replication count must be positive");
  }
  if (n_lambda < 2) throw validation_error("need at least two lambda points");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw validation_error("lambda ratio must be in (0, 1)");
  }

  // A pilot draw (one replicate index past the scored ones) anchors a fixed
  // lambda grid so every replicate is scored at identical penalties.
  std::mt19937_64 pilot_rng =
      replicate_rng(seed, static_cast<std::uint64_t>(replications));
  ContrastSample pilot = generate_contrast(dgp, pilot_rng);
  PropensityValues pilot_pv = known_propensity(pilot.truth.e);
  double lambda_max = lasso_shutoff(
      ipw_contrast_problem(pilot.data, pilot.truth.contrast, pilot_pv.e));
  GridSpec grid;
  grid.n_points = n_lambda;
  grid.ratio = ratio;
  std::vector<double> lambdas = lambda_grid(lambda_max, grid);

  const int L = static_cast<int>(lambdas.size());
  std::vector<std::vector<double>> crit(replications), oracle(replications);
  parallel_replicates(replications, [&](int r) {
    crit[r].assign(L, kNaN);
    oracle[r].assign(L, kNaN);
    std::mt19937_64 rng =
        replicate_rng(seed, static_cast<std::uint64_t>(r));
    ContrastSample sample = generate_contrast(dgp, rng);
    const Dataset& data = sample.data;
    PropensityValues pv = known_propensity(sample.truth.e);
    WeightedLsqProblem prob =
        ipw_contrast_problem(data, sample.truth.contrast, pv.e);

    // The squared-noise constant sum_i (w_i - E[w_i | t, x, z])^2 does not
    // depend on lambda.
    double sq_noise = 0.0;
    for (int i = 0; i < data.n(); ++i) {
      int g = data.group(i);
      double scale = sample.truth.contrast.c[g] / pv.e(i, g);
      double dev = scale * (data.y[i] - sample.truth.mu(i, g));
      sq_noise += dev * dev;
    }

    Eigen::VectorXd warm;
    bool have_warm = false;
    for (int k = 0; k < L; ++k) {
      FitResult fit;
      try {
        fit = solve_lasso_lsq(prob, lambdas[k], SolveOptions{},
                              have_warm ? &warm : nullptr);
      } catch (const numerical_error&) {
        continue;
      }
      warm = fit.coef;
      have_warm = true;
      CriterionValue cv = ipcp_lasso(prob, fit, sample.truth.contrast, pv.e,
                                     dgp.sigma2);
      if (!cv.ok) continue;
      double risk = 0.0;
      for (int i = 0; i < data.n(); ++i) {
        int g = data.group(i);
        double scale = sample.truth.contrast.c[g] / pv.e(i, g);
        double dev =
            scale * sample.truth.mu(i, g) - data.x.row(i).dot(fit.coef);
        risk += dev * dev;
      }
      crit[r][k] = cv.value;
      oracle[r][k] = risk + sq_noise;
    }
  });

  SureCheckResult out;
  out.lambdas = lambdas;
  out.replications = replications;
  out.seed = seed;
  out.criterion_mean.assign(L, kNaN);
  out.criterion_se.assign(L, kNaN);
  out.oracle_mean.assign(L, kNaN);
  out.oracle_se.assign(L, kNaN);
  out.diff_mean.assign(L, kNaN);
  out.diff_se.assign(L, kNaN);
  for (int k = 0; k < L; ++k) {
    std::vector<double> c, o, diff;
    for (int r = 0; r < replications; ++r) {
      if (std::isfinite(crit[r][k]) && std::isfinite(oracle[r][k])) {
        c.push_back(crit[r][k]);
        o.push_back(oracle[r][k]);
        diff.push_back(crit[r][k] - oracle[r][k]);
      }
    }
    if (c.empty()) continue;
    double root_n = std::sqrt(static_cast<double>(c.size()));
    auto [cm, cs] = mean_sd(c);
    auto [om, os] = mean_sd(o);
    auto [dm, ds] = mean_sd(diff);
    out.criterion_mean[k] = cm;
    out.criterion_se[k] = cs / root_n;
    out.oracle_mean[k] = om;
    out.oracle_se[k] = os / root_n;
    out.diff_mean[k] = dm;
    out.diff_se[k] = ds / root_n;
  }
  return out;
}

CsvTable bias_study_table(const BiasStudyResult& result,
                          const std::string& setting) {
  CsvTable table;
  table.comments = {
      "bucket_j rows: mean and sd over replicates whose path attains j "
      "active coefficients (n_reps = occupied count)",
      "increment_j rows: mean difference bucket j - bucket j-1; sd column "
      "holds its standard error",
      "replications: " + std::to_string(result.replications),
      "seed: " + std::to_string(result.seed)};
  table.header = {"setting", "criterion", "statistic", "mean", "sd", "n_reps"};
  for (const auto& [name, row] : result.rows) {
    for (int j = 0; j < result.buckets; ++j) {
      if (row.count[j] == 0) continue;
      table.rows.push_back({setting, name, stat_row_name("bucket", j),
                            format_double(row.mean[j]), format_double(row.sd[j]),
                            std::to_string(row.count[j])});
    }
    for (int j = 1; j < result.buckets; ++j) {
      if (!std::isfinite(row.increment[j])) continue;
      table.rows.push_back(
          {setting, name, stat_row_name("increment", j),
           format_double(row.increment[j]), format_double(row.increment_se[j]),
           std::to_string(std::min(row.count[j], row.count[j - 1]))});
    }
  }
  return table;
}

CsvTable selection_study_table(const SelectionStudyResult& result,
                               const std::string& setting) {
  CsvTable table;
  table.comments = {
      "square-root error statistics are per replicate and scaled by 10",
      "replications: " + std::to_string(result.replications),
      "seed: " + std::to_string(result.seed)};
  table.header = {"setting", "criterion", "statistic", "mean", "sd", "n_reps"};
  for (const auto& [name, stats] : result.by_criterion) {
    std::string n = std::to_string(stats.n_used);
    auto push = [&](const char* stat, double mean, double sd) {
      table.rows.push_back(
          {setting, name, stat, format_double(mean), format_double(sd), n});
    };
    push("p1", stats.p1_mean, stats.p1_sd);
    push("rmse1", stats.rmse1_mean, stats.rmse1_sd);
    push("p2", stats.p2_mean, stats.p2_sd);
    push("rmse2", stats.rmse2_mean, stats.rmse2_sd);
    push("p", stats.p_mean, stats.p_sd);
    push("rmse", stats.rmse_mean, stats.rmse_sd);
    table.rows.push_back({setting, name, "failures",
                          std::to_string(stats.failures), "0",
                          std::to_string(result.replications)});
  }
  return table;
}

CsvTable sure_check_table(const SureCheckResult& result,
                          const std::string& setting) {
  CsvTable table;
  table.comments = {
      "criterion/oracle/diff rows: mean over replicates; sd column holds the "
      "standard error of the mean",
      "replications: " + std::to_string(result.replications),
      "seed: " + std::to_string(result.seed)};
  table.header = {"setting", "criterion", "statistic", "mean", "sd", "n_reps"};
  for (std::size_t k = 0; k < result.lambdas.size(); ++k) {
    int j = static_cast<int>(k);
    table.rows.push_back({setting, "ipcp", stat_row_name("lambda", j),
                          format_double(result.lambdas[k]), "",
                          std::to_string(result.replications)});
    if (!std::isfinite(result.criterion_mean[k])) continue;
    table.rows.push_back({setting, "ipcp", stat_row_name("criterion", j),
                          format_double(result.criterion_mean[k]),
                          format_double(result.criterion_se[k]),
                          std::to_string(result.replications)});
    table.rows.push_back({setting, "ipcp", stat_row_name("oracle", j),
                          format_double(result.oracle_mean[k]),
                          format_double(result.oracle_se[k]),
                          std::to_string(result.replications)});
    table.rows.push_back({setting, "ipcp", stat_row_name("diff", j),
                          format_double(result.diff_mean[k]),
                          format_double(result.diff_se[k]),
                          std::to_string(result.replications)});
  }
  return table;
}

}  // namespace scs
