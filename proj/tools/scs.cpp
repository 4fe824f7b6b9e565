// Command-line front end: fit, select, simulate, analyze and synth.
// JSON on stdout (or --out) is the canonical output; --csv writes a
// spreadsheet mirror. Exit codes: 0 success, 2 invalid input, 3 numerical
// failure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scs/common.hpp"
#include "scs/criteria.hpp"
#include "scs/csv.hpp"
#include "scs/data.hpp"
#include "scs/estimators.hpp"
#include "scs/manifest.hpp"
#include "scs/nuisance.hpp"
#include "scs/selection.hpp"
#include "scs/simulation.hpp"
#include "scs/solvers.hpp"

using nlohmann::json;

namespace {

constexpr double kAuto = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split(const std::string& s, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(s);
  while (std::getline(in, cell, delim)) out.push_back(cell);
  if (!s.empty() && s.back() == delim) out.push_back("");
  return out;
}

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used == cell.size()) return v;
  } catch (const std::exception&) {
  }
  throw scs::validation_error("cannot parse number '" + cell + "' at " +
                              where);
}

// ---------------------------------------------------------------------------
// Generic named-column table (analyze input; free column names).

struct NamedTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) return static_cast<int>(j);
    }
    throw scs::validation_error("missing column: " + name);
  }
};

NamedTable load_named_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw scs::validation_error("cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trimmed(line);
    if (t.empty() || t[0] == '#') continue;
    lines.push_back(t);
  }
  if (lines.size() < 2) {
    throw scs::validation_error("'" + path + "' needs a header and data rows");
  }
  NamedTable table;
  for (const std::string& name : split(lines[0], ',')) {
    table.names.push_back(trimmed(name));
  }
  const int n = static_cast<int>(lines.size()) - 1;
  const int w = static_cast<int>(table.names.size());
  table.values.resize(n, w);
  for (int i = 0; i < n; ++i) {
    std::string where = path + ":" + std::to_string(i + 2);
    std::vector<std::string> cells = split(lines[i + 1], ',');
    if (static_cast<int>(cells.size()) != w) {
      throw scs::validation_error(where + ": expected " + std::to_string(w) +
                                  " cells, got " +
                                  std::to_string(cells.size()));
    }
    for (int j = 0; j < w; ++j) {
      table.values(i, j) = parse_number(trimmed(cells[j]), where);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// JSON plumbing.

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v[i]));
  return a;
}

json dvec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}

void emit_json(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw scs::validation_error("cannot write '" + out_path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw scs::validation_error("write to '" + out_path + "' failed");
}

json criterion_json(const scs::CriterionValue& cv, const std::string& name) {
  json j;
  j["name"] = name;
  j["ok"] = cv.ok;
  j["value"] = finite_or_null(cv.value);
  j["gof"] = finite_or_null(cv.gof);
  j["penalty"] = finite_or_null(cv.penalty);
  j["active_size"] = cv.active_size;
  if (!cv.reason.empty()) j["reason"] = cv.reason;
  return j;
}

// ---------------------------------------------------------------------------
// Shared model assembly for fit / select.

struct ProblemOptions {
  std::string input;
  std::string pipeline = "ipw-gaussian";
  std::string family;  // empty = pipeline default
  double sigma2 = kAuto;
  double trials = 1.0;
  std::string propensity = "fit";
  std::string contrast;  // comma-separated weights; empty = two-group default
  std::string penalty = "lasso";
  double lambda2 = 0.0;
  double scad_a = 3.7;
  double mcp_gamma = 3.0;
};

scs::PenaltyKind penalty_kind(const std::string& name) {
  if (name == "lasso") return scs::PenaltyKind::lasso;
  if (name == "elastic-net") return scs::PenaltyKind::elastic_net;
  if (name == "group-lasso") return scs::PenaltyKind::group_lasso;
  if (name == "scad") return scs::PenaltyKind::scad;
  if (name == "mcplus") return scs::PenaltyKind::mcplus;
  throw scs::validation_error("unknown penalty '" + name + "'");
}

scs::PenaltySpec build_penalty(const ProblemOptions& opt, double lambda) {
  scs::PenaltySpec pen;
  pen.kind = penalty_kind(opt.penalty);
  pen.lambda = lambda;
  pen.lambda2 = opt.lambda2;
  pen.a = opt.scad_a;
  pen.gamma = opt.mcp_gamma;
  return pen;
}

scs::ContrastSpec resolve_contrast(const ProblemOptions& opt, int H) {
  scs::ContrastSpec c;
  if (opt.contrast.empty()) {
    if (H != 2) {
      throw scs::validation_error(
          "--contrast is required when the data has more than two groups");
    }
    c.c.resize(2);
    c.c << -1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  } else {
    std::vector<std::string> cells = split(opt.contrast, ',');
    c.c.resize(static_cast<int>(cells.size()));
    for (std::size_t k = 0; k < cells.size(); ++k) {
      c.c[static_cast<int>(k)] = parse_number(trimmed(cells[k]), "--contrast");
    }
  }
  c.validate(H);
  return c;
}

struct Prepared {
  scs::Dataset data;
  scs::PropensityValues pv;
  std::optional<scs::PropensityFit> pfit;  // set when --propensity fit
  scs::ModelFamily fam = scs::ModelFamily::gaussian_known(1.0);
  std::optional<scs::OutcomeNuisanceFit> nuisance;  // dr-glm only
  scs::RunManifest manifest;
};

void check_pipeline(const ProblemOptions& opt) {
  if (opt.pipeline != "ipw-gaussian" && opt.pipeline != "ipw-glm" &&
      opt.pipeline != "dr-glm") {
    throw scs::validation_error("unknown pipeline '" + opt.pipeline + "'");
  }
  if (opt.pipeline == "ipw-gaussian") {
    if (!opt.family.empty() && opt.family != "gaussian") {
      throw scs::validation_error(
          "pipeline ipw-gaussian supports only --family gaussian");
    }
  } else {
    if (opt.family != "gaussian" && opt.family != "binomial") {
      throw scs::validation_error(
          "pipeline " + opt.pipeline +
          " needs --family gaussian or --family binomial");
    }
    if (opt.penalty == "group-lasso") {
      throw scs::validation_error(
          "the group-lasso penalty applies to the ipw-gaussian pipeline");
    }
  }
}

Prepared prepare(const ProblemOptions& opt, const std::string& command) {
  check_pipeline(opt);
  Prepared prep;
  prep.manifest.command = command;
  prep.data = scs::load_dataset_csv(opt.input);
  scs::add_input_digest(prep.manifest, opt.input);

  if (opt.propensity == "fit") {
    prep.pfit = scs::fit_propensity(prep.data);
    if (prep.pfit->separation || !prep.pfit->converged) {
      throw scs::numerical_error(
          "assignment model did not converge (separation or divergence)");
    }
    prep.pv = scs::estimated_propensity(*prep.pfit);
  } else if (opt.propensity.rfind("known:", 0) == 0) {
    std::string path = opt.propensity.substr(6);
    Eigen::MatrixXd e = scs::load_propensity_csv(path);
    if (e.rows() != prep.data.n() || e.cols() != prep.data.H()) {
      throw scs::validation_error(
          "propensity file shape does not match the dataset");
    }
    scs::add_input_digest(prep.manifest, path);
    prep.pv = scs::known_propensity(e);
  } else {
    throw scs::validation_error(
        "--propensity must be 'fit' or 'known:<file>'");
  }

  if (opt.pipeline == "ipw-gaussian") {
    // sigma2 resolution happens at the call site (it needs the assembled
    // least squares problem).
    prep.fam = scs::ModelFamily::gaussian_unknown();
  } else if (opt.family == "binomial") {
    prep.fam = scs::ModelFamily::binomial(opt.trials);
  } else {
    double s2 = std::isfinite(opt.sigma2) ? opt.sigma2 : 1.0;
    prep.fam = scs::ModelFamily::gaussian_known(s2);
  }

  if (opt.pipeline == "dr-glm") {
    prep.nuisance = scs::fit_outcome_nuisance(prep.data, prep.fam);
    if (!prep.nuisance->converged) {
      throw scs::numerical_error("outcome regression did not converge");
    }
    if (opt.family == "gaussian" && !std::isfinite(opt.sigma2)) {
      // Plug-in causal-model variance implied by the outcome regression.
      double s2 = prep.nuisance->gamma.squaredNorm() +
                  prep.nuisance->sigma2_g[0];
      prep.fam = scs::ModelFamily::gaussian_known(s2);
    }
  }
  return prep;
}

scs::AugmentationModel make_augmentation(const Prepared& prep) {
  return scs::AugmentationModel{prep.fam.family, &*prep.nuisance, &prep.data,
                                prep.fam.sigma2};
}

json propensity_json(const ProblemOptions& opt, const Prepared& prep) {
  json j;
  j["mode"] = opt.propensity == "fit" ? "fit" : "known";
  if (prep.pfit) {
    j["converged"] = prep.pfit->converged;
    j["iterations"] = prep.pfit->iterations;
    j["separation"] = prep.pfit->separation;
  }
  return j;
}

json family_json(const Prepared& prep) {
  json j;
  if (prep.fam.family == scs::Family::gaussian) {
    j["name"] = "gaussian";
    if (prep.fam.sigma2_known) j["sigma2"] = prep.fam.sigma2;
  } else {
    j["name"] = "binomial";
    j["trials"] = prep.fam.default_trials;
  }
  return j;
}

json penalty_json(const scs::PenaltySpec& pen) {
  json j;
  switch (pen.kind) {
    case scs::PenaltyKind::lasso: j["kind"] = "lasso"; break;
    case scs::PenaltyKind::elastic_net:
      j["kind"] = "elastic-net";
      j["lambda2"] = pen.lambda2;
      break;
    case scs::PenaltyKind::group_lasso: j["kind"] = "group-lasso"; break;
    case scs::PenaltyKind::scad:
      j["kind"] = "scad";
      j["a"] = pen.a;
      break;
    case scs::PenaltyKind::mcplus:
      j["kind"] = "mcplus";
      j["gamma"] = pen.gamma;
      break;
  }
  j["lambda"] = pen.lambda;
  return j;
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  ProblemOptions prob;
  double lambda = 0.0;
  std::string criterion;
  std::string out;
};

scs::CriterionKind checked_criterion(const std::string& name,
                                     const ProblemOptions& opt) {
  scs::CriterionKind kind = scs::criterion_from_name(name);
  bool contrast_path = opt.pipeline == "ipw-gaussian";
  if (contrast_path) {
    if (kind != scs::CriterionKind::qicw && kind != scs::CriterionKind::ipcp) {
      throw scs::validation_error("criterion '" + name +
                                  "' does not pair with ipw-gaussian");
    }
    if (kind == scs::CriterionKind::ipcp &&
        (opt.penalty == "scad" || opt.penalty == "mcplus")) {
      throw scs::validation_error(
          "ipcp pairs with the lasso, elastic-net and group-lasso penalties");
    }
  } else {
    if (kind == scs::CriterionKind::ipcp) {
      throw scs::validation_error("ipcp does not pair with " + opt.pipeline);
    }
    if ((kind == scs::CriterionKind::dr_aic ||
         kind == scs::CriterionKind::dric) &&
        opt.pipeline != "dr-glm") {
      throw scs::validation_error("criterion '" + name +
                                  "' needs the dr-glm pipeline");
    }
    if ((kind == scs::CriterionKind::dr_aic ||
         kind == scs::CriterionKind::dric) &&
        (opt.penalty == "scad" || opt.penalty == "mcplus")) {
      throw scs::validation_error(
          "the doubly robust criteria pair with the lasso penalty");
    }
    if (kind == scs::CriterionKind::dric && opt.propensity != "fit") {
      throw scs::validation_error("dric requires --propensity fit");
    }
  }
  return kind;
}

int run_fit(const FitArgs& args) {
  const ProblemOptions& opt = args.prob;
  Prepared prep = prepare(opt, "fit");
  const scs::Dataset& data = prep.data;
  scs::PenaltySpec pen = build_penalty(opt, args.lambda);
  pen.validate(data.p());

  json report;
  report["pipeline"] = opt.pipeline;
  report["penalty"] = penalty_json(pen);
  report["propensity"] = propensity_json(opt, prep);

  std::optional<scs::CriterionKind> crit;
  if (!args.criterion.empty()) crit = checked_criterion(args.criterion, opt);

  if (opt.pipeline == "ipw-gaussian" && pen.kind == scs::PenaltyKind::group_lasso) {
    if (!std::isfinite(opt.sigma2) && crit) {
      throw scs::validation_error("the group path needs --sigma2");
    }
    Eigen::MatrixXd W = scs::group_pseudo_outcomes(data, prep.pv.e);
    scs::GroupFit fit = scs::solve_group_lasso_lsq(data.x, W, pen.lambda);
    prep.fam = scs::ModelFamily::gaussian_known(
        std::isfinite(opt.sigma2) ? opt.sigma2 : 1.0);
    report["family"] = family_json(prep);
    double gof = (W - data.x * fit.coef).squaredNorm();
    report["gof"] = gof;
    json coef = json::array();
    for (int h = 0; h < data.H(); ++h) coef.push_back(vec_json(fit.coef.col(h)));
    report["coef_by_group"] = coef;
    report["active_groups"] = fit.active_groups;
    report["active_size"] = static_cast<int>(fit.active_cols.size());
    report["iterations"] = fit.iterations;
    report["converged"] = fit.converged;
    if (crit) {
      scs::CriterionValue cv;
      if (*crit == scs::CriterionKind::qicw) {
        cv.gof = gof / opt.sigma2;
        cv.active_size = static_cast<int>(fit.active_cols.size());
        cv.penalty = 2.0 * cv.active_size;
        cv.value = cv.gof + cv.penalty;
        cv.ok = true;
      } else {
        cv = scs::ipcp_group(data.x, W, fit, prep.pv.e, opt.sigma2);
      }
      report["criterion"] = criterion_json(cv, args.criterion);
    }
  } else if (opt.pipeline == "ipw-gaussian") {
    scs::ContrastSpec contrast = resolve_contrast(opt, data.H());
    scs::WeightedLsqProblem prob =
        scs::ipw_contrast_problem(data, contrast, prep.pv.e);
    double sigma2 =
        std::isfinite(opt.sigma2) ? opt.sigma2 : scs::resolve_sigma2(prob);
    prep.fam = scs::ModelFamily::gaussian_known(sigma2);
    report["family"] = family_json(prep);
    report["contrast"] = vec_json(contrast.c);
    scs::FitResult fit = scs::solve_penalized_lsq(prob, pen);
    report["gof"] = (prob.w - prob.x * fit.coef).squaredNorm();
    report["coef"] = vec_json(fit.coef);
    report["active"] = fit.active;
    report["active_size"] = static_cast<int>(fit.active.size());
    report["iterations"] = fit.iterations;
    report["converged"] = fit.converged;
    report["kkt_ok"] = fit.kkt_ok;
    if (crit) {
      scs::CriterionValue cv;
      switch (pen.kind) {
        case scs::PenaltyKind::elastic_net:
          cv = *crit == scs::CriterionKind::qicw
                   ? scs::qicw_lsq(prob, fit, sigma2)
                   : scs::ipcp_elastic_net(prob, fit, contrast, prep.pv.e,
                                           sigma2);
          break;
        default:
          cv = *crit == scs::CriterionKind::qicw
                   ? scs::qicw_lsq(prob, fit, sigma2)
                   : scs::ipcp_lasso(prob, fit, contrast, prep.pv.e, sigma2);
          break;
      }
      report["criterion"] = criterion_json(cv, args.criterion);
    }
  } else {
    report["family"] = family_json(prep);
    std::optional<scs::AugmentationModel> aug;
    scs::GlmObjective obj =
        opt.pipeline == "dr-glm"
            ? (aug = make_augmentation(prep),
               scs::dr_glm_objective(data, prep.fam, prep.pv.e, *aug))
            : scs::ipw_glm_objective(data, prep.fam, prep.pv.e);
    scs::FitResult fit = scs::solve_penalized_glm(obj, pen);
    scs::GlmCriterionContext ctx;
    ctx.data = &data;
    ctx.family = prep.fam;
    ctx.e = prep.pv.e;
    if (prep.pfit) ctx.propensity = &*prep.pfit;
    if (aug) ctx.aug = &*aug;
    report["gof"] = scs::glm_gof(ctx, fit.coef);
    json coef = json::array();
    for (int h = 0; h < data.H(); ++h) {
      coef.push_back(vec_json(fit.coef.segment(h * data.p(), data.p())));
    }
    report["coef_by_group"] = coef;
    report["coef"] = vec_json(fit.coef);
    report["active"] = fit.active;
    report["active_size"] = static_cast<int>(fit.active.size());
    report["iterations"] = fit.iterations;
    report["converged"] = fit.converged;
    report["kkt_ok"] = fit.kkt_ok;
    if (crit) {
      scs::CriterionValue cv;
      switch (*crit) {
        case scs::CriterionKind::qicw: cv = scs::qicw_glm(ctx, fit); break;
        case scs::CriterionKind::ipic:
          cv = pen.kind == scs::PenaltyKind::scad ||
                       pen.kind == scs::PenaltyKind::mcplus
                   ? scs::ipic_nonconvex(ctx, fit, pen)
                   : scs::ipic(ctx, fit);
          break;
        case scs::CriterionKind::dr_aic: cv = scs::dr_aic(ctx, fit); break;
        case scs::CriterionKind::dric: cv = scs::dric(ctx, fit); break;
        default: throw scs::validation_error("unsupported criterion");
      }
      report["criterion"] = criterion_json(cv, args.criterion);
    }
  }

  prep.manifest.config = {{"pipeline", opt.pipeline},
                          {"penalty", opt.penalty},
                          {"lambda", args.lambda},
                          {"propensity", opt.propensity}};
  if (!args.criterion.empty()) prep.manifest.config["criterion"] = args.criterion;
  prep.manifest.timestamp = scs::now_utc();
  report["manifest"] = scs::manifest_json(prep.manifest);
  emit_json(report, args.out);
  return 0;
}

// ---------------------------------------------------------------------------
// select

struct SelectArgs {
  ProblemOptions prob;
  std::string criterion = "qicw";
  int grid_points = 50;
  double grid_ratio = 1e-3;
  std::string out;
  std::string csv;
};

json path_json(const scs::SelectionResult& result) {
  json path = json::array();
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    const scs::PathEntry& entry = result.entries[k];
    json row;
    row["lambda"] = entry.penalty.lambda;
    row["active_size"] = entry.active_size;
    row["gof"] = finite_or_null(entry.criterion.gof);
    row["penalty"] = finite_or_null(entry.criterion.penalty);
    row["total"] = finite_or_null(entry.criterion.value);
    row["ok"] = entry.criterion.ok;
    if (!entry.criterion.ok && !entry.criterion.reason.empty()) {
      row["reason"] = entry.criterion.reason;
    }
    row["chosen"] = static_cast<int>(k) == result.chosen;
    path.push_back(row);
  }
  return path;
}

scs::CsvTable path_table(const scs::SelectionResult& result) {
  scs::CsvTable table;
  table.header = {"lambda", "p_hat", "gof", "penalty", "total", "chosen"};
  for (std::size_t k = 0; k < result.entries.size(); ++k) {
    const scs::PathEntry& entry = result.entries[k];
    auto cell = [](double v) {
      return std::isfinite(v) ? scs::format_double(v) : std::string();
    };
    table.rows.push_back({scs::format_double(entry.penalty.lambda),
                          std::to_string(entry.active_size),
                          cell(entry.criterion.gof),
                          cell(entry.criterion.penalty),
                          cell(entry.criterion.value),
                          static_cast<int>(k) == result.chosen ? "1" : "0"});
  }
  return table;
}

int run_select(const SelectArgs& args) {
  const ProblemOptions& opt = args.prob;
  Prepared prep = prepare(opt, "select");
  const scs::Dataset& data = prep.data;
  scs::CriterionKind kind = checked_criterion(args.criterion, opt);
  scs::PenaltySpec base = build_penalty(opt, 1.0);
  base.validate(data.p());
  scs::GridSpec grid;
  grid.n_points = args.grid_points;
  grid.ratio = args.grid_ratio;

  json report;
  report["pipeline"] = opt.pipeline;
  report["criterion"] = args.criterion;
  report["penalty"] = penalty_json(base);
  report["propensity"] = propensity_json(opt, prep);

  scs::SelectionResult result;
  if (opt.pipeline == "ipw-gaussian" &&
      base.kind == scs::PenaltyKind::group_lasso) {
    if (!std::isfinite(opt.sigma2)) {
      throw scs::validation_error("the group path needs --sigma2");
    }
    Eigen::MatrixXd W = scs::group_pseudo_outcomes(data, prep.pv.e);
    result = scs::select_group(data.x, W, prep.pv.e, opt.sigma2, kind, grid);
    prep.fam = scs::ModelFamily::gaussian_known(opt.sigma2);
  } else if (opt.pipeline == "ipw-gaussian") {
    scs::ContrastSpec contrast = resolve_contrast(opt, data.H());
    scs::WeightedLsqProblem prob =
        scs::ipw_contrast_problem(data, contrast, prep.pv.e);
    double sigma2 =
        std::isfinite(opt.sigma2) ? opt.sigma2 : scs::resolve_sigma2(prob);
    prep.fam = scs::ModelFamily::gaussian_known(sigma2);
    report["contrast"] = vec_json(contrast.c);
    result = scs::select_lsq(prob, contrast, prep.pv.e, sigma2, kind, base,
                             grid);
  } else {
    std::optional<scs::AugmentationModel> aug;
    scs::GlmObjective obj =
        opt.pipeline == "dr-glm"
            ? (aug = make_augmentation(prep),
               scs::dr_glm_objective(data, prep.fam, prep.pv.e, *aug))
            : scs::ipw_glm_objective(data, prep.fam, prep.pv.e);
    scs::GlmCriterionContext ctx;
    ctx.data = &data;
    ctx.family = prep.fam;
    ctx.e = prep.pv.e;
    if (prep.pfit) ctx.propensity = &*prep.pfit;
    if (aug) ctx.aug = &*aug;
    result = scs::select_glm(obj, ctx, kind, base, grid);
  }

  report["family"] = family_json(prep);
  report["lambda_max"] = result.lambda_max;
  report["path"] = path_json(result);
  const scs::PathEntry& best = result.best();
  json chosen;
  chosen["index"] = result.chosen;
  chosen["lambda"] = best.penalty.lambda;
  chosen["active_size"] = best.active_size;
  chosen["total"] = finite_or_null(best.criterion.value);
  chosen["coef"] = vec_json(best.coef);
  report["chosen"] = chosen;

  prep.manifest.config = {{"pipeline", opt.pipeline},
                          {"penalty", opt.penalty},
                          {"criterion", args.criterion},
                          {"grid_points", args.grid_points},
                          {"grid_ratio", args.grid_ratio},
                          {"propensity", opt.propensity}};
  prep.manifest.timestamp = scs::now_utc();
  report["manifest"] = scs::manifest_json(prep.manifest);
  emit_json(report, args.out);
  if (!args.csv.empty()) {
    scs::CsvTable table = path_table(result);
    table.comments = scs::manifest_comments(prep.manifest);
    scs::write_csv(args.csv, table);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string preset;
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  int reps = -1;
  std::int64_t seed = -1;
  int grid_points = -1;
  double grid_ratio = -1.0;
  std::string out;
  std::string csv;
};

json preset_config(const std::string& name) {
  json c;
  if (name == "table1") {
    c = {{"kind", "bias"},      {"model", "contrast"}, {"p", 8},
         {"N", 40},             {"theta1", 0.2},       {"theta2", 0.2},
         {"sigma2", 1.0},       {"reps", 1000}};
  } else if (name == "table2") {
    c = {{"kind", "selection"}, {"model", "contrast"},
         {"p", 8},              {"N", 40},
         {"theta1", 0.2},       {"theta2", 0.2},
         {"sigma2", 1.0},       {"criteria", "qicw,ipcp"},
         {"reps", 200}};
  } else if (name == "table3" || name == "table4") {
    c = {{"kind", name == "table3" ? "bias" : "selection"},
         {"model", "glm"},
         {"family", "binomial"},
         {"p", 2},
         {"H", 4},
         {"N", 200},
         {"m", 10},
         {"beta_star", 0.1},
         {"alpha_star", 0.1},
         {"gamma_star", 0.2},
         {"misspec", "none"},
         {"reps", 200}};
    if (name == "table4") c["criteria"] = "qicw,ipic,dric";
  } else if (name == "table6" || name == "table7") {
    c = {{"kind", "selection"},
         {"model", "glm"},
         {"family", "gaussian"},
         {"p", 2},
         {"H", 4},
         {"N", 200},
         {"beta_star", 0.2},
         {"alpha_star", 0.2},
         {"gamma_star", name == "table6" ? 0.5 : 1.0},
         {"misspec", "none"},
         {"criteria", "qicw,ipic,dric"},
         {"reps", 200}};
  } else {
    throw scs::validation_error("unknown preset '" + name + "'");
  }
  c["seed"] = 20240401;
  return c;
}

void apply_override(json& config, const std::string& kv) {
  std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw scs::validation_error("--set expects key=value, got '" + kv + "'");
  }
  std::string key = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);
  if (value == "true" || value == "false") {
    config[key] = value == "true";
    return;
  }
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used == value.size()) {
      if (v == std::floor(v) && std::abs(v) < 1e15 &&
          value.find_first_of(".eE") == std::string::npos) {
        config[key] = static_cast<std::int64_t>(v);
      } else {
        config[key] = v;
      }
      return;
    }
  } catch (const std::exception&) {
  }
  config[key] = value;
}

template <typename T>
T config_get(const json& c, const std::string& key, T fallback) {
  if (!c.contains(key)) return fallback;
  return c.at(key).get<T>();
}

std::vector<scs::CriterionKind> config_criteria(const json& c,
                                                const std::string& fallback) {
  std::string joined = fallback;
  if (c.contains("criteria")) {
    if (c.at("criteria").is_array()) {
      joined.clear();
      for (const auto& item : c.at("criteria")) {
        if (!joined.empty()) joined += ",";
        joined += item.get<std::string>();
      }
    } else {
      joined = c.at("criteria").get<std::string>();
    }
  }
  std::vector<scs::CriterionKind> kinds;
  for (const std::string& name : split(joined, ',')) {
    kinds.push_back(scs::criterion_from_name(trimmed(name)));
  }
  return kinds;
}

std::string setting_label(const json& c) {
  std::ostringstream s;
  if (config_get<std::string>(c, "model", "contrast") == "contrast") {
    s << "contrast_p" << config_get<int>(c, "p", 8) << "_N"
      << config_get<int>(c, "N", 40) << "_t"
      << scs::format_double(config_get<double>(c, "theta1", 0.2)) << "_"
      << scs::format_double(config_get<double>(c, "theta2", 0.2));
  } else {
    std::string family = config_get<std::string>(c, "family", "binomial");
    s << family << "_p" << config_get<int>(c, "p", 2) << "_H"
      << config_get<int>(c, "H", 4) << "_N" << config_get<int>(c, "N", 200);
    if (family == "binomial") s << "_m" << config_get<int>(c, "m", 10);
    s << "_b" << scs::format_double(config_get<double>(c, "beta_star", 0.1))
      << "_a" << scs::format_double(config_get<double>(c, "alpha_star", 0.1))
      << "_g" << scs::format_double(config_get<double>(c, "gamma_star", 0.2))
      << "_" << config_get<std::string>(c, "misspec", "none");
  }
  return s.str();
}

scs::GaussianContrastDgp contrast_dgp(const json& c) {
  scs::GaussianContrastDgp dgp;
  dgp.p = config_get<int>(c, "p", dgp.p);
  dgp.N = config_get<int>(c, "N", dgp.N);
  dgp.theta1 = config_get<double>(c, "theta1", dgp.theta1);
  dgp.theta2 = config_get<double>(c, "theta2", dgp.theta2);
  dgp.sigma2 = config_get<double>(c, "sigma2", dgp.sigma2);
  return dgp;
}

scs::GlmDgp glm_dgp(const json& c) {
  scs::GlmDgp dgp;
  std::string family = config_get<std::string>(c, "family", "binomial");
  if (family == "binomial") {
    dgp.family = scs::Family::binomial_logit;
  } else if (family == "gaussian") {
    dgp.family = scs::Family::gaussian;
  } else {
    throw scs::validation_error("unknown family '" + family + "'");
  }
  dgp.p = config_get<int>(c, "p", dgp.p);
  dgp.H = config_get<int>(c, "H", dgp.H);
  dgp.N = config_get<int>(c, "N", dgp.N);
  dgp.m = config_get<int>(c, "m", dgp.m);
  dgp.beta_star = config_get<double>(c, "beta_star", dgp.beta_star);
  dgp.alpha_star = config_get<double>(c, "alpha_star", dgp.alpha_star);
  dgp.gamma_star = config_get<double>(c, "gamma_star", dgp.gamma_star);
  dgp.misspec =
      scs::misspec_from_name(config_get<std::string>(c, "misspec", "none"));
  return dgp;
}

json bucket_row_json(const scs::BucketRow& row) {
  json j;
  j["mean"] = dvec_json(row.mean);
  j["sd"] = dvec_json(row.sd);
  j["count"] = row.count;
  j["increment"] = dvec_json(row.increment);
  j["increment_se"] = dvec_json(row.increment_se);
  return j;
}

json selection_stats_json(const scs::SelectionStats& s) {
  return json{{"p1_mean", s.p1_mean},       {"p1_sd", s.p1_sd},
              {"rmse1_mean", s.rmse1_mean}, {"rmse1_sd", s.rmse1_sd},
              {"p2_mean", s.p2_mean},       {"p2_sd", s.p2_sd},
              {"rmse2_mean", s.rmse2_mean}, {"rmse2_sd", s.rmse2_sd},
              {"p_mean", s.p_mean},         {"p_sd", s.p_sd},
              {"rmse_mean", s.rmse_mean},   {"rmse_sd", s.rmse_sd},
              {"n_used", s.n_used},         {"failures", s.failures}};
}

int run_simulate(const SimulateArgs& args) {
  json config;
  scs::RunManifest manifest;
  manifest.command = "simulate";
  if (!args.preset.empty() && !args.config_path.empty()) {
    throw scs::validation_error("give either --preset or --config, not both");
  }
  if (!args.preset.empty()) {
    config = preset_config(args.preset);
  } else if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      throw scs::validation_error("cannot open '" + args.config_path + "'");
    }
    try {
      in >> config;
    } catch (const json::exception& err) {
      throw scs::validation_error("cannot parse '" + args.config_path +
                                  "': " + err.what());
    }
    scs::add_input_digest(manifest, args.config_path);
  } else {
    throw scs::validation_error("simulate needs --preset or --config");
  }
  for (const std::string& kv : args.overrides) apply_override(config, kv);
  if (args.reps > 0) config["reps"] = args.reps;
  if (args.seed >= 0) config["seed"] = args.seed;
  if (args.grid_points > 0) config["grid_points"] = args.grid_points;
  if (args.grid_ratio > 0) config["grid_ratio"] = args.grid_ratio;

  const std::string kind = config_get<std::string>(config, "kind", "bias");
  const std::string model =
      config_get<std::string>(config, "model", "contrast");
  const int reps = config_get<int>(config, "reps", 200);
  const std::uint64_t seed = config_get<std::uint64_t>(config, "seed", 1);
  scs::GridSpec grid;
  grid.n_points = config_get<int>(config, "grid_points", grid.n_points);
  grid.ratio = config_get<double>(config, "grid_ratio", grid.ratio);
  const std::string setting = setting_label(config);

  manifest.config = config;
  manifest.seed = seed;
  manifest.has_seed = true;

  json report;
  report["kind"] = kind;
  report["setting"] = setting;
  scs::CsvTable table;

  if (kind == "bias") {
    scs::BiasStudyResult result =
        model == "contrast"
            ? scs::run_bias_study(contrast_dgp(config), reps, seed, grid)
            : scs::run_bias_study(glm_dgp(config), reps, seed, grid);
    json rows;
    for (const auto& [name, row] : result.rows) {
      rows[name] = bucket_row_json(row);
    }
    report["result"] = {{"buckets", result.buckets},
                        {"replications", result.replications},
                        {"seed", result.seed},
                        {"rows", rows}};
    table = scs::bias_study_table(result, setting);
  } else if (kind == "selection") {
    std::string fallback = model == "contrast" ? "qicw,ipcp" : "qicw,ipic";
    std::vector<scs::CriterionKind> criteria =
        config_criteria(config, fallback);
    scs::SelectionStudyResult result =
        model == "contrast"
            ? scs::run_selection_study(contrast_dgp(config), criteria, reps,
                                       seed, grid)
            : scs::run_selection_study(glm_dgp(config), criteria, reps, seed,
                                       grid);
    json rows;
    for (const auto& [name, stats] : result.by_criterion) {
      rows[name] = selection_stats_json(stats);
    }
    report["result"] = {{"replications", result.replications},
                        {"seed", result.seed},
                        {"criteria", rows}};
    table = scs::selection_study_table(result, setting);
  } else if (kind == "sure") {
    if (model != "contrast") {
      throw scs::validation_error(
          "the unbiased-risk check runs on the contrast model");
    }
    int n_lambda = config_get<int>(config, "n_lambda", 5);
    double ratio = config_get<double>(config, "lambda_ratio", 0.02);
    scs::SureCheckResult result =
        scs::run_sure_check(contrast_dgp(config), reps, seed, n_lambda, ratio);
    report["result"] = {{"lambdas", dvec_json(result.lambdas)},
                        {"criterion_mean", dvec_json(result.criterion_mean)},
                        {"criterion_se", dvec_json(result.criterion_se)},
                        {"oracle_mean", dvec_json(result.oracle_mean)},
                        {"oracle_se", dvec_json(result.oracle_se)},
                        {"diff_mean", dvec_json(result.diff_mean)},
                        {"diff_se", dvec_json(result.diff_se)},
                        {"replications", result.replications},
                        {"seed", result.seed}};
    table = scs::sure_check_table(result, setting);
  } else {
    throw scs::validation_error("unknown study kind '" + kind + "'");
  }

  manifest.timestamp = scs::now_utc();
  report["manifest"] = scs::manifest_json(manifest);
  emit_json(report, args.out);
  if (!args.csv.empty()) {
    std::vector<std::string> comments = scs::manifest_comments(manifest);
    comments.insert(comments.end(), table.comments.begin(),
                    table.comments.end());
    table.comments = comments;
    scs::write_csv(args.csv, table);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::string input;
  std::string outcome = "y";
  std::string treatment = "t";
  std::string covariates;   // comma list, required
  std::string confounders;  // comma list, required
  std::vector<std::string> filters;
  std::string binarize;  // empty | nonzero | <threshold>
  bool standardize = false;
  bool intercept = true;
  std::string criteria;  // comma list; empty = mode default
  std::string contrast;
  double sigma2 = kAuto;
  int grid_points = 50;
  double grid_ratio = 1e-3;
  std::string out;
  std::string csv;
};

int run_analyze(const AnalyzeArgs& args) {
  NamedTable table = load_named_csv(args.input);
  scs::RunManifest manifest;
  manifest.command = "analyze";
  scs::add_input_digest(manifest, args.input);

  // Stratification filters: keep rows where every named column matches.
  std::vector<int> keep(table.values.rows());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<int>(i);
  for (const std::string& f : args.filters) {
    std::size_t eq = f.find('=');
    if (eq == std::string::npos) {
      throw scs::validation_error("--filter expects col=value, got '" + f +
                                  "'");
    }
    int col = table.column(trimmed(f.substr(0, eq)));
    double want = parse_number(trimmed(f.substr(eq + 1)), "--filter");
    std::vector<int> next;
    for (int i : keep) {
      if (std::abs(table.values(i, col) - want) < 1e-9) next.push_back(i);
    }
    keep = next;
  }
  if (keep.empty()) throw scs::validation_error("empty stratum after filter");
  const int n = static_cast<int>(keep.size());

  std::vector<std::string> cov_names, conf_names;
  for (const std::string& s : split(args.covariates, ',')) {
    if (!trimmed(s).empty()) cov_names.push_back(trimmed(s));
  }
  for (const std::string& s : split(args.confounders, ',')) {
    if (!trimmed(s).empty()) conf_names.push_back(trimmed(s));
  }
  if (cov_names.empty()) {
    throw scs::validation_error("--covariates must name at least one column");
  }
  if (conf_names.empty()) {
    throw scs::validation_error("--confounders must name at least one column");
  }
  const int p = static_cast<int>(cov_names.size());

  scs::Dataset data;
  data.y.resize(n);
  data.t.resize(n);
  data.x.resize(n, p);
  data.z.resize(n, static_cast<int>(conf_names.size()) +
                       (args.intercept ? 1 : 0));
  int y_col = table.column(args.outcome);
  int t_col = table.column(args.treatment);
  int tmax = 0;
  for (int i = 0; i < n; ++i) {
    double y = table.values(keep[i], y_col);
    if (args.binarize == "nonzero") {
      y = y != 0.0 ? 1.0 : 0.0;
    } else if (!args.binarize.empty()) {
      y = y > parse_number(args.binarize, "--binarize") ? 1.0 : 0.0;
    }
    data.y[i] = y;
    double traw = table.values(keep[i], t_col);
    int t = static_cast<int>(std::lround(traw));
    if (std::abs(traw - t) > 1e-9 || t < 1) {
      throw scs::validation_error(
          "treatment column must hold integers 1..H");
    }
    data.t[i] = t;
    tmax = std::max(tmax, t);
    for (int j = 0; j < p; ++j) {
      data.x(i, j) = table.values(keep[i], table.column(cov_names[j]));
    }
    for (std::size_t j = 0; j < conf_names.size(); ++j) {
      data.z(i, static_cast<int>(j)) =
          table.values(keep[i], table.column(conf_names[j]));
    }
    if (args.intercept) data.z(i, data.z.cols() - 1) = 1.0;
  }
  data.n_groups = tmax;
  const bool binary = !args.binarize.empty();
  if (binary) {
    data.trials = Eigen::VectorXd::Ones(n);
  }
  data.validate();

  // Constant covariates cannot carry a signal; they are reported as zero
  // with a flag rather than dropped, so row order matches the input list.
  std::vector<bool> degenerate(p, false);
  for (int j = 0; j < p; ++j) {
    degenerate[j] =
        data.x.col(j).maxCoeff() - data.x.col(j).minCoeff() == 0.0;
  }
  scs::Standardization std_info;
  if (args.standardize) std_info = scs::standardize_columns(data.x);

  scs::PropensityFit pfit = scs::fit_propensity(data);
  if (pfit.separation || !pfit.converged) {
    throw scs::numerical_error(
        "assignment model did not converge (separation or divergence)");
  }
  scs::PropensityValues pv = scs::estimated_propensity(pfit);

  scs::GridSpec grid;
  grid.n_points = args.grid_points;
  grid.ratio = args.grid_ratio;

  std::string joined =
      args.criteria.empty() ? (binary ? "qicw,ipic" : "qicw,ipcp")
                            : args.criteria;
  std::vector<std::string> crit_names;
  std::vector<scs::CriterionKind> kinds;
  for (const std::string& s : split(joined, ',')) {
    crit_names.push_back(trimmed(s));
    kinds.push_back(scs::criterion_from_name(crit_names.back()));
  }

  json report;
  report["n"] = n;
  report["groups"] = data.H();
  report["mode"] = binary ? "binary" : "continuous";
  report["covariates"] = cov_names;
  json per_criterion;
  scs::CsvTable out_table;

  if (!binary) {
    ProblemOptions copt;
    copt.contrast = args.contrast;
    scs::ContrastSpec contrast = resolve_contrast(copt, data.H());
    scs::WeightedLsqProblem prob =
        scs::ipw_contrast_problem(data, contrast, pv.e);
    double sigma2 =
        std::isfinite(args.sigma2) ? args.sigma2 : scs::resolve_sigma2(prob);
    report["sigma2"] = sigma2;
    for (scs::CriterionKind kind : kinds) {
      if (kind != scs::CriterionKind::qicw &&
          kind != scs::CriterionKind::ipcp) {
        throw scs::validation_error(
            "continuous mode supports the qicw and ipcp criteria");
      }
    }
    std::vector<scs::SelectionResult> results =
        scs::select_lsq_multi(prob, contrast, pv.e, sigma2, kinds,
                              scs::PenaltySpec::lasso_at(1.0), grid);
    out_table.header = {"covariate"};
    for (const std::string& name : crit_names) out_table.header.push_back(name);
    out_table.header.push_back("degenerate");
    for (int j = 0; j < p; ++j) {
      std::vector<std::string> row{cov_names[j]};
      for (const scs::SelectionResult& res : results) {
        row.push_back(res.ok()
                          ? scs::format_double(10.0 * res.best().coef[j])
                          : std::string());
      }
      row.push_back(degenerate[j] ? "1" : "0");
      out_table.rows.push_back(row);
    }
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const scs::SelectionResult& res = results[k];
      json entry;
      entry["ok"] = res.ok();
      if (res.ok()) {
        entry["lambda"] = res.best().penalty.lambda;
        entry["active_size"] = res.best().active_size;
        entry["total"] = finite_or_null(res.best().criterion.value);
        entry["coef_x10"] = vec_json(10.0 * res.best().coef);
      }
      per_criterion[crit_names[k]] = entry;
    }
  } else {
    scs::ModelFamily fam = scs::ModelFamily::binomial(1.0);
    bool need_dr = false;
    for (scs::CriterionKind kind : kinds) {
      if (kind == scs::CriterionKind::ipcp) {
        throw scs::validation_error("ipcp does not apply to binary mode");
      }
      if (kind == scs::CriterionKind::dr_aic ||
          kind == scs::CriterionKind::dric) {
        need_dr = true;
      }
    }
    std::optional<scs::OutcomeNuisanceFit> nuisance;
    std::optional<scs::AugmentationModel> aug;
    if (need_dr) {
      nuisance = scs::fit_outcome_nuisance(data, fam);
      if (!nuisance->converged) {
        throw scs::numerical_error("outcome regression did not converge");
      }
      aug = scs::AugmentationModel{fam.family, &*nuisance, &data, 1.0};
    }
    scs::GlmCriterionContext ctx;
    ctx.data = &data;
    ctx.family = fam;
    ctx.e = pv.e;
    ctx.propensity = &pfit;
    if (aug) ctx.aug = &*aug;

    std::vector<scs::SelectionResult> results(kinds.size());
    std::vector<scs::CriterionKind> ipw_kinds, dr_kinds;
    std::vector<int> ipw_slots, dr_slots;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      bool dr = kinds[k] == scs::CriterionKind::dr_aic ||
                kinds[k] == scs::CriterionKind::dric;
      (dr ? dr_kinds : ipw_kinds).push_back(kinds[k]);
      (dr ? dr_slots : ipw_slots).push_back(static_cast<int>(k));
    }
    if (!ipw_kinds.empty()) {
      scs::GlmObjective obj = scs::ipw_glm_objective(data, fam, pv.e);
      std::vector<scs::SelectionResult> part = scs::select_glm_multi(
          obj, ctx, ipw_kinds, scs::PenaltySpec::lasso_at(1.0), grid);
      for (std::size_t k = 0; k < ipw_kinds.size(); ++k) {
        results[ipw_slots[k]] = part[k];
      }
    }
    if (!dr_kinds.empty()) {
      scs::GlmObjective obj = scs::dr_glm_objective(data, fam, pv.e, *aug);
      std::vector<scs::SelectionResult> part = scs::select_glm_multi(
          obj, ctx, dr_kinds, scs::PenaltySpec::lasso_at(1.0), grid);
      for (std::size_t k = 0; k < dr_kinds.size(); ++k) {
        results[dr_slots[k]] = part[k];
      }
    }

    out_table.header = {"covariate", "group"};
    for (const std::string& name : crit_names) out_table.header.push_back(name);
    out_table.header.push_back("degenerate");
    for (int j = 0; j < p; ++j) {
      for (int h = 0; h < data.H(); ++h) {
        std::vector<std::string> row{cov_names[j], std::to_string(h + 1)};
        for (const scs::SelectionResult& res : results) {
          row.push_back(
              res.ok()
                  ? scs::format_double(10.0 * res.best().coef[h * p + j])
                  : std::string());
        }
        row.push_back(degenerate[j] ? "1" : "0");
        out_table.rows.push_back(row);
      }
    }
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const scs::SelectionResult& res = results[k];
      json entry;
      entry["ok"] = res.ok();
      if (res.ok()) {
        entry["lambda"] = res.best().penalty.lambda;
        entry["active_size"] = res.best().active_size;
        entry["total"] = finite_or_null(res.best().criterion.value);
        entry["coef_x10"] = vec_json(10.0 * res.best().coef);
      }
      per_criterion[crit_names[k]] = entry;
    }
  }

  json degen = json::array();
  for (int j = 0; j < p; ++j) {
    if (degenerate[j]) degen.push_back(cov_names[j]);
  }
  report["degenerate_covariates"] = degen;
  report["criteria"] = per_criterion;
  report["standardized"] = args.standardize;
  report["scale"] = "coefficients are reported x10";

  manifest.config = {{"outcome", args.outcome},
                     {"treatment", args.treatment},
                     {"covariates", args.covariates},
                     {"confounders", args.confounders},
                     {"standardize", args.standardize},
                     {"intercept", args.intercept},
                     {"criteria", joined}};
  if (!args.binarize.empty()) manifest.config["binarize"] = args.binarize;
  if (!args.filters.empty()) manifest.config["filters"] = args.filters;
  manifest.timestamp = scs::now_utc();
  report["manifest"] = scs::manifest_json(manifest);
  emit_json(report, args.out);
  if (!args.csv.empty()) {
    out_table.comments = scs::manifest_comments(manifest);
    scs::write_csv(args.csv, out_table);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// synth: a small job-training-style observational dataset so the analyze
// workflow can be exercised without shipping third-party data.

struct SynthArgs {
  int n = 600;
  std::uint64_t seed = 1;
  std::string out;
};

int run_synth(const SynthArgs& args) {
  if (args.n < 10) throw scs::validation_error("--n must be at least 10");
  std::mt19937_64 rng = scs::replicate_rng(args.seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  scs::CsvTable table;
  table.header = {"age",     "education", "black",  "hispanic", "married",
                  "nodegree", "re74",     "re75",   "treat",    "re78"};
  for (int i = 0; i < args.n; ++i) {
    double age = std::round(27.0 + 7.0 * normal(rng));
    age = std::min(55.0, std::max(17.0, age));
    double education = std::round(10.0 + 2.0 * normal(rng));
    education = std::min(16.0, std::max(3.0, education));
    double black = uniform(rng) < 0.55 ? 1.0 : 0.0;
    double hispanic = black == 0.0 && uniform(rng) < 0.25 ? 1.0 : 0.0;
    double married =
        uniform(rng) < scs::logistic(-0.9 + 0.07 * (age - 27.0)) ? 1.0 : 0.0;
    double nodegree = education < 12.0 ? 1.0 : 0.0;
    double re74 =
        uniform(rng) < 0.3 ? 0.0 : std::exp(8.3 + 0.8 * normal(rng));
    double re75 = uniform(rng) < 0.25
                      ? 0.0
                      : 0.6 * re74 + std::exp(7.9 + 0.7 * normal(rng));
    double e1 = scs::logistic(-0.6 + 0.6 * black + 0.4 * nodegree -
                              0.3 * married - 0.00004 * re74 +
                              0.015 * (27.0 - age));
    double treat = uniform(rng) < e1 ? 1.0 : 2.0;
    double latent = 2400.0 + 0.55 * re75 + 0.2 * re74 +
                    130.0 * (education - 10.0) + 900.0 * married -
                    700.0 * nodegree + (treat == 1.0 ? 1600.0 : 0.0) +
                    2300.0 * normal(rng);
    double re78 = uniform(rng) < 0.22 ? 0.0 : std::max(0.0, latent);

    auto f = [](double v) { return scs::format_double(v); };
    table.rows.push_back({f(age), f(education), f(black), f(hispanic),
                          f(married), f(nodegree), f(re74), f(re75), f(treat),
                          f(re78)});
  }

  scs::RunManifest manifest;
  manifest.command = "synth";
  manifest.seed = args.seed;
  manifest.has_seed = true;
  manifest.config = {{"n", args.n}};
  table.comments = scs::manifest_comments(manifest);
  scs::write_csv(args.out, table);
  return 0;
}

void add_problem_flags(CLI::App* cmd, ProblemOptions& opt) {
  cmd->add_option("--input", opt.input, "dataset CSV (y,t,x1..,z1..[,m])")
      ->required();
  cmd->add_option("--pipeline", opt.pipeline,
                  "ipw-gaussian | ipw-glm | dr-glm");
  cmd->add_option("--family", opt.family, "gaussian | binomial");
  cmd->add_option("--sigma2", opt.sigma2,
                  "gaussian response variance (default: resolved or plug-in)");
  cmd->add_option("--trials", opt.trials,
                  "binomial trials when the CSV has no m column");
  cmd->add_option("--propensity", opt.propensity, "fit | known:<file>");
  cmd->add_option("--contrast", opt.contrast,
                  "comma-separated contrast weights (default two-group)");
  cmd->add_option("--penalty", opt.penalty,
                  "lasso | elastic-net | group-lasso | scad | mcplus");
  cmd->add_option("--lambda2", opt.lambda2, "elastic-net ridge weight");
  cmd->add_option("--scad-a", opt.scad_a, "scad shape (default 3.7)");
  cmd->add_option("--mcp-gamma", opt.mcp_gamma, "mc+ shape (default 3.0)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse propensity-weighted causal estimation toolkit"};
  app.set_version_flag("--version", scs::kVersion);
  app.require_subcommand(1);

  FitArgs fit;
  CLI::App* fit_cmd =
      app.add_subcommand("fit", "penalized fit at one lambda");
  add_problem_flags(fit_cmd, fit.prob);
  fit_cmd->add_option("--lambda", fit.lambda, "penalty level")->required();
  fit_cmd->add_option("--criterion", fit.criterion,
                      "score the fit: qicw | ipcp | ipic | dr-aic | dric");
  fit_cmd->add_option("--out", fit.out, "JSON output path (default stdout)");

  SelectArgs sel;
  CLI::App* sel_cmd =
      app.add_subcommand("select", "criterion-driven lambda path");
  add_problem_flags(sel_cmd, sel.prob);
  sel_cmd->add_option("--criterion", sel.criterion,
                      "qicw | ipcp | ipic | dr-aic | dric")
      ->required();
  sel_cmd->add_option("--grid-points", sel.grid_points, "lambda grid size");
  sel_cmd->add_option("--grid-ratio", sel.grid_ratio,
                      "smallest lambda as a fraction of lambda_max");
  sel_cmd->add_option("--out", sel.out, "JSON output path (default stdout)");
  sel_cmd->add_option("--csv", sel.csv, "path table CSV mirror");

  SimulateArgs sim;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Monte Carlo studies");
  sim_cmd->add_option("--preset", sim.preset,
                      "table1 | table2 | table3 | table4 | table6 | table7");
  sim_cmd->add_option("--config", sim.config_path, "study config JSON");
  sim_cmd->add_option("--set", sim.overrides,
                      "override a config key (key=value, repeatable)");
  sim_cmd->add_option("--reps", sim.reps, "replication count");
  sim_cmd->add_option("--seed", sim.seed, "RNG seed");
  sim_cmd->add_option("--grid-points", sim.grid_points, "lambda grid size");
  sim_cmd->add_option("--grid-ratio", sim.grid_ratio,
                      "smallest lambda as a fraction of lambda_max");
  sim_cmd->add_option("--out", sim.out, "JSON output path (default stdout)");
  sim_cmd->add_option("--csv", sim.csv, "table-shaped CSV mirror");

  AnalyzeArgs ana;
  CLI::App* ana_cmd =
      app.add_subcommand("analyze", "observational study workflow");
  ana_cmd->add_option("--input", ana.input, "CSV with named columns")
      ->required();
  ana_cmd->add_option("--outcome", ana.outcome, "outcome column name");
  ana_cmd->add_option("--treatment", ana.treatment,
                      "treatment column (integers 1..H)");
  ana_cmd->add_option("--covariates", ana.covariates,
                      "comma-separated causal-model columns")
      ->required();
  ana_cmd->add_option("--confounders", ana.confounders,
                      "comma-separated assignment-model columns")
      ->required();
  ana_cmd->add_option("--filter", ana.filters,
                      "keep rows with col=value (repeatable)");
  ana_cmd->add_option("--binarize", ana.binarize,
                      "'nonzero' or a threshold; switches to the logit model");
  ana_cmd->add_flag("--standardize", ana.standardize,
                    "standardize covariate columns");
  ana_cmd->add_flag("--intercept,!--no-intercept", ana.intercept,
                    "add an intercept to the assignment model (default on)");
  ana_cmd->add_option("--criteria", ana.criteria,
                      "comma-separated criteria (mode default otherwise)");
  ana_cmd->add_option("--contrast", ana.contrast,
                      "contrast weights for continuous mode");
  ana_cmd->add_option("--sigma2", ana.sigma2,
                      "response variance (default: resolved from data)");
  ana_cmd->add_option("--grid-points", ana.grid_points, "lambda grid size");
  ana_cmd->add_option("--grid-ratio", ana.grid_ratio,
                      "smallest lambda as a fraction of lambda_max");
  ana_cmd->add_option("--out", ana.out, "JSON output path (default stdout)");
  ana_cmd->add_option("--csv", ana.csv, "selected-coefficient CSV mirror");

  SynthArgs syn;
  CLI::App* syn_cmd = app.add_subcommand(
      "synth", "generate a synthetic job-training-style CSV");
  syn_cmd->add_option("--n", syn.n, "rows");
  syn_cmd->add_option("--seed", syn.seed, "RNG seed");
  syn_cmd->add_option("--out", syn.out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit);
    if (sel_cmd->parsed()) return run_select(sel);
    if (sim_cmd->parsed()) return run_simulate(sim);
    if (ana_cmd->parsed()) return run_analyze(ana);
    if (syn_cmd->parsed()) return run_synth(syn);
  } catch (const scs::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const scs::numerical_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
