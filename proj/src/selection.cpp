#include "scs/selection.hpp"

#include <cmath>

#include "scs/common.hpp"

namespace scs {
namespace {

int pick_minimum(const std::vector<PathEntry>& entries) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
    if (!entries[i].criterion.ok) continue;
    if (best < 0 || entries[i].criterion.value < entries[best].criterion.value)
      best = i;
  }
  return best;
}

SelectionResult require_chosen(SelectionResult result) {
  if (result.chosen < 0)
    throw numerical_error("every grid point failed; no penalty selected");
  return result;
}

PenaltySpec at_lambda(PenaltySpec base, double lambda) {
  base.lambda = lambda;
  return base;
}

PathEntry failed_entry(const PenaltySpec& pen, const std::string& reason) {
  PathEntry entry;
  entry.penalty = pen;
  entry.criterion.ok = false;
  entry.criterion.reason = reason;
  return entry;
}

}  // namespace

std::string criterion_name(CriterionKind k) {
  switch (k) {
    case CriterionKind::qicw: return "qicw";
    case CriterionKind::ipcp: return "ipcp";
    case CriterionKind::ipic: return "ipic";
    case CriterionKind::dr_aic: return "dr-aic";
    case CriterionKind::dric: return "dric";
  }
  throw validation_error("unknown criterion");
}

CriterionKind criterion_from_name(const std::string& name) {
  if (name == "qicw") return CriterionKind::qicw;
  if (name == "ipcp") return CriterionKind::ipcp;
  if (name == "ipic") return CriterionKind::ipic;
  if (name == "dr-aic" || name == "dr_aic" || name == "draic")
    return CriterionKind::dr_aic;
  if (name == "dric") return CriterionKind::dric;
  throw validation_error("unknown criterion name: " + name);
}

std::vector<double> lambda_grid(double lambda_max, const GridSpec& grid) {
  if (grid.n_points < 2) throw validation_error("grid needs at least 2 points");
  if (!(grid.ratio > 0.0) || grid.ratio >= 1.0)
    throw validation_error("grid ratio must lie in (0, 1)");
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max))
    throw validation_error(
        "penalty shutoff is zero; the gradient vanishes at the origin");
  std::vector<double> out(grid.n_points);
  const double step =
      std::log(grid.ratio) / static_cast<double>(grid.n_points - 1);
  for (int i = 0; i < grid.n_points; ++i)
    out[i] = lambda_max * std::exp(step * i);
  return out;
}

const PathEntry& SelectionResult::best() const {
  if (chosen < 0) throw validation_error("selection has no chosen entry");
  return entries[static_cast<std::size_t>(chosen)];
}

std::vector<SelectionResult> select_lsq_multi(
    const WeightedLsqProblem& prob, const ContrastSpec& contrast,
    const Eigen::MatrixXd& e, double sigma2,
    const std::vector<CriterionKind>& criteria, const PenaltySpec& base,
    const GridSpec& grid, const SolveOptions& opts, bool warm_start) {
  if (criteria.empty()) throw validation_error("no criteria requested");
  for (CriterionKind c : criteria) {
    if (c != CriterionKind::qicw && c != CriterionKind::ipcp)
      throw validation_error(
          "contrast least-squares paths support qicw and ipcp only");
    if (c == CriterionKind::ipcp && base.kind != PenaltyKind::lasso &&
        base.kind != PenaltyKind::elastic_net)
      throw validation_error("ipcp needs a lasso or elastic_net penalty");
  }
  if (base.kind == PenaltyKind::group_lasso)
    throw validation_error("use select_group for row-tied penalties");

  std::vector<SelectionResult> results(criteria.size());
  const double lambda_max = lasso_shutoff(prob);
  const std::vector<double> grid_pts = lambda_grid(lambda_max, grid);
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    results[c].criterion = criteria[c];
    results[c].lambda_max = lambda_max;
  }

  Eigen::VectorXd warm;
  bool have_warm = false;
  for (double lam : grid_pts) {
    const PenaltySpec pen = at_lambda(base, lam);
    const Eigen::VectorXd* start = have_warm ? &warm : nullptr;
    FitResult fit;
    bool fit_ok = true;
    std::string fit_reason;
    try {
      switch (base.kind) {
        case PenaltyKind::lasso:
          fit = solve_lasso_lsq(prob, lam, opts, start);
          break;
        case PenaltyKind::elastic_net:
          fit = solve_elastic_net_lsq(prob, lam, base.lambda2, opts, start);
          break;
        case PenaltyKind::scad:
          fit = solve_scad_lsq(prob, lam, base.a, opts, start);
          break;
        case PenaltyKind::mcplus:
          fit = solve_mcplus_lsq(prob, lam, base.gamma, opts, start);
          break;
        default:
          throw validation_error("unsupported penalty kind");
      }
      if (warm_start) {
        warm = fit.coef;
        have_warm = true;
      }
    } catch (const numerical_error& err) {
      fit_ok = false;
      fit_reason = err.what();
    }
    for (std::size_t c = 0; c < criteria.size(); ++c) {
      if (!fit_ok) {
        results[c].entries.push_back(failed_entry(pen, fit_reason));
        continue;
      }
      PathEntry entry;
      entry.penalty = pen;
      entry.coef = fit.coef;
      entry.active_size = static_cast<int>(fit.active.size());
      entry.converged = fit.converged && fit.kkt_ok;
      entry.criterion =
          criteria[c] == CriterionKind::qicw
              ? qicw_lsq(prob, fit, sigma2)
              : (base.kind == PenaltyKind::elastic_net
                     ? ipcp_elastic_net(prob, fit, contrast, e, sigma2)
                     : ipcp_lasso(prob, fit, contrast, e, sigma2));
      results[c].entries.push_back(std::move(entry));
    }
  }
  for (auto& result : results) result.chosen = pick_minimum(result.entries);
  return results;
}

SelectionResult select_lsq(const WeightedLsqProblem& prob,
                           const ContrastSpec& contrast,
                           const Eigen::MatrixXd& e, double sigma2,
                           CriterionKind criterion, const PenaltySpec& base,
                           const GridSpec& grid, const SolveOptions& opts,
                           bool warm_start) {
  return require_chosen(std::move(select_lsq_multi(prob, contrast, e, sigma2,
                                                   {criterion}, base, grid,
                                                   opts, warm_start)[0]));
}

SelectionResult select_group(const Eigen::MatrixXd& x, const Eigen::MatrixXd& W,
                             const Eigen::MatrixXd& e, double sigma2,
                             CriterionKind criterion, const GridSpec& grid,
                             const SolveOptions& opts, bool warm_start) {
  if (criterion != CriterionKind::qicw && criterion != CriterionKind::ipcp)
    throw validation_error("group paths support qicw and ipcp only");
  const int p = static_cast<int>(x.cols());
  const int H = static_cast<int>(W.cols());
  std::vector<int> groups(p);
  for (int j = 0; j < p; ++j) groups[j] = j + 1;

  SelectionResult result;
  result.criterion = criterion;
  result.lambda_max = group_lasso_shutoff(x, W, groups);
  const std::vector<double> grid_pts = lambda_grid(result.lambda_max, grid);

  Eigen::MatrixXd warm;
  bool have_warm = false;
  for (double lam : grid_pts) {
    PathEntry entry;
    entry.penalty.kind = PenaltyKind::group_lasso;
    entry.penalty.lambda = lam;
    entry.penalty.groups = groups;
    try {
      const GroupFit fit = solve_group_lasso_lsq(x, W, lam, groups, opts,
                                                 have_warm ? &warm : nullptr);
      entry.coef = Eigen::Map<const Eigen::VectorXd>(fit.coef.data(), p * H);
      entry.active_size = static_cast<int>(fit.active_cols.size());
      entry.converged = fit.converged && fit.kkt_ok;
      if (criterion == CriterionKind::ipcp) {
        entry.criterion = ipcp_group(x, W, fit, e, sigma2);
      } else {
        entry.criterion.active_size = entry.active_size;
        entry.criterion.gof = (W - x * fit.coef).squaredNorm() / sigma2;
        entry.criterion.penalty = 2.0 * entry.active_size;
        entry.criterion.value = entry.criterion.gof + entry.criterion.penalty;
        entry.criterion.ok = true;
      }
      if (warm_start) {
        warm = fit.coef;
        have_warm = true;
      }
    } catch (const numerical_error& err) {
      entry.criterion.ok = false;
      entry.criterion.reason = err.what();
    }
    result.entries.push_back(std::move(entry));
  }
  result.chosen = pick_minimum(result.entries);
  return require_chosen(std::move(result));
}

std::vector<SelectionResult> select_glm_multi(
    const GlmObjective& obj, const GlmCriterionContext& ctx,
    const std::vector<CriterionKind>& criteria, const PenaltySpec& base,
    const GridSpec& grid, const SolveOptions& opts, bool warm_start) {
  if (criteria.empty()) throw validation_error("no criteria requested");
  const bool folded =
      base.kind == PenaltyKind::scad || base.kind == PenaltyKind::mcplus;
  for (CriterionKind c : criteria) {
    if (c == CriterionKind::ipcp)
      throw validation_error("ipcp applies to contrast least-squares paths");
    if ((c == CriterionKind::dr_aic || c == CriterionKind::dric) &&
        base.kind != PenaltyKind::lasso)
      throw validation_error(
          "doubly robust criteria are defined for lasso paths");
  }

  std::vector<SelectionResult> results(criteria.size());
  const double lambda_max = glm_shutoff(obj);
  const std::vector<double> grid_pts = lambda_grid(lambda_max, grid);
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    results[c].criterion = criteria[c];
    results[c].lambda_max = lambda_max;
  }

  Eigen::VectorXd warm;
  bool have_warm = false;
  for (double lam : grid_pts) {
    const PenaltySpec pen = at_lambda(base, lam);
    FitResult fit;
    bool fit_ok = true;
    std::string fit_reason;
    try {
      fit = solve_penalized_glm(obj, pen, opts, have_warm ? &warm : nullptr);
      if (warm_start) {
        warm = fit.coef;
        have_warm = true;
      }
    } catch (const numerical_error& err) {
      fit_ok = false;
      fit_reason = err.what();
    }
    for (std::size_t c = 0; c < criteria.size(); ++c) {
      if (!fit_ok) {
        results[c].entries.push_back(failed_entry(pen, fit_reason));
        continue;
      }
      PathEntry entry;
      entry.penalty = pen;
      entry.coef = fit.coef;
      entry.active_size = static_cast<int>(fit.active.size());
      entry.converged = fit.converged && fit.kkt_ok;
      try {
        switch (criteria[c]) {
          case CriterionKind::qicw:
            entry.criterion = qicw_glm(ctx, fit);
            break;
          case CriterionKind::ipic:
            entry.criterion =
                folded ? ipic_nonconvex(ctx, fit, pen) : ipic(ctx, fit);
            break;
          case CriterionKind::dr_aic:
            entry.criterion = dr_aic(ctx, fit);
            break;
          case CriterionKind::dric:
            entry.criterion = dric(ctx, fit);
            break;
          default:
            throw validation_error("unsupported criterion for GLM paths");
        }
      } catch (const numerical_error& err) {
        entry.criterion.ok = false;
        entry.criterion.reason = err.what();
      }
      results[c].entries.push_back(std::move(entry));
    }
  }
  for (auto& result : results) result.chosen = pick_minimum(result.entries);
  return results;
}

SelectionResult select_glm(const GlmObjective& obj,
                           const GlmCriterionContext& ctx,
                           CriterionKind criterion, const PenaltySpec& base,
                           const GridSpec& grid, const SolveOptions& opts,
                           bool warm_start) {
  return require_chosen(std::move(
      select_glm_multi(obj, ctx, {criterion}, base, grid, opts, warm_start)[0]));
}

}  // namespace scs
