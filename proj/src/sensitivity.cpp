#include "covidsem/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "covidsem/csv.hpp"
#include "covidsem/design.hpp"
#include "covidsem/dml.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/estimator.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/rng.hpp"

namespace covidsem {

namespace {

constexpr double kZ90 = 1.6448536269514722;

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Derives any log_<name> covariates the variants ask for, once, before the
// parallel phase. Unresolvable names map to the reason they cannot be used.
std::map<std::string, std::string> resolve_covariates(
    Panel& p, const std::vector<SpecVariant>& variants) {
  std::map<std::string, std::string> errors;
  Covariates cov = p.covariates();
  bool grew = false;
  for (const auto& v : variants) {
    for (const auto& name : v.extra_covariates) {
      if (cov.col(name) >= 0 || errors.count(name)) continue;
      if (name.rfind("log_", 0) != 0) {
        errors[name] = "covariate '" + name + "' not in panel";
        continue;
      }
      const std::string base = name.substr(4);
      const int bc = cov.col(base);
      if (bc < 0) {
        errors[name] = "covariate '" + base + "' not in panel";
        continue;
      }
      Eigen::VectorXd col = cov.values.col(bc);
      if ((col.array() <= 0.0).any()) {
        errors[name] = "covariate '" + base + "' must be positive to log";
        continue;
      }
      cov.names.push_back(name);
      cov.values.conservativeResize(Eigen::NoChange, cov.values.cols() + 1);
      cov.values.col(cov.values.cols() - 1) = col.array().log();
      grew = true;
    }
  }
  if (grew) p.set_covariates(cov);
  return errors;
}

struct Combo {
  const SpecVariant* variant;
  LagConfig lags;
  int timing_idx;  // 0 baseline, 1 alternative
  OutcomeKind outcome;
  bool national;
};

std::string timing_name(int idx) { return idx == 0 ? "baseline" : "alternative"; }

std::string info_name(bool national) {
  return national ? "with_national" : "without_national";
}

GridCell shell(const Combo& c) {
  GridCell cell;
  cell.variant = c.variant->id;
  cell.label = c.variant->label;
  cell.timing = timing_name(c.timing_idx);
  cell.outcome = outcome_name(c.outcome);
  cell.info = info_name(c.national);
  return cell;
}

std::vector<GridCell> run_combo(const Panel& p, const Combo& c, const GridConfig& cfg,
                                const std::map<std::string, std::string>& cov_errors,
                                std::uint64_t seed) {
  const SpecVariant& v = *c.variant;
  GridCell base = shell(c);
  if (v.estimator == "iv" || v.estimator == "dml_random_forest") {
    base.status = "not_implemented";
    return {base};
  }
  if (v.estimator != "ols" && v.estimator != "dml_lasso") {
    base.status = "failed: unknown estimator '" + v.estimator + "'";
    return {base};
  }
  for (const auto& name : v.extra_covariates) {
    auto it = cov_errors.find(name);
    if (it != cov_errors.end()) {
      base.status = "failed: " + it->second;
      return {base};
    }
  }
  for (const auto& st : v.drop_states) {
    if (!contains(p.states(), st)) {
      base.status = "failed: state '" + st + "' not in panel";
      return {base};
    }
  }

  EquationOptions opt;
  opt.outcome = c.outcome;
  opt.national_info = c.national;
  opt.lags = c.lags;
  opt.dummies = v.weekly_dummies ? Dummies::week : Dummies::month;
  opt.extra_statics = v.extra_covariates;
  opt.past_behavior_info = v.add_behavior_info;

  try {
    const ModelSpec spec = reduced_spec(opt);
    Design d = build_design(p, spec, cfg.window_start, cfg.window_end, cfg.log_zero);
    if (!v.drop_states.empty()) {
      std::vector<int> keep;
      for (int g = 0; g < d.n_clusters(); ++g)
        if (!contains(v.drop_states, d.cluster_names[static_cast<size_t>(g)])) keep.push_back(g);
      d = d.rows_for_clusters(keep);
    }

    std::vector<GridCell> out;
    const auto policies = spec.term_names(Block::policy);
    if (v.estimator == "ols") {
      const FitResult fit = fit_cluster_ols(d, spec.name);
      for (const auto& pol : policies) {
        GridCell cell = base;
        cell.policy = pol;
        cell.estimate = fit.coef(pol);
        const double se = fit.se_of(pol);
        cell.lo90 = cell.estimate - kZ90 * se;
        cell.hi90 = cell.estimate + kZ90 * se;
        cell.n = fit.n;
        out.push_back(cell);
      }
    } else {
      for (const auto& pol : policies) {
        DmlSpec ds;
        ds.target = pol;
        for (const auto& other : policies)
          if (other != pol) ds.linear.push_back(other);
        ds.folds = cfg.dml_folds;
        ds.lambda = cfg.dml_lambda;
        const DmlResult r = dml_fit(d, ds, seed, 1);
        GridCell cell = base;
        cell.policy = pol;
        cell.estimate = r.theta;
        cell.lo90 = r.theta - kZ90 * r.se;
        cell.hi90 = r.theta + kZ90 * r.se;
        cell.n = r.n;
        out.push_back(cell);
      }
    }
    return out;
  } catch (const std::exception& e) {
    base.status = std::string("failed: ") + e.what();
    return {base};
  }
}

}  // namespace

std::vector<SpecVariant> standard_variants() {
  std::vector<SpecVariant> v(10);
  for (int i = 0; i < 10; ++i) v[static_cast<size_t>(i)].id = i + 1;
  v[0].label = "baseline";
  v[1].label = "drop_new_york";
  v[1].drop_states = {"NY"};
  v[2].label = "mask_wearing_share";
  v[2].extra_covariates = {"mask_share"};
  v[3].label = "log_trump_share";
  v[3].extra_covariates = {"log_trump_share"};
  v[4].label = "past_behavior_info";
  v[4].add_behavior_info = true;
  v[5].label = "all_controls_no_new_york";
  v[5].drop_states = {"NY"};
  v[5].extra_covariates = {"mask_share", "log_trump_share"};
  v[5].add_behavior_info = true;
  v[6].label = "weekly_dummies";
  v[6].weekly_dummies = true;
  v[7].label = "iv_test_growth";
  v[7].estimator = "iv";
  v[8].label = "dml_lasso_all_controls";
  v[8].extra_covariates = {"mask_share", "log_trump_share"};
  v[8].add_behavior_info = true;
  v[8].estimator = "dml_lasso";
  v[9].label = "dml_random_forest";
  v[9].extra_covariates = {"mask_share", "log_trump_share"};
  v[9].add_behavior_info = true;
  v[9].estimator = "dml_random_forest";
  return v;
}

GridResult run_grid(const Panel& panel, const std::vector<SpecVariant>& variants,
                    const GridConfig& cfg) {
  GridConfig c = cfg;
  const RunConfig defaults = run_config_defaults();
  if (c.window_start == 0) c.window_start = defaults.window_start;
  if (c.window_end == 0) c.window_end = defaults.window_end;
  for (const auto& v : variants)
    if (v.id < 1) throw DataError("variant ids must be positive");

  Panel p = panel;
  prepare_panel(p, c.log_zero);
  const auto cov_errors = resolve_covariates(p, variants);

  std::vector<Combo> combos;
  for (const auto& v : variants)
    for (int t = 0; t < 2; ++t)
      for (OutcomeKind o : {OutcomeKind::cases, OutcomeKind::deaths})
        for (bool nat : {false, true})
          combos.push_back({&v, t == 0 ? baseline_timing() : alternative_timing(), t, o, nat});

  std::vector<std::vector<GridCell>> by_combo(combos.size());
  std::vector<std::string> errors(combos.size());
  for_each_index(static_cast<int>(combos.size()), c.threads, [&](int i) {
    const Combo& cb = combos[static_cast<size_t>(i)];
    // Seed keyed by coordinates, so subsetting variants never reshuffles it.
    const std::uint64_t key =
        static_cast<std::uint64_t>(cb.variant->id) * 8 + static_cast<std::uint64_t>(cb.timing_idx) * 4 +
        (cb.outcome == OutcomeKind::deaths ? 2u : 0u) + (cb.national ? 1u : 0u);
    try {
      by_combo[static_cast<size_t>(i)] =
          run_combo(p, cb, c, cov_errors, replicate_seed(c.seed, key));
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("sensitivity grid: " + e);

  GridResult out;
  for (auto& group : by_combo)
    for (auto& cell : group) {
      if (cell.status == "not_implemented") ++out.n_not_implemented;
      else if (cell.status != "ok") ++out.n_failed;
      out.cells.push_back(std::move(cell));
    }
  return out;
}

std::string whisker_csv(const GridResult& grid) {
  std::ostringstream out;
  out << "variant,timing,outcome,info,policy,estimate,lo90,hi90,status\n";
  for (const auto& c : grid.cells) {
    out << c.variant << ',' << c.timing << ',' << c.outcome << ',' << c.info << ',' << c.policy
        << ',';
    if (c.status == "ok")
      out << fmt_double(c.estimate) << ',' << fmt_double(c.lo90) << ',' << fmt_double(c.hi90);
    else
      out << ",,";
    out << ',' << csv_escape(c.status) << '\n';
  }
  return out.str();
}

}  // namespace covidsem
