#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "covidsem/counterfactual.hpp"
#include "covidsem/design.hpp"
#include "covidsem/dml.hpp"
#include "covidsem/effects.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/estimator.hpp"
#include "covidsem/ingest.hpp"
#include "covidsem/panel.hpp"
#include "covidsem/pipeline.hpp"
#include "covidsem/sensitivity.hpp"
#include "covidsem/synth.hpp"

using namespace covidsem;

namespace {

struct Session {
  RunConfig cfg;
  int threads = 0;
  std::vector<std::string> inputs;  // digested into the manifest
};

std::filesystem::path ensure_out(const Session& s) {
  std::filesystem::path dir(s.cfg.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

void write_manifest(Session& s) {
  write_text(ensure_out(s) / "manifest.txt",
             manifest_text(run_config_to_json(s.cfg), s.inputs, s.cfg.seed, iso_timestamp_utc()));
}

Panel load_panel(Session& s) {
  if (s.cfg.panel_series.empty() || s.cfg.panel_covariates.empty())
    throw ConfigError(
        "config: fields 'panel_series' and 'panel_covariates' must name an ingested panel");
  s.inputs.push_back(s.cfg.panel_series);
  s.inputs.push_back(s.cfg.panel_covariates);
  return Panel::read_csv(s.cfg.panel_series, s.cfg.panel_covariates);
}

struct EqFlags {
  std::string outcome = "cases";
  bool national = false;
  bool separate_business = false;
};

void add_eq_flags(CLI::App* cmd, EqFlags& f) {
  cmd->add_option("--outcome", f.outcome, "Outcome counts to model")
      ->check(CLI::IsMember({"cases", "deaths"}));
  cmd->add_flag("--national", f.national, "Add countrywide information terms");
  cmd->add_flag("--separate-business", f.separate_business,
                "Keep the three venue closures as separate policies");
}

EquationOptions eq_options(const Session& s, const EqFlags& f) {
  EquationOptions opt;
  opt.outcome = outcome_from_name(f.outcome);
  opt.national_info = f.national;
  opt.business_composite = !f.separate_business;
  opt.lags = s.cfg.lags;
  opt.dummies = s.cfg.dummies;
  return opt;
}

struct FittedSystem {
  SystemDesigns sd;
  Equations eq;
};

FittedSystem fit_full(const Session& s, Panel& p, const EquationOptions& opt) {
  prepare_panel(p, s.cfg.log_zero);
  FittedSystem fs;
  fs.sd = build_system(p, opt, s.cfg.window_start, s.cfg.window_end, s.cfg.log_zero);
  fs.eq = fit_system(fs.sd);
  return fs;
}

nlohmann::json fit_json(const FitResult& f) {
  nlohmann::json j;
  j["spec"] = f.spec_name;
  j["n"] = f.n;
  j["n_clusters"] = f.n_clusters;
  j["r2"] = f.r2;
  j["r2_adj"] = f.r2_adj;
  const Eigen::VectorXd se = f.se();
  nlohmann::json coefs = nlohmann::json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i)
    coefs[f.names[i]] = {{"estimate", f.beta(static_cast<int>(i))},
                         {"se", se(static_cast<int>(i))}};
  j["coefficients"] = coefs;
  return j;
}

PairedEqDraws draw_system(const Session& s, const FittedSystem& fs) {
  return paired_bootstrap(fs.sd.y, fs.sd.b, fs.sd.reduced, s.cfg.scheme, s.cfg.bootstrap_draws,
                          s.cfg.seed, s.threads);
}

int cmd_ingest(Session& s) {
  struct Field {
    const char* name;
    const std::string* value;
  };
  const Field fields[] = {{"cases_deaths", &s.cfg.data.cases_deaths},
                          {"tests", &s.cfg.data.tests},
                          {"policies", &s.cfg.data.policies},
                          {"mobility", &s.cfg.data.mobility},
                          {"covariates", &s.cfg.data.covariates}};
  for (const Field& f : fields) {
    if (f.value->empty())
      throw ConfigError(std::string("config: field 'data.") + f.name +
                        "' must name an input file");
    s.inputs.push_back(*f.value);
  }
  WarningLog warnings;
  Panel p = ingest_all(s.cfg.data, IndicatorMode::start_end, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w.file << ": " << w.message << "\n";
  const auto dir = ensure_out(s);
  p.write_csv((dir / "panel_series.csv").string(), (dir / "panel_covariates.csv").string());
  write_manifest(s);
  return 0;
}

int cmd_estimate(Session& s, const EqFlags& f) {
  Panel p = load_panel(s);
  const EquationOptions opt = eq_options(s, f);
  const FittedSystem fs = fit_full(s, p, opt);
  nlohmann::json j;
  j["y"] = fit_json(fs.eq.y);
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : fs.eq.b) bs.push_back(fit_json(b));
  j["behaviors"] = bs;
  j["reduced"] = fit_json(fs.eq.reduced);
  write_text(ensure_out(s) / "equations.json", j.dump(2) + "\n");
  write_manifest(s);
  return 0;
}

EffectTable decompose_system(const Session& s, const Panel& p, const FittedSystem& fs,
                             const PairedEqDraws& draws) {
  const Day sample_start = s.cfg.window_start + fs.sd.specs.reduced.sample_lag_days;
  const BehaviorWeights weights =
      behavior_weights(p, mobility_names(), sample_start, s.cfg.window_end);
  return decompose(fs.eq, weights, draws, fs.sd.specs.y.name);
}

int cmd_decompose(Session& s, const EqFlags& f) {
  Panel p = load_panel(s);
  const EquationOptions opt = eq_options(s, f);
  const FittedSystem fs = fit_full(s, p, opt);
  const PairedEqDraws draws = draw_system(s, fs);
  const EffectTable table = decompose_system(s, p, fs, draws);
  const auto dir = ensure_out(s);
  write_text(dir / "effects.csv", effects_to_csv(table));
  write_text(dir / "effects.json", effects_to_json(table));
  write_manifest(s);
  return 0;
}

Scenario resolve_scenario(Session& s, const std::string& name) {
  for (const Scenario& sc : builtin_scenarios())
    if (sc.name == name) return sc;
  s.inputs.push_back(name);
  return load_scenario(name);
}

int cmd_counterfactual(Session& s, const EqFlags& f, const std::vector<std::string>& args) {
  const std::vector<std::string>& names = args.empty() ? s.cfg.scenarios : args;
  if (names.empty())
    throw ConfigError("config: field 'scenarios' is empty and no --scenario was given");
  Panel p = load_panel(s);
  const EquationOptions opt = eq_options(s, f);
  const FittedSystem fs = fit_full(s, p, opt);
  const PairedEqDraws draws = draw_system(s, fs);
  const CfWiring wiring = default_wiring(opt);
  const Day sim_start = s.cfg.window_start + fs.sd.specs.reduced.sample_lag_days;
  const auto dir = ensure_out(s);
  for (const auto& name : names) {
    const Scenario sc = resolve_scenario(s, name);
    const CoefColumn column = coef_column_from_name(sc.coef_column);
    const Panel cf = apply_scenario(p, sc);
    const std::vector<RecursionCoefs> rc = recursion_coef_draws(fs.eq, draws, wiring, column);
    const TrajectoryBands tb =
        band_inference(p, cf, fs.sd.specs.reduced, wiring, rc, sim_start, s.cfg.window_end,
                       sc.national_info, 0.05, 0.95, s.threads);
    write_text(dir / (sc.name + "_trajectory.csv"), trajectory_csv(tb));
    write_text(dir / (sc.name + "_endpoint.csv"), endpoint_csv(tb));
  }
  write_manifest(s);
  return 0;
}

struct SynthFlags {
  int states = 51;
  int days = 122;
  double noise = 1.0;
  double base_growth = 0.05;
  double response_lag = 9.5;
};

int cmd_sird_synth(Session& s, const SynthFlags& f) {
  SynthConfig cfg = default_synth_config();
  cfg.n_states = f.states;
  cfg.n_days = f.days;
  cfg.noise_scale = f.noise;
  cfg.base_growth = f.base_growth;
  cfg.response_lag = f.response_lag;
  cfg.seed = s.cfg.seed;
  const SynthResult res = synth_panel(cfg, s.threads);
  write_synth_files(res, ensure_out(s).string());
  write_manifest(s);
  return 0;
}

struct DmlFlags {
  std::string target = "mask_employees";
  int folds = 5;
  double lambda = -1;
};

int cmd_dml(Session& s, const EqFlags& f, const DmlFlags& df) {
  Panel p = load_panel(s);
  const EquationOptions opt = eq_options(s, f);
  prepare_panel(p, s.cfg.log_zero);
  const ModelSpec spec = reduced_spec(opt);
  const Design d =
      build_design(p, spec, s.cfg.window_start, s.cfg.window_end, s.cfg.log_zero);
  DmlSpec ds;
  ds.target = df.target;
  for (const auto& pol : spec.term_names(Block::policy))
    if (pol != df.target) ds.linear.push_back(pol);
  ds.folds = df.folds;
  ds.lambda = df.lambda;
  const DmlResult r = dml_fit(d, ds, s.cfg.seed, s.threads);
  write_text(ensure_out(s) / "dml.json", dml_to_json(r));
  write_manifest(s);
  return 0;
}

int cmd_sensitivity(Session& s, const std::vector<int>& ids, double dml_lambda) {
  Panel p = load_panel(s);
  GridConfig gc;
  gc.window_start = s.cfg.window_start;
  gc.window_end = s.cfg.window_end;
  gc.log_zero = s.cfg.log_zero;
  gc.seed = s.cfg.seed;
  gc.threads = s.threads;
  gc.dml_lambda = dml_lambda;
  std::vector<SpecVariant> variants = standard_variants();
  if (!ids.empty()) {
    std::vector<SpecVariant> picked;
    for (const auto& v : variants)
      for (int id : ids)
        if (v.id == id) picked.push_back(v);
    variants = picked;
  }
  const GridResult grid = run_grid(p, variants, gc);
  write_text(ensure_out(s) / "whisker.csv", whisker_csv(grid));
  write_manifest(s);
  if (grid.n_failed > 0)
    std::cerr << "warning: " << grid.n_failed << " grid combinations failed; see whisker.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"State-panel estimation of policy effects on epidemic growth"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  app.add_option("--config", config_path, "Run configuration JSON");
  auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed");
  auto* out_opt = app.add_option("--out", out_dir, "Override the configured output directory");
  app.add_option("--threads", threads, "Worker threads (0 = hardware)");

  CLI::App* ingest = app.add_subcommand("ingest", "Merge raw input files into a panel");
  CLI::App* estimate = app.add_subcommand("estimate", "Fit the equation system");
  EqFlags est_flags;
  add_eq_flags(estimate, est_flags);
  CLI::App* decomp = app.add_subcommand("decompose", "Split policy effects into channels");
  EqFlags dec_flags;
  add_eq_flags(decomp, dec_flags);
  CLI::App* cf = app.add_subcommand("counterfactual", "Replay fitted dynamics under a scenario");
  EqFlags cf_flags;
  add_eq_flags(cf, cf_flags);
  std::vector<std::string> scenario_args;
  cf->add_option("--scenario", scenario_args, "Builtin scenario name or JSON path");
  CLI::App* synth = app.add_subcommand("sird-synth", "Generate an epidemic with known effects");
  SynthFlags synth_flags;
  synth->add_option("--states", synth_flags.states)->check(CLI::Range(1, 51));
  synth->add_option("--days", synth_flags.days)->check(CLI::PositiveNumber);
  synth->add_option("--noise", synth_flags.noise)->check(CLI::NonNegativeNumber);
  synth->add_option("--base-growth", synth_flags.base_growth);
  synth->add_option("--response-lag", synth_flags.response_lag);
  CLI::App* dml = app.add_subcommand("dml", "Debiased policy coefficient via lasso nuisances");
  EqFlags dml_eq_flags;
  add_eq_flags(dml, dml_eq_flags);
  DmlFlags dml_flags;
  dml->add_option("--target", dml_flags.target, "Policy term to debias");
  dml->add_option("--folds", dml_flags.folds)->check(CLI::Range(2, 50));
  dml->add_option("--lambda", dml_flags.lambda, "Pinned lasso penalty (-1 = cross-validate)");
  CLI::App* sens = app.add_subcommand("sensitivity", "Run the specification grid");
  std::vector<int> variant_ids;
  sens->add_option("--variant", variant_ids, "Restrict to these variant ids")
      ->check(CLI::Range(1, 10));
  double sens_lambda = -1;
  sens->add_option("--dml-lambda", sens_lambda, "Pinned lasso penalty for DML variants");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Session s;
    if (!config_path.empty()) {
      s.cfg = load_run_config(config_path);
      s.inputs.push_back(config_path);
    } else {
      s.cfg = run_config_defaults();
    }
    if (*seed_opt) s.cfg.seed = seed;
    if (*out_opt) s.cfg.out_dir = out_dir;
    s.threads = threads;

    if (app.got_subcommand(ingest)) return cmd_ingest(s);
    if (app.got_subcommand(estimate)) return cmd_estimate(s, est_flags);
    if (app.got_subcommand(decomp)) return cmd_decompose(s, dec_flags);
    if (app.got_subcommand(cf)) return cmd_counterfactual(s, cf_flags, scenario_args);
    if (app.got_subcommand(synth)) return cmd_sird_synth(s, synth_flags);
    if (app.got_subcommand(dml)) return cmd_dml(s, dml_eq_flags, dml_flags);
    if (app.got_subcommand(sens)) return cmd_sensitivity(s, variant_ids, sens_lambda);
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\nrun with --help for usage\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
