#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "covidsem/counterfactual.hpp"
#include "covidsem/effects.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/pipeline.hpp"
#include "covidsem/synth.hpp"
#include "helpers.hpp"

using namespace covidsem;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const TermSpec& need_term(const ModelSpec& spec, const std::string& name) {
  const TermSpec* t = spec.find_term(name);
  REQUIRE(t != nullptr);
  return *t;
}

// Forced epidemic with exact growth forcing but noisy behavior, so the
// behavior block stays linearly independent of the policy block.
SynthResult forced_world() {
  SynthConfig cfg = default_synth_config();
  cfg.n_states = 51;
  cfg.n_days = 90;
  cfg.base_growth = 0.07;
  cfg.response_lag = 10.0;
  cfg.noise_scale = 1.0;
  cfg.sigma_growth = 0.0;
  cfg.sigma_behavior = 0.03;
  cfg.seed = 11;
  const Day d0 = parse_date("2020-02-01");
  cfg.policies = {{"closed_k12", 1.0, d0 + 32, 14},
                  {"business", 1.0, d0 + 36, 14},
                  {"stay_at_home", 1.0, d0 + 44, 14},
                  {"mask_employees", 1.0, d0 + 48, 14}};
  return synth_panel(cfg, 1);
}

}  // namespace

TEST_SUITE_BEGIN("pipeline");

TEST_CASE("structural spec lays out the canonical blocks") {
  EquationOptions opt;
  ModelSpec spec = structural_spec(opt);
  CHECK(spec.name == "cases_structural");
  CHECK(spec.outcome.source == "cum_cases");
  CHECK(spec.outcome.transform == Transform::weekly_growth);
  CHECK(spec.outcome.lag == 0);
  CHECK(spec.sample_lag_days == 14);
  CHECK(spec.dummies == Dummies::month);
  CHECK(spec.interactions == CovInteraction::month_dummies);
  CHECK(spec.static_covariates == canonical_statics());

  CHECK(spec.term_names(Block::policy) ==
        std::vector<std::string>{"mask_employees", "closed_k12", "stay_at_home", "business"});
  CHECK(spec.term_names(Block::behavior) == mobility_names());
  CHECK(spec.term_names(Block::information) ==
        std::vector<std::string>{"past_growth", "past_level"});

  for (const auto& name : spec.term_names(Block::policy)) {
    const TermSpec& t = need_term(spec, name);
    CHECK(t.transform == Transform::movavg7);
    CHECK(t.lag == 14);
  }
  CHECK(need_term(spec, "mask_employees").source == "policy_mask_employees");
  CHECK(need_term(spec, "business").source == "business_composite");
  for (const auto& name : mobility_names()) {
    const TermSpec& t = need_term(spec, name);
    CHECK(t.source == name);
    CHECK(t.transform == Transform::movavg7);
    CHECK(t.lag == 14);
  }
  CHECK(need_term(spec, "past_growth").transform == Transform::weekly_growth);
  CHECK(need_term(spec, "past_level").transform == Transform::log_weekly);
  CHECK(need_term(spec, "past_level").source == "cum_cases");

  const TermSpec& tests = need_term(spec, "test_growth");
  CHECK(tests.block == Block::confounder);
  CHECK(tests.source == "cum_tests");
  CHECK(tests.lag == 0);

  SUBCASE("deaths shift the lag and drop test growth") {
    opt.outcome = OutcomeKind::deaths;
    ModelSpec d = structural_spec(opt);
    CHECK(d.name == "deaths_structural");
    CHECK(d.outcome.source == "cum_deaths");
    CHECK(d.sample_lag_days == 21);
    CHECK(need_term(d, "mask_employees").lag == 21);
    CHECK(need_term(d, "past_level").source == "cum_deaths");
    CHECK(d.find_term("test_growth") == nullptr);
  }
  SUBCASE("alternative timing moves both lags") {
    opt.lags = alternative_timing();
    CHECK(structural_spec(opt).sample_lag_days == 7);
    opt.outcome = OutcomeKind::deaths;
    CHECK(structural_spec(opt).sample_lag_days == 24);
  }
  SUBCASE("national information rides the broadcast series") {
    opt.national_info = true;
    ModelSpec n = structural_spec(opt);
    CHECK(n.name == "cases_structural_national");
    CHECK(n.term_names(Block::information) ==
          std::vector<std::string>{"past_growth", "past_level", "national_growth",
                                   "national_level"});
    CHECK(need_term(n, "national_growth").source == "national_cases_growth");
    CHECK(need_term(n, "national_level").source == "national_cases_level");
    CHECK(need_term(n, "national_level").transform == Transform::identity);
    CHECK(need_term(n, "national_level").lag == 14);
  }
  SUBCASE("separate venue closures replace the composite") {
    opt.business_composite = false;
    ModelSpec s = structural_spec(opt);
    CHECK(s.term_names(Block::policy) ==
          std::vector<std::string>{"mask_employees", "closed_k12", "stay_at_home",
                                   "closed_movies", "closed_restaurants",
                                   "closed_nonessential"});
    CHECK(need_term(s, "closed_movies").source == "policy_closed_movies");
  }
  SUBCASE("past behavior never joins the structural form") {
    opt.past_behavior_info = true;
    CHECK(structural_spec(opt).term_names(Block::information).size() == 2);
  }
  SUBCASE("extra statics append after the canonical list") {
    opt.extra_statics = {"mask_share"};
    auto s = structural_spec(opt).static_covariates;
    REQUIRE(s.size() == canonical_statics().size() + 1);
    CHECK(s.back() == "mask_share");
  }
}

TEST_CASE("reduced spec carries no behavior block") {
  EquationOptions opt;
  ModelSpec spec = reduced_spec(opt);
  CHECK(spec.name == "cases_reduced");
  CHECK(spec.term_names(Block::behavior).empty());
  CHECK(spec.term_names(Block::policy) == structural_spec(opt).term_names(Block::policy));
  CHECK(spec.term_names(Block::information) ==
        structural_spec(opt).term_names(Block::information));
  CHECK(spec.find_term("test_growth") != nullptr);
  CHECK(spec.sample_lag_days == 14);

  SUBCASE("past behavior enters as information") {
    opt.past_behavior_info = true;
    ModelSpec r = reduced_spec(opt);
    auto info = r.term_names(Block::information);
    REQUIRE(info.size() == 2 + mobility_names().size());
    for (const auto& name : mobility_names()) {
      const TermSpec& t = need_term(r, "past_" + name);
      CHECK(t.block == Block::information);
      CHECK(t.source == name);
      CHECK(t.transform == Transform::movavg7);
      CHECK(t.lag == 14);
    }
  }
}

TEST_CASE("behavior specs are contemporaneous with log-day interactions") {
  EquationOptions opt;
  ModelSpec spec = behavior_spec("workplaces", opt);
  CHECK(spec.name == "behavior_workplaces_cases");
  CHECK(spec.outcome.source == "workplaces");
  CHECK(spec.outcome.transform == Transform::movavg7);
  CHECK(spec.outcome.lag == 0);
  CHECK(spec.dummies == Dummies::none);
  CHECK(spec.interactions == CovInteraction::logdays);
  CHECK(spec.sample_lag_days == 14);
  for (const auto& t : spec.terms) CHECK(t.lag == 0);
  CHECK(spec.term_names(Block::policy).size() == 4);
  CHECK(need_term(spec, "past_growth").source == "cum_cases");
  CHECK(spec.find_term("test_growth") == nullptr);

  opt.outcome = OutcomeKind::deaths;
  ModelSpec d = behavior_spec("transit", opt);
  CHECK(d.name == "behavior_transit_deaths");
  CHECK(d.sample_lag_days == 21);
  CHECK(need_term(d, "past_growth").source == "cum_deaths");

  CHECK_THROWS_AS(behavior_spec("parks", opt), DataError);
}

TEST_CASE("shipped spec fixtures match the builders byte for byte") {
  const std::filesystem::path dir = std::filesystem::path(COVIDSEM_SOURCE_DIR) / "specs";
  int checked = 0;
  for (bool nat : {false, true}) {
    for (OutcomeKind k : {OutcomeKind::cases, OutcomeKind::deaths}) {
      EquationOptions opt;
      opt.outcome = k;
      opt.national_info = nat;
      for (const ModelSpec& spec : {structural_spec(opt), reduced_spec(opt)}) {
        CHECK(slurp(dir / (spec.name + ".json")) == spec_to_json(spec));
        ++checked;
      }
    }
    EquationOptions opt;
    opt.national_info = nat;
    for (const auto& b : mobility_names()) {
      ModelSpec spec = behavior_spec(b, opt);
      const auto path = dir / (spec.name + ".json");
      CHECK(slurp(path) == spec_to_json(spec));
      CHECK(spec_to_json(load_spec(path.string())) == spec_to_json(spec));
      ++checked;
    }
  }
  CHECK(checked == 16);
}

TEST_CASE("system fit on a forced epidemic recovers the planted totals") {
  SynthResult sr = forced_world();
  Panel& p = sr.panel;
  prepare_panel(p, LogZero::drop);
  REQUIRE(p.has_series("business_composite"));

  EquationOptions opt;
  SystemDesigns sd = build_system(p, opt, p.start_day() + 28, p.end_day(), LogZero::drop);
  // 51 states x 48 outcome days once the 14-day sample lag is consumed.
  CHECK(sd.y.n() == 2448);
  CHECK(sd.y.n_clusters() == 51);
  CHECK(sd.reduced.n() == 2448);
  REQUIRE(sd.b.size() == mobility_names().size());
  for (const auto& db : sd.b) CHECK(db.n() == 2448);
  // terms + const + one month dummy + statics + their interactions
  CHECK(sd.y.k() == 25);
  CHECK(sd.reduced.k() == 21);
  CHECK(sd.b[0].k() == 19);
  CHECK(sd.y.col_index("population:logdays") == -1);
  CHECK(sd.b[0].col_index("population:logdays") >= 0);

  Equations eq = fit_system(sd);
  CHECK(eq.behaviors == mobility_names());
  CHECK(eq.policies == policy_term_names(true));
  CHECK(eq.information == std::vector<std::string>{"past_growth", "past_level"});
  CHECK(eq.y.spec_name == "cases_structural");
  CHECK(eq.y.r2 > 0.99);

  BehaviorWeights weights =
      behavior_weights(p, mobility_names(), p.start_day() + 42, p.end_day());
  PairedEqDraws draws =
      paired_bootstrap(sd.y, sd.b, sd.reduced, BootScheme::multiplier_cluster, 40, 99, 1);
  EffectTable table = decompose(eq, weights, draws, sd.specs.y.name);

  for (const auto& pol : eq.policies) {
    const double target = 7.0 * sr.truth.theta_total.at(pol);
    const EffectRow* row = table.find(pol);
    REQUIRE(row != nullptr);
    CHECK(std::fabs(eq.reduced.coef(pol) - target) < 0.10 * std::fabs(target));
    CHECK(std::fabs(row->total.est - target) < 0.10 * std::fabs(target));
    CHECK(std::fabs(row->average.est - target) < 0.10 * std::fabs(target));
  }
  // Masks move nothing through behavior here, so even the direct piece is clean.
  const double mask_direct = 7.0 * sr.truth.theta_direct.at("mask_employees");
  CHECK(std::fabs(eq.y.coef("mask_employees") - mask_direct) < 0.10 * std::fabs(mask_direct));

  // Per-equation policy response, summed to wash out adoption-date overlap.
  for (std::size_t k = 0; k < eq.behaviors.size(); ++k) {
    double est = 0, truth = 0;
    for (const auto& pol : eq.policies) {
      est += eq.b[k].coef(pol);
      auto it = sr.truth.behavior_response.find(eq.behaviors[k]);
      if (it != sr.truth.behavior_response.end()) {
        auto jt = it->second.find(pol);
        if (jt != it->second.end()) truth += jt->second;
      }
    }
    CHECK(std::fabs(est - truth) < 0.20 * std::fabs(truth));
  }

  CfWiring wiring = default_wiring(opt);
  CHECK(wiring.cum_series == "cum_cases");
  CHECK(wiring.policies == eq.policies);
  CHECK(wiring.national_growth_terms.empty());
  RecursionCoefs rc = recursion_coefs(table, eq.reduced, wiring, CoefColumn::average);
  for (std::size_t j = 0; j < wiring.policies.size(); ++j)
    CHECK(rc.a(static_cast<int>(j)) == table.find(wiring.policies[j])->average.est);
  CHECK(rc.own_growth == eq.reduced.coef("past_growth"));
  CHECK(rc.own_level == eq.reduced.coef("past_level"));
}

TEST_CASE("national option threads through specs, designs and wiring") {
  SynthResult sr = forced_world();
  Panel& p = sr.panel;
  prepare_panel(p, LogZero::drop);
  REQUIRE(p.has_series("national_cases_growth"));

  EquationOptions opt;
  opt.national_info = true;
  SystemSpecs specs = system_specs(opt);
  CHECK(specs.y.name == "cases_structural_national");
  CHECK(specs.reduced.name == "cases_reduced_national");
  REQUIRE(specs.b.size() == 4);
  CHECK(specs.b[0].name == "behavior_workplaces_cases_national");

  Design dr = build_design(p, specs.reduced, p.start_day() + 28, p.end_day(), LogZero::drop);
  CHECK(dr.need_col("national_growth") >= 0);
  CHECK(dr.need_col("national_level") >= 0);

  CfWiring w = default_wiring(opt);
  CHECK(w.national_growth_terms == std::vector<std::string>{"national_growth"});
  CHECK(w.national_level_terms == std::vector<std::string>{"national_level"});

  opt.outcome = OutcomeKind::deaths;
  CHECK(default_wiring(opt).cum_series == "cum_deaths");
}

TEST_CASE("prepare_panel derives series once and only when sources exist") {
  SynthResult sr = forced_world();
  Panel& p = sr.panel;
  prepare_panel(p, LogZero::drop);
  const auto names = p.series_names();
  prepare_panel(p, LogZero::drop);
  CHECK(p.series_names() == names);
  CHECK(p.has_series("business_composite"));
  CHECK(p.has_series("national_cases_level"));
  CHECK(p.has_series("national_deaths_growth"));

  Panel bare({"GA", "ME"}, parse_date("2020-03-01"), 20);
  auto& c = bare.add_series("cum_cases");
  for (int s = 0; s < 2; ++s)
    for (int j = 0; j < 20; ++j) c(s, j) = 10.0 * (s + 1) * (j + 1);
  prepare_panel(bare, LogZero::drop);
  CHECK(bare.has_series("national_cases_level"));
  CHECK_FALSE(bare.has_series("business_composite"));
  CHECK_FALSE(bare.has_series("national_deaths_level"));
}

TEST_CASE("run config defaults and round trip") {
  RunConfig def = run_config_defaults();
  CHECK(def.window_start == parse_date("2020-03-07"));
  CHECK(def.window_end == parse_date("2020-06-03"));
  CHECK(def.lags.case_lag == 14);
  CHECK(def.lags.death_lag == 21);
  CHECK(def.bootstrap_draws == 200);
  CHECK(def.scheme == BootScheme::multiplier_cluster);
  CHECK(def.out_dir == "out");

  RunConfig empty = run_config_from_json("{}");
  CHECK(run_config_to_json(empty) == run_config_to_json(def));

  const std::string text = R"({
    "data": {"cases_deaths": "cd.csv", "tests": "t.csv", "policies": "p.csv",
             "mobility": "m.csv", "covariates": "c.csv"},
    "panel_series": "series.csv",
    "panel_covariates": "cov.csv",
    "lags": {"case": 7, "death": 24},
    "window_start": "2020-03-01",
    "window_end": "2020-05-15",
    "dummies": "week",
    "log_zero": "floor_minus_one",
    "bootstrap_draws": 64,
    "scheme": "pairs_cluster",
    "seed": 42,
    "scenarios": ["mask_march14", "plans/custom.json"],
    "out_dir": "run1"
  })";
  RunConfig cfg = run_config_from_json(text);
  CHECK(cfg.data.tests == "t.csv");
  CHECK(cfg.panel_series == "series.csv");
  CHECK(cfg.lags.case_lag == 7);
  CHECK(cfg.lags.death_lag == 24);
  CHECK(cfg.window_start == parse_date("2020-03-01"));
  CHECK(cfg.dummies == Dummies::week);
  CHECK(cfg.log_zero == LogZero::floor_minus_one);
  CHECK(cfg.bootstrap_draws == 64);
  CHECK(cfg.scheme == BootScheme::pairs_cluster);
  CHECK(cfg.seed == 42);
  CHECK(cfg.scenarios == std::vector<std::string>{"mask_march14", "plans/custom.json"});
  CHECK(cfg.out_dir == "run1");

  // Serialization is a fixed point, so configs survive save/load cycles.
  const std::string once = run_config_to_json(cfg);
  CHECK(run_config_to_json(run_config_from_json(once)) == once);

  auto dir = testutil::temp_dir("pipeline_config");
  testutil::write_file(dir / "run.json", once);
  CHECK(run_config_to_json(load_run_config((dir / "run.json").string())) == once);
  CHECK_THROWS_WITH_AS(load_run_config((dir / "absent.json").string()),
                       doctest::Contains("cannot open"), ConfigError);
}

TEST_CASE("run config rejects schema violations with field paths") {
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"lag\": 3}"),
                       "config: unknown field 'lag'", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"lags\": {\"case\": \"x\"}}"),
                       "config: field 'lags.case' must be an integer", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"lags\": {\"weeks\": 2}}"),
                       "config: unknown field 'lags.weeks'", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"lags\": {\"case\": -1}}"),
                       "config: field 'lags.case' must be nonnegative", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"window_start\": \"03/07/2020\"}"),
                       "config: field 'window_start' must be a YYYY-MM-DD date", ConfigError);
  CHECK_THROWS_WITH_AS(
      run_config_from_json("{\"window_start\": \"2020-05-01\", \"window_end\": \"2020-04-01\"}"),
      "config: field 'window_end' must not precede window_start", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"scenarios\": \"x\"}"),
                       "config: field 'scenarios' must be an array of strings", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"scenarios\": [\"a\", 3]}"),
                       "config: field 'scenarios[1]' must be a string", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"bootstrap_draws\": 0}"),
                       "config: field 'bootstrap_draws' must be positive", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"seed\": -1}"),
                       "config: field 'seed' must be nonnegative", ConfigError);
  CHECK_THROWS_WITH_AS(
      run_config_from_json("{\"scheme\": \"jackknife\"}"),
      "config: field 'scheme' must be one of pairs_cluster, multiplier_cluster, "
      "gaussian_asymptotic",
      ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{\"dummies\": \"day\"}"),
                       "config: field 'dummies' must be one of month, week, none", ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("[]"), "config: top level must be an object",
                       ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json("{"), doctest::Contains("not valid JSON"),
                       ConfigError);
  // ConfigError stays a DataError so library callers need no extra handler.
  CHECK_THROWS_AS(run_config_from_json("[]"), DataError);
}

TEST_CASE("manifest isolates the timestamp to its first line") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);

  auto dir = testutil::temp_dir("pipeline_manifest");
  testutil::write_file(dir / "a.csv", "a");
  testutil::write_file(dir / "b.csv", "state,date\nGA,2020-03-01\n");
  CHECK(file_digest((dir / "a.csv").string()) == "fnv1a:af63dc4c8601ec8c");
  CHECK_THROWS_AS(file_digest((dir / "missing.csv").string()), DataError);

  const std::vector<std::string> inputs = {(dir / "a.csv").string(), (dir / "b.csv").string()};
  const std::string m1 = manifest_text("{}", inputs, 7, "2026-01-01T00:00:00Z");
  const std::string m2 = manifest_text("{}", inputs, 7, "2026-01-02T12:34:56Z");
  auto lines = [](const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
  };
  auto l1 = lines(m1), l2 = lines(m2);
  REQUIRE(l1.size() == 5);
  REQUIRE(l2.size() == 5);
  CHECK(l1[0] != l2[0]);
  CHECK(l1[0] == "generated_at: 2026-01-01T00:00:00Z");
  for (std::size_t i = 1; i < l1.size(); ++i) CHECK(l1[i] == l2[i]);
  CHECK(l1[2] == "seed: 7");

  // An input edit moves exactly that input's digest line.
  testutil::write_file(dir / "b.csv", "state,date\nGA,2020-03-02\n");
  auto l3 = lines(manifest_text("{}", inputs, 7, "2026-01-01T00:00:00Z"));
  CHECK(l3[3] == l1[3]);
  CHECK(l3[4] != l1[4]);

  const std::string stamp = iso_timestamp_utc();
  CHECK(stamp.size() == 20);
  CHECK(stamp[4] == '-');
  CHECK(stamp[10] == 'T');
  CHECK(stamp.back() == 'Z');
}

TEST_SUITE_END();
