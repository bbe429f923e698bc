#include "covidsem/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <utility>

#include "covidsem/date.hpp"
#include "covidsem/estimator.hpp"
#include "covidsem/transform.hpp"

namespace covidsem {

namespace {

using nlohmann::json;

TermSpec term(std::string name, std::string source, Transform t, int lag, Block b) {
  TermSpec ts;
  ts.name = std::move(name);
  ts.source = std::move(source);
  ts.transform = t;
  ts.lag = lag;
  ts.block = b;
  return ts;
}

int outcome_lag(const EquationOptions& opt) {
  return opt.outcome == OutcomeKind::cases ? opt.lags.case_lag : opt.lags.death_lag;
}

std::string cum_source(OutcomeKind k) {
  return k == OutcomeKind::cases ? "cum_cases" : "cum_deaths";
}

std::string national_prefix(OutcomeKind k) {
  return k == OutcomeKind::cases ? "national_cases" : "national_deaths";
}

void append_policies(std::vector<TermSpec>& terms, bool composite, int lag) {
  for (const auto& name : policy_term_names(composite)) {
    const std::string source = name == "business" ? "business_composite" : "policy_" + name;
    terms.push_back(term(name, source, Transform::movavg7, lag, Block::policy));
  }
}

void append_information(std::vector<TermSpec>& terms, const EquationOptions& opt, int lag) {
  const std::string cum = cum_source(opt.outcome);
  terms.push_back(term("past_growth", cum, Transform::weekly_growth, lag, Block::information));
  terms.push_back(term("past_level", cum, Transform::log_weekly, lag, Block::information));
  if (opt.national_info) {
    const std::string prefix = national_prefix(opt.outcome);
    terms.push_back(
        term("national_growth", prefix + "_growth", Transform::identity, lag, Block::information));
    terms.push_back(
        term("national_level", prefix + "_level", Transform::identity, lag, Block::information));
  }
}

void append_test_growth(std::vector<TermSpec>& terms, const EquationOptions& opt) {
  if (opt.outcome == OutcomeKind::cases)
    terms.push_back(
        term("test_growth", "cum_tests", Transform::weekly_growth, 0, Block::confounder));
}

std::vector<std::string> statics_for(const EquationOptions& opt) {
  auto s = canonical_statics();
  s.insert(s.end(), opt.extra_statics.begin(), opt.extra_statics.end());
  return s;
}

ModelSpec outcome_shell(const EquationOptions& opt, const std::string& kind) {
  ModelSpec spec;
  spec.name = outcome_name(opt.outcome) + "_" + kind;
  if (opt.national_info) spec.name += "_national";
  spec.outcome =
      term("growth", cum_source(opt.outcome), Transform::weekly_growth, 0, Block::confounder);
  spec.static_covariates = statics_for(opt);
  spec.dummies = opt.dummies;
  spec.interactions = CovInteraction::month_dummies;
  spec.sample_lag_days = outcome_lag(opt);
  return spec;
}

}  // namespace

LagConfig baseline_timing() { return LagConfig{}; }

LagConfig alternative_timing() {
  LagConfig lags;
  lags.case_lag = 7;
  lags.death_lag = 24;
  return lags;
}

std::string outcome_name(OutcomeKind k) { return k == OutcomeKind::cases ? "cases" : "deaths"; }

OutcomeKind outcome_from_name(const std::string& s) {
  if (s == "cases") return OutcomeKind::cases;
  if (s == "deaths") return OutcomeKind::deaths;
  throw DataError("unknown outcome '" + s + "'");
}

const std::vector<std::string>& mobility_names() {
  static const std::vector<std::string> names = {"workplaces", "retail", "grocery", "transit"};
  return names;
}

std::vector<std::string> policy_term_names(bool business_composite) {
  std::vector<std::string> names = {"mask_employees", "closed_k12", "stay_at_home"};
  if (business_composite) {
    names.push_back("business");
  } else {
    names.push_back("closed_movies");
    names.push_back("closed_restaurants");
    names.push_back("closed_nonessential");
  }
  return names;
}

const std::vector<std::string>& canonical_statics() {
  static const std::vector<std::string> names = {"population",   "area",
                                                 "unemployment_rate", "poverty_rate",
                                                 "pct_at_risk",  "governor_republican"};
  return names;
}

ModelSpec structural_spec(const EquationOptions& opt) {
  ModelSpec spec = outcome_shell(opt, "structural");
  const int lag = outcome_lag(opt);
  append_policies(spec.terms, opt.business_composite, lag);
  for (const auto& name : mobility_names())
    spec.terms.push_back(term(name, name, Transform::movavg7, lag, Block::behavior));
  append_information(spec.terms, opt, lag);
  append_test_growth(spec.terms, opt);
  spec.validate();
  return spec;
}

ModelSpec reduced_spec(const EquationOptions& opt) {
  ModelSpec spec = outcome_shell(opt, "reduced");
  const int lag = outcome_lag(opt);
  append_policies(spec.terms, opt.business_composite, lag);
  append_information(spec.terms, opt, lag);
  if (opt.past_behavior_info)
    for (const auto& name : mobility_names())
      spec.terms.push_back(term("past_" + name, name, Transform::movavg7, lag, Block::information));
  append_test_growth(spec.terms, opt);
  spec.validate();
  return spec;
}

ModelSpec behavior_spec(const std::string& behavior, const EquationOptions& opt) {
  const auto& known = mobility_names();
  if (std::find(known.begin(), known.end(), behavior) == known.end())
    throw DataError("unknown behavior series '" + behavior + "'");
  ModelSpec spec;
  spec.name = "behavior_" + behavior + "_" + outcome_name(opt.outcome);
  if (opt.national_info) spec.name += "_national";
  spec.outcome = term("level", behavior, Transform::movavg7, 0, Block::confounder);
  append_policies(spec.terms, opt.business_composite, 0);
  append_information(spec.terms, opt, 0);
  spec.static_covariates = statics_for(opt);
  spec.dummies = Dummies::none;
  spec.interactions = CovInteraction::logdays;
  spec.sample_lag_days = outcome_lag(opt);
  spec.validate();
  return spec;
}

void prepare_panel(Panel& p, LogZero lz) {
  const bool closures = p.has_series("policy_closed_movies") &&
                        p.has_series("policy_closed_restaurants") &&
                        p.has_series("policy_closed_nonessential");
  if (closures && !p.has_series("business_composite")) add_business_composite(p);
  if (p.has_series("cum_cases") && !p.has_series("national_cases_level"))
    add_national_info(p, "cum_cases", "national_cases", lz);
  if (p.has_series("cum_deaths") && !p.has_series("national_deaths_level"))
    add_national_info(p, "cum_deaths", "national_deaths", lz);
}

SystemSpecs system_specs(const EquationOptions& opt) {
  SystemSpecs s;
  s.y = structural_spec(opt);
  for (const auto& name : mobility_names()) s.b.push_back(behavior_spec(name, opt));
  s.reduced = reduced_spec(opt);
  return s;
}

SystemDesigns build_system(const Panel& p, const EquationOptions& opt, Day window_start,
                           Day window_end, LogZero lz) {
  SystemDesigns sd;
  sd.specs = system_specs(opt);
  sd.y = build_design(p, sd.specs.y, window_start, window_end, lz);
  sd.b.reserve(sd.specs.b.size());
  for (const auto& spec : sd.specs.b)
    sd.b.push_back(build_design(p, spec, window_start, window_end, lz));
  sd.reduced = build_design(p, sd.specs.reduced, window_start, window_end, lz);
  return sd;
}

Equations fit_system(const SystemDesigns& sd) {
  Equations eq;
  eq.y = fit_cluster_ols(sd.y, sd.specs.y.name);
  eq.behaviors = sd.specs.y.term_names(Block::behavior);
  if (eq.behaviors.size() != sd.b.size())
    throw DataError("behavior designs do not match the outcome equation's behavior terms");
  eq.b.reserve(sd.b.size());
  for (std::size_t i = 0; i < sd.b.size(); ++i)
    eq.b.push_back(fit_cluster_ols(sd.b[i], sd.specs.b[i].name));
  eq.reduced = fit_cluster_ols(sd.reduced, sd.specs.reduced.name);
  eq.policies = sd.specs.y.term_names(Block::policy);
  eq.information = sd.specs.y.term_names(Block::information);
  return eq;
}

CfWiring default_wiring(const EquationOptions& opt) {
  CfWiring w;
  w.policies = policy_term_names(opt.business_composite);
  w.own_growth_term = "past_growth";
  w.own_level_term = "past_level";
  if (opt.national_info) {
    w.national_growth_terms = {"national_growth"};
    w.national_level_terms = {"national_level"};
  }
  w.cum_series = cum_source(opt.outcome);
  return w;
}

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ConfigError("config: field '" + path + "' " + what);
}

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) known = true;
    if (!known) throw ConfigError("config: unknown field '" + prefix + item.key() + "'");
  }
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) field_error(path, "must be a string");
  return j.get<std::string>();
}

int as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) field_error(path, "must be an integer");
  return j.get<int>();
}

std::uint64_t as_seed(const json& j, const std::string& path) {
  if (!j.is_number_integer()) field_error(path, "must be an integer");
  if (!j.is_number_unsigned() && j.get<std::int64_t>() < 0) field_error(path, "must be nonnegative");
  return j.get<std::uint64_t>();
}

Day as_date(const json& j, const std::string& path) {
  const std::string s = as_string(j, path);
  try {
    return parse_date(s);
  } catch (const DataError&) {
    field_error(path, "must be a YYYY-MM-DD date");
  }
}

Dummies dummies_from(const std::string& s, const std::string& path) {
  if (s == "month") return Dummies::month;
  if (s == "week") return Dummies::week;
  if (s == "none") return Dummies::none;
  field_error(path, "must be one of month, week, none");
}

std::string dummies_name(Dummies d) {
  switch (d) {
    case Dummies::month: return "month";
    case Dummies::week: return "week";
    default: return "none";
  }
}

LogZero log_zero_from(const std::string& s, const std::string& path) {
  if (s == "drop") return LogZero::drop;
  if (s == "floor_minus_one") return LogZero::floor_minus_one;
  field_error(path, "must be one of drop, floor_minus_one");
}

std::string log_zero_name(LogZero lz) {
  return lz == LogZero::drop ? "drop" : "floor_minus_one";
}

void read_path_field(const json& obj, const char* key, const std::string& prefix,
                     std::string& out) {
  if (obj.contains(key)) out = as_string(obj.at(key), prefix + key);
}

std::string hex_digest(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

RunConfig run_config_defaults() {
  RunConfig cfg;
  cfg.window_start = parse_date("2020-03-07");
  cfg.window_end = parse_date("2020-06-03");
  return cfg;
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j, "",
             {"data", "panel_series", "panel_covariates", "lags", "window_start", "window_end",
              "dummies", "log_zero", "bootstrap_draws", "scheme", "seed", "scenarios", "out_dir"});

  RunConfig cfg = run_config_defaults();
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (!d.is_object()) field_error("data", "must be an object");
    check_keys(d, "data.", {"cases_deaths", "tests", "policies", "mobility", "covariates"});
    read_path_field(d, "cases_deaths", "data.", cfg.data.cases_deaths);
    read_path_field(d, "tests", "data.", cfg.data.tests);
    read_path_field(d, "policies", "data.", cfg.data.policies);
    read_path_field(d, "mobility", "data.", cfg.data.mobility);
    read_path_field(d, "covariates", "data.", cfg.data.covariates);
  }
  if (j.contains("panel_series")) cfg.panel_series = as_string(j.at("panel_series"), "panel_series");
  if (j.contains("panel_covariates"))
    cfg.panel_covariates = as_string(j.at("panel_covariates"), "panel_covariates");
  if (j.contains("lags")) {
    const json& l = j.at("lags");
    if (!l.is_object()) field_error("lags", "must be an object");
    check_keys(l, "lags.", {"case", "death"});
    if (l.contains("case")) cfg.lags.case_lag = as_int(l.at("case"), "lags.case");
    if (l.contains("death")) cfg.lags.death_lag = as_int(l.at("death"), "lags.death");
    if (cfg.lags.case_lag < 0) field_error("lags.case", "must be nonnegative");
    if (cfg.lags.death_lag < 0) field_error("lags.death", "must be nonnegative");
  }
  if (j.contains("window_start")) cfg.window_start = as_date(j.at("window_start"), "window_start");
  if (j.contains("window_end")) cfg.window_end = as_date(j.at("window_end"), "window_end");
  if (cfg.window_end < cfg.window_start) field_error("window_end", "must not precede window_start");
  if (j.contains("dummies"))
    cfg.dummies = dummies_from(as_string(j.at("dummies"), "dummies"), "dummies");
  if (j.contains("log_zero"))
    cfg.log_zero = log_zero_from(as_string(j.at("log_zero"), "log_zero"), "log_zero");
  if (j.contains("bootstrap_draws")) {
    cfg.bootstrap_draws = as_int(j.at("bootstrap_draws"), "bootstrap_draws");
    if (cfg.bootstrap_draws < 1) field_error("bootstrap_draws", "must be positive");
  }
  if (j.contains("scheme")) {
    const std::string s = as_string(j.at("scheme"), "scheme");
    try {
      cfg.scheme = boot_scheme_from_name(s);
    } catch (const DataError&) {
      field_error("scheme", "must be one of pairs_cluster, multiplier_cluster, gaussian_asymptotic");
    }
  }
  if (j.contains("seed")) cfg.seed = as_seed(j.at("seed"), "seed");
  if (j.contains("scenarios")) {
    const json& a = j.at("scenarios");
    if (!a.is_array()) field_error("scenarios", "must be an array of strings");
    for (std::size_t i = 0; i < a.size(); ++i)
      cfg.scenarios.push_back(
          as_string(a.at(i), "scenarios[" + std::to_string(i) + "]"));
  }
  if (j.contains("out_dir")) {
    cfg.out_dir = as_string(j.at("out_dir"), "out_dir");
    if (cfg.out_dir.empty()) field_error("out_dir", "must not be empty");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["data"] = {{"cases_deaths", cfg.data.cases_deaths},
               {"tests", cfg.data.tests},
               {"policies", cfg.data.policies},
               {"mobility", cfg.data.mobility},
               {"covariates", cfg.data.covariates}};
  j["panel_series"] = cfg.panel_series;
  j["panel_covariates"] = cfg.panel_covariates;
  j["lags"] = {{"case", cfg.lags.case_lag}, {"death", cfg.lags.death_lag}};
  j["window_start"] = format_date(cfg.window_start);
  j["window_end"] = format_date(cfg.window_end);
  j["dummies"] = dummies_name(cfg.dummies);
  j["log_zero"] = log_zero_name(cfg.log_zero);
  j["bootstrap_draws"] = cfg.bootstrap_draws;
  j["scheme"] = boot_scheme_name(cfg.scheme);
  j["seed"] = cfg.seed;
  j["scenarios"] = cfg.scenarios;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2) + "\n";
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for digest");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex_digest(fnv1a64(ss.str()));
}

std::string iso_timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string manifest_text(const std::string& config_text,
                          const std::vector<std::string>& input_files, std::uint64_t seed,
                          const std::string& timestamp) {
  std::ostringstream out;
  out << "generated_at: " << timestamp << "\n";
  out << "config_digest: " << hex_digest(fnv1a64(config_text)) << "\n";
  out << "seed: " << seed << "\n";
  for (const auto& f : input_files) out << "input: " << f << " " << file_digest(f) << "\n";
  return out.str();
}

}  // namespace covidsem
