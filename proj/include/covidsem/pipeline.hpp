#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covidsem/counterfactual.hpp"
#include "covidsem/design.hpp"
#include "covidsem/effects.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/ingest.hpp"
#include "covidsem/model_spec.hpp"
#include "covidsem/panel.hpp"

namespace covidsem {

// Days between exposure and the outcome showing up in the counts.
struct LagConfig {
  int case_lag = 14;
  int death_lag = 21;
  static constexpr int week = 7;
};
LagConfig baseline_timing();     // 14 / 21
LagConfig alternative_timing();  // 7 / 24

enum class OutcomeKind { cases, deaths };
std::string outcome_name(OutcomeKind k);
OutcomeKind outcome_from_name(const std::string& s);

// Everything that pins down one equation family.
struct EquationOptions {
  OutcomeKind outcome = OutcomeKind::cases;
  bool national_info = false;      // add countrywide level/growth information terms
  bool business_composite = true;  // false: the three venue closures enter separately
  LagConfig lags;
  Dummies dummies = Dummies::month;
  std::vector<std::string> extra_statics;  // appended to the static covariate list
  // Mobility at the outcome lag joins the information block of the reduced
  // form only; the structural form already carries it as behavior.
  bool past_behavior_info = false;
};

// Mobility outcomes, fixed order.
const std::vector<std::string>& mobility_names();
// Policy term names: composite folds the three venue closures into one.
std::vector<std::string> policy_term_names(bool business_composite);
// Static covariates every canonical equation conditions on.
const std::vector<std::string>& canonical_statics();

// Outcome growth on policies, behavior, information and confounders, with
// every non-confounder regressor at the outcome lag, month dummies and
// month-interacted statics. Case equations add contemporaneous test growth.
ModelSpec structural_spec(const EquationOptions& opt);
// The same without the behavior block: the total-effect equation.
ModelSpec reduced_spec(const EquationOptions& opt);
// One mobility outcome on contemporaneous policies and information with
// log-days interactions; the sample still starts at the outcome lag.
ModelSpec behavior_spec(const std::string& behavior, const EquationOptions& opt);

// Adds business_composite and the national information series the canonical
// specs reference; present series are left alone.
void prepare_panel(Panel& p, LogZero lz);

struct SystemSpecs {
  ModelSpec y;
  std::vector<ModelSpec> b;
  ModelSpec reduced;
};
SystemSpecs system_specs(const EquationOptions& opt);

struct SystemDesigns {
  SystemSpecs specs;
  Design y;
  std::vector<Design> b;  // index-paired with specs.b
  Design reduced;
};
// The panel must already hold the derived series; see prepare_panel.
SystemDesigns build_system(const Panel& p, const EquationOptions& opt, Day window_start,
                           Day window_end, LogZero lz);

Equations fit_system(const SystemDesigns& sd);

// Recursion wiring matching the canonical reduced equation.
CfWiring default_wiring(const EquationOptions& opt);

// Schema problem in a config file. The CLI reports these as usage errors
// (exit 1) with the offending field path, unlike malformed data (exit 2).
struct ConfigError : DataError {
  explicit ConfigError(const std::string& msg) : DataError(msg) {}
};

struct RunConfig {
  IngestPaths data;             // raw inputs for `ingest`
  std::string panel_series;     // preprocessed panel for everything else
  std::string panel_covariates;
  LagConfig lags;
  Day window_start = 0;  // defaults set in run_config_defaults()
  Day window_end = 0;
  Dummies dummies = Dummies::month;
  LogZero log_zero = LogZero::drop;
  int bootstrap_draws = 200;
  BootScheme scheme = BootScheme::multiplier_cluster;
  std::uint64_t seed = 0;
  std::vector<std::string> scenarios;  // builtin names or JSON paths
  std::string out_dir = "out";
};

RunConfig run_config_defaults();
// Strict parse: unknown fields, wrong types and bad values raise ConfigError
// naming the field path (e.g. "config: field 'lags.case' must be an integer").
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

// 64-bit FNV-1a, the digest used in manifests.
std::uint64_t fnv1a64(const std::string& bytes);
std::string file_digest(const std::string& path);  // "fnv1a:<16 hex digits>"
std::string iso_timestamp_utc();

// First line carries the timestamp and nothing else; every other line is a
// pure function of the inputs, so reruns diff on exactly one line.
std::string manifest_text(const std::string& config_text,
                          const std::vector<std::string>& input_files, std::uint64_t seed,
                          const std::string& timestamp);

}  // namespace covidsem
