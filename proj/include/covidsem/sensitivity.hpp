#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covidsem/panel.hpp"
#include "covidsem/pipeline.hpp"

namespace covidsem {

// One variation of the policy-effect regression. Extra covariate names
// prefixed log_ are derived by logging the unprefixed column when the panel
// lacks them, so raw user columns (vote shares, survey rates) stay raw.
struct SpecVariant {
  int id = 1;
  std::string label;
  std::vector<std::string> drop_states;
  std::vector<std::string> extra_covariates;
  bool add_behavior_info = false;  // lagged mobility joins the information block
  bool weekly_dummies = false;
  std::string estimator = "ols";  // ols | dml_lasso | iv | dml_random_forest
};

// The ten standard variants; iv and dml_random_forest report not_implemented.
std::vector<SpecVariant> standard_variants();

// One whisker: a policy coefficient with its 90% interval under one
// (variant, timing, outcome, info) combination. Combinations that cannot run
// produce a single policy-less cell whose status carries the reason.
struct GridCell {
  int variant = 0;
  std::string label;
  std::string timing;   // baseline | alternative
  std::string outcome;  // cases | deaths
  std::string info;     // without_national | with_national
  std::string policy;
  double estimate = 0, lo90 = 0, hi90 = 0;
  int n = 0;  // regression rows behind the estimate
  std::string status = "ok";
};

struct GridConfig {
  Day window_start = 0;  // 0 = the run-config defaults
  Day window_end = 0;
  LogZero log_zero = LogZero::drop;
  std::uint64_t seed = 0;
  int threads = 0;
  int dml_folds = 5;
  double dml_lambda = -1;  // >= 0 pins the lasso penalty, skipping CV
};

struct GridResult {
  std::vector<GridCell> cells;  // fixed enumeration order, ok or not
  int n_failed = 0;
  int n_not_implemented = 0;
};

// Every variant runs under both timings, both outcomes and both information
// sets; failures are recorded per combination, never thrown. Output is a pure
// function of (panel, variants, config): per-combination seeds derive from
// stable variant/timing/outcome/info coordinates, not enumeration position.
GridResult run_grid(const Panel& panel, const std::vector<SpecVariant>& variants,
                    const GridConfig& cfg);

// variant,timing,outcome,info,policy,estimate,lo90,hi90,status; numeric cells
// stay empty on rows without an estimate.
std::string whisker_csv(const GridResult& grid);

}  // namespace covidsem
