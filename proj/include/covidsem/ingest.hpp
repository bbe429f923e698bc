#pragma once

#include <optional>
#include <string>
#include <vector>

#include "covidsem/panel.hpp"

namespace covidsem {

// 50 states plus DC, the only codes accepted by the readers.
const std::vector<std::string>& state_codes();
bool is_state_code(const std::string& code);

struct IngestWarning {
  std::string file;
  std::string message;
};

using WarningLog = std::vector<IngestWarning>;

// One (state, policy) activation window. Missing end means still active.
struct PolicyEvent {
  std::string state;
  std::string policy;
  Day start = 0;
  std::optional<Day> end;
};

enum class IndicatorMode { start_only, start_end };

// Statewide mandate names used by the canonical model specs. policies.csv
// may introduce additional names; they become policy_<name> series too.
const std::vector<std::string>& core_policies();

// Series: cum_cases, cum_deaths. Dips in cumulative counts are warnings.
Panel load_cases_deaths(const std::string& path, WarningLog* warnings);
// Series: cum_tests.
Panel load_tests(const std::string& path, WarningLog* warnings);
// Series: grocery, transit, retail, workplaces. File holds percent changes
// from baseline; panel values are fractions (percent / 100).
Panel load_mobility(const std::string& path, WarningLog* warnings);

std::vector<PolicyEvent> load_policies(const std::string& path);

// Numeric columns verbatim; governor_party becomes 0/1 governor_republican.
// Unknown extra columns load as-is.
Covariates load_covariates(const std::string& path, const std::vector<std::string>& states);

// Daily 0/1 series policy_<name> for every policy present in events.
// start_only ignores end dates: once on, a policy stays on.
void add_policy_indicators(Panel& panel, const std::vector<PolicyEvent>& events,
                           IndicatorMode mode);

struct IngestPaths {
  std::string cases_deaths;
  std::string tests;
  std::string policies;
  std::string mobility;
  std::string covariates;
};

// Full intake: load, merge (union of dates, intersection of states), attach
// covariates, expand policy indicators over the merged date range.
Panel ingest_all(const IngestPaths& paths, IndicatorMode mode, WarningLog* warnings);

}  // namespace covidsem
