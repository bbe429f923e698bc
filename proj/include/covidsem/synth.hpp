#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "covidsem/ingest.hpp"
#include "covidsem/panel.hpp"

namespace covidsem {

struct SynthPolicy {
  std::string name;
  double adopt_prob = 1.0;
  Day base_start = 0;
  int jitter_days = 0;  // start is uniform on [base - j, base + j]
};

// Epidemic generator whose measurement equations hold by construction: the
// instantaneous detected-case growth rate is forced to
//   base_growth + theta'policies(t - response_lag) + alpha'behavior(t - response_lag) + noise
// via the transmission rate, so the weekly growth regression on lagged
// weekly policy/behavior averages recovers 7x the daily coefficients.
struct SynthConfig {
  int n_states = 51;
  Day start = 0;       // 0 = default 2020-02-01
  int n_days = 122;
  double dt = 0.1;
  double gamma = 0.1;
  double kappa = 0.02;
  double tau0 = 0.10;  // detection rate before the testing ramp
  double tau1 = 0.20;  // after
  double base_growth = 0.05;  // daily growth with no policies, no behavior shift

  // Daily-unit structural coefficients. The three venue-closure policies
  // share one start date per state, so the closure composite is exactly the
  // indicator the "business" entries refer to.
  std::map<std::string, double> theta_direct;       // policy -> direct growth effect
  std::map<std::string, double> alpha;              // behavior -> growth effect
  std::map<std::string, std::map<std::string, double>> behavior_response;  // behavior -> policy -> shift
  std::map<std::string, double> behavior_base;

  double noise_scale = 1.0;     // 0 = deterministic world
  double sigma_growth = 0.004;  // daily AR(1) noise in the growth forcing
  double sigma_behavior = 0.015;
  double ar_rho = 0.3;
  // Days between a policy flip and the instantaneous growth response.
  // Weekly aggregation centers the outcome ~4 days behind the regressor
  // window, so recovery is sharpest with a forcing lag near the estimation
  // lag minus 4.5 (checked against the full pipeline at zero noise).
  double response_lag = 9.5;

  std::vector<SynthPolicy> policies;
  std::uint64_t seed = 1;
  // Nonzero freezes covariates, policy schedules and testing ramps to this
  // seed while noise still follows `seed`: a fixed design for Monte Carlo
  // replication, where only the error draws should change.
  std::uint64_t design_seed = 0;
};

// Policy keys: mask_employees, closed_k12, stay_at_home, business.
SynthConfig default_synth_config();

struct SynthTruth {
  std::map<std::string, double> theta_total;   // daily; regression target is 7x this
  std::map<std::string, double> theta_direct;
  std::map<std::string, double> alpha;
  std::map<std::string, std::map<std::string, double>> behavior_response;
  double gamma = 0, kappa = 0;
  std::uint64_t seed = 0;
  double min_s_frac = 1.0;  // early-pandemic check across all states

  std::string to_json() const;
};

struct SynthResult {
  Panel panel;
  SynthTruth truth;

  // Raw records exactly as the ingest files will carry them; the panel is
  // filled by applying the readers' conversions to these values, so a write
  // + ingest round trip reproduces the panel bit for bit.
  struct CountRow {
    std::string state;
    Day date;
    long long cases, deaths, tests;
  };
  std::vector<CountRow> counts;
  struct MobilityRow {
    std::string state;
    Day date;
    double grocery, transit, retail, workplaces;  // percent changes
  };
  std::vector<MobilityRow> mobility;
  std::vector<PolicyEvent> events;
  struct CovRow {
    std::string state;
    double population, area, unemployment_rate, poverty_rate, pct_at_risk;
    bool republican;
  };
  std::vector<CovRow> covariates;
};

SynthResult synth_panel(const SynthConfig& cfg, int threads);

// cases_deaths.csv, tests.csv, policies.csv, mobility.csv, covariates.csv,
// truth.json under dir (created if needed).
void write_synth_files(const SynthResult& result, const std::string& dir);

}  // namespace covidsem
