#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "covidsem/design.hpp"
#include "covidsem/effects.hpp"
#include "covidsem/panel.hpp"

namespace covidsem {

// The growth recursion is run in contrast space: with factual residuals held
// fixed, the counterfactual log weekly count minus its factual value obeys
//   D_t = a'(X*_t - X_t) + D_{t-7} + feedback terms in lagged D,
// because subtracting the factual copy of the fitted equation cancels the
// residuals, the confounder block, and every term a scenario leaves alone.
// D is identically zero before the simulation start (conditioning on the
// factual history), so the identity scenario stays exactly zero forever.

enum class RuleKind { set_on_from, set_off_always, set_on_always, replace };

struct PolicyRule {
  std::string policy;               // indicator name without the policy_ prefix
  RuleKind kind = RuleKind::set_on_from;
  Day date = 0;                     // set_on_from / replace anchor
  std::vector<std::string> states;  // empty = every state
  std::vector<double> values;       // replace: daily values from `date`
};

struct Scenario {
  std::string name;
  std::vector<PolicyRule> rules;
  bool national_info = false;        // recompute national info from the paths
  std::string coef_column = "average";
};

std::string rule_kind_name(RuleKind k);
RuleKind rule_kind_from_name(const std::string& s);
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& sc);
Scenario load_scenario(const std::string& path);

// mask_march14, no_business, no_shelter.
std::vector<Scenario> builtin_scenarios();

// Copies the panel and rewrites the policy indicators the rules name; the
// business composite is rebuilt when present. Unknown policies or states and
// rule dates past the panel throw DataError.
Panel apply_scenario(const Panel& panel, const Scenario& sc);

// Names wiring the recursion to a reduced-form spec: which terms are
// policies, which information terms feed back on the outcome itself, and
// which are national aggregates of it.
struct CfWiring {
  std::vector<std::string> policies;
  std::string own_growth_term;                      // weekly growth of the outcome
  std::string own_level_term;                       // log weekly level
  std::vector<std::string> national_growth_terms;   // recomputed under national_info
  std::vector<std::string> national_level_terms;
  std::string cum_series = "cum_cases";
};

// One coefficient vector for the recursion; feedback coefficients always
// come from the reduced-form equation it iterates.
struct RecursionCoefs {
  Eigen::VectorXd a;  // aligned with CfWiring::policies
  double own_growth = 0;
  double own_level = 0;
  Eigen::VectorXd national_growth;
  Eigen::VectorXd national_level;
};

enum class CoefColumn { direct, indirect, total, reduced, average };
CoefColumn coef_column_from_name(const std::string& s);
std::string coef_column_name(CoefColumn c);

// Point coefficients: policies from the chosen effect-table column, feedback
// from the reduced fit. A term the fit lacks contributes zero.
RecursionCoefs recursion_coefs(const EffectTable& table, const FitResult& reduced,
                               const CfWiring& wiring, CoefColumn column);

// Per-draw coefficients from paired draws, the chosen column rebuilt from
// each replicate's equations.
std::vector<RecursionCoefs> recursion_coef_draws(const Equations& eq, const PairedEqDraws& draws,
                                                 const CfWiring& wiring, CoefColumn column);

// Contrasts of a counterfactual path against the factual one, stated-indexed
// rows, daily columns from `start`.
//   growth_change        D_t - D_{t-7}, the change in weekly growth
//   weekly_ratio         counterfactual over factual weekly counts, exp(D_t)
//   cumulative_relative  (C* - C)/C with C* accumulated week over week
struct ContrastPath {
  Day start = 0;
  int n_days = 0;
  std::vector<std::string> states;
  Eigen::MatrixXd log_contrast;
  Eigen::MatrixXd growth_change;
  Eigen::MatrixXd weekly_ratio;
  Eigen::MatrixXd cumulative_relative;
  // National contrasts from summed counts, never averaged ratios.
  Eigen::VectorXd national_weekly_ratio;
  Eigen::VectorXd national_cumulative_relative;
};

// Runs the contrast recursion over [sim_start, sim_end]. The factual panel
// supplies regressor paths, weekly counts and the cumulative seeds; `cf` is
// apply_scenario's output. Missing counts or regressor values inside the
// window throw DataError naming the state.
ContrastPath simulate_contrast(const Panel& factual, const Panel& cf, const ModelSpec& spec,
                               const CfWiring& wiring, const RecursionCoefs& coefs,
                               Day sim_start, Day sim_end, bool national_info);

struct Band {
  Eigen::MatrixXd mean, lo, hi;  // states x days
};
struct NationalBand {
  Eigen::VectorXd mean, lo, hi;
};

// Pointwise band across coefficient draws: mean and the lo/hi quantiles
// (linear-interpolation quantiles on the sorted draws).
struct TrajectoryBands {
  Day start = 0;
  int n_days = 0;
  std::vector<std::string> states;
  double lo_q = 0.05, hi_q = 0.95;
  int n_draws = 0;
  Band growth_change, weekly_ratio, cumulative_relative;
  NationalBand national_weekly_ratio, national_cumulative_relative;
};

// One recursion per draw, deterministic at any thread count.
TrajectoryBands band_inference(const Panel& factual, const Panel& cf, const ModelSpec& spec,
                               const CfWiring& wiring, const std::vector<RecursionCoefs>& draws,
                               Day sim_start, Day sim_end, bool national_info,
                               double lo_q = 0.05, double hi_q = 0.95, int threads = 0);

// Columns scope,state,date,contrast,mean,lo,hi over every date / final date.
std::string trajectory_csv(const TrajectoryBands& tb);
std::string endpoint_csv(const TrajectoryBands& tb);

}  // namespace covidsem
