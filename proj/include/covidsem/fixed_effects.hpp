#pragma once

#include <string>
#include <vector>

#include "covidsem/estimator.hpp"

namespace covidsem {

struct FeFit {
  FitResult result;                   // slopes on the kept columns
  std::vector<std::string> dropped;   // columns constant within every state
  int n_groups = 0;
};

// Within estimator: state means are partialled out of y and every column,
// then OLS runs on the demeaned data. Clustered vcov counts the absorbed
// state effects in its degrees-of-freedom factor.
FeFit fit_fixed_effects(const Design& dz);

struct JackknifeResult {
  std::vector<std::string> names;
  Eigen::VectorXd beta_fe;      // full-sample within estimator
  Eigen::VectorXd beta_cross;   // stacked diagonal subpanels, doubled state effects
  Eigen::VectorXd beta_bc;      // 2*beta_fe - beta_cross
  // 1-based half-split boundaries actually used, for inspection.
  int n_states = 0, n_dates = 0, state_hi = 0, state_lo = 0, date_hi = 0, date_lo = 0;
};

// Split-sample bias correction. With N states and T dates (1-based i, t):
//   S1 = {i <= ceil(N/2), t <= ceil(T/2)} u {i >= floor(N/2)+1, t >= floor(T/2)+1}
//   S2 = {i <= ceil(N/2), t >= floor(T/2)+1} u {i >= floor(N/2)+1, t <= ceil(T/2)}
// With odd N or T the middle state/date belongs to both subpanels; rows in
// both get stacked twice. The stacked regression gives each (state, subpanel)
// pair its own effect, time columns stay shared.
JackknifeResult crossover_jackknife(const Design& dz);

}  // namespace covidsem
