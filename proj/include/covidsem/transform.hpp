#pragma once

#include <Eigen/Dense>
#include <string>

#include "covidsem/panel.hpp"

namespace covidsem {

// All operators are elementwise over one state's daily series; NaN is
// missing and propagates. Outputs have the same length as inputs.

using Series = Eigen::ArrayXd;

Series lag_series(const Series& x, int k);
// x[t] - x[t-7]; first 7 slots missing.
Series weekly_diff(const Series& x);
// Sum over [t-6, t]; missing when any day in the window is missing.
Series rolling_sum7(const Series& x);
// Mean over [t-6, t]; missing when any day in the window is missing.
Series movavg7(const Series& x);

enum class LogZero {
  drop,            // log of a nonpositive value is missing
  floor_minus_one  // log of a nonpositive value is -1
};

Series log_series(const Series& x, LogZero policy);
// log x[t] - log x[t-7] under the same nonpositive handling.
Series weekly_log_diff(const Series& x, LogZero policy);

// Mean of the three closure indicators, written as business_composite.
void add_business_composite(Panel& panel);

// Country-wide weekly count = sum of state weekly counts (states with a
// missing value are skipped; all-missing days stay missing). Respecting that
// count c(t), adds broadcast series <prefix>_level = log c and
// <prefix>_growth = log c(t) - log c(t-7).
void add_national_info(Panel& panel, const std::string& cum_series,
                       const std::string& prefix, LogZero policy);

}  // namespace covidsem
