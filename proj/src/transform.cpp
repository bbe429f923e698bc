#include "covidsem/transform.hpp"

#include <cmath>
#include <limits>

#include "covidsem/errors.hpp"

namespace covidsem {

static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Series lag_series(const Series& x, int k) {
  Series out = Series::Constant(x.size(), kNaN);
  if (k < 0) throw DataError("negative lag");
  for (Eigen::Index t = k; t < x.size(); ++t) out[t] = x[t - k];
  return out;
}

Series weekly_diff(const Series& x) {
  Series out = Series::Constant(x.size(), kNaN);
  for (Eigen::Index t = 7; t < x.size(); ++t) out[t] = x[t] - x[t - 7];
  return out;
}

Series rolling_sum7(const Series& x) {
  Series out = Series::Constant(x.size(), kNaN);
  for (Eigen::Index t = 6; t < x.size(); ++t) {
    double s = 0;
    for (int d = 0; d < 7; ++d) s += x[t - d];
    out[t] = s;  // NaN in the window propagates through the sum
  }
  return out;
}

Series movavg7(const Series& x) {
  Series out = rolling_sum7(x);
  return out / 7.0;
}

static double log_or_policy(double v, LogZero policy) {
  if (std::isnan(v)) return kNaN;
  if (v > 0) return std::log(v);
  return policy == LogZero::floor_minus_one ? -1.0 : kNaN;
}

Series log_series(const Series& x, LogZero policy) {
  Series out(x.size());
  for (Eigen::Index t = 0; t < x.size(); ++t) out[t] = log_or_policy(x[t], policy);
  return out;
}

Series weekly_log_diff(const Series& x, LogZero policy) {
  Series lx = log_series(x, policy);
  return weekly_diff(lx);
}

void add_business_composite(Panel& panel) {
  const auto& movies = panel.series("policy_closed_movies");
  const auto& rest = panel.series("policy_closed_restaurants");
  const auto& ness = panel.series("policy_closed_nonessential");
  panel.add_series("business_composite") = (movies + rest + ness) / 3.0;
}

void add_national_info(Panel& panel, const std::string& cum_series,
                       const std::string& prefix, LogZero policy) {
  const auto& cum = panel.series(cum_series);
  const int T = panel.n_days();

  Series national = Series::Constant(T, kNaN);
  for (int t = 7; t < T; ++t) {
    double sum = 0;
    bool any = false;
    for (int si = 0; si < panel.n_states(); ++si) {
      double wk = cum(si, t) - cum(si, t - 7);
      if (std::isnan(wk)) continue;
      sum += wk;
      any = true;
    }
    if (any) national[t] = sum;
  }

  Series level = log_series(national, policy);
  Series growth = weekly_diff(level);
  auto& lv = panel.add_series(prefix + "_level");
  auto& gr = panel.add_series(prefix + "_growth");
  for (int si = 0; si < panel.n_states(); ++si) {
    lv.row(si) = level.matrix().transpose();
    gr.row(si) = growth.matrix().transpose();
  }
}

}  // namespace covidsem
