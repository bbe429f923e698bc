#pragma once

#include <functional>
#include <vector>

namespace covidsem {

// Compartment model with detection: susceptible, infectious, recovered,
// dead, cumulative detected cases. Infections resolve at rate gamma, a
// share kappa of resolutions is fatal, detections accrue at tau(t) * I.
struct SirdParams {
  double n_pop = 1e6;
  double gamma = 0.1;
  double kappa = 0.01;
  // Transmission rate; receives time and S/N so the product beta*S/N can be
  // targeted directly.
  std::function<double(double t, double s_frac)> beta;
  std::function<double(double t)> tau;
  double s0 = 0, i0 = 0, r0 = 0, d0 = 0, c0 = 0;
};

struct SirdPath {
  double dt = 0;
  int steps_per_day = 0;
  // Fine integration grid, index k = time k*dt, including k=0.
  std::vector<double> t, s, i, r, d, c;

  int n_days() const { return static_cast<int>((t.size() - 1)) / steps_per_day; }
  double daily(const std::vector<double>& v, int day) const {
    return v[static_cast<size_t>(day) * static_cast<size_t>(steps_per_day)];
  }
};

// Classical fixed-step fourth-order Runge-Kutta; dt must divide one day
// evenly and satisfy dt <= 0.25.
SirdPath integrate_sird(const SirdParams& p, int days, double dt);

// Max pointwise deviation of the detected-case growth identity
//   Cddot/Cdot = (S/N) beta - gamma + taudot/tau
// using central differences on the fine grid. Dropping the detection term
// isolates how much time-varying tau contributes.
double growth_identity_max_dev(const SirdPath& path, const SirdParams& p,
                               bool include_detection_term = true);

}  // namespace covidsem
