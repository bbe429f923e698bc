#include "covidsem/sird.hpp"

#include <cmath>

#include "covidsem/errors.hpp"

namespace covidsem {

namespace {

struct State {
  double s, i, r, d, c;
};

State derivs(const SirdParams& p, double t, const State& x) {
  double s_frac = x.s / p.n_pop;
  double beta = p.beta(t, s_frac);
  double infections = s_frac * beta * x.i;
  double resolutions = p.gamma * x.i;
  State dx;
  dx.s = -infections;
  dx.i = infections - resolutions;
  dx.r = (1.0 - p.kappa) * resolutions;
  dx.d = p.kappa * resolutions;
  dx.c = p.tau(t) * x.i;
  return dx;
}

State axpy(const State& x, double h, const State& k) {
  return {x.s + h * k.s, x.i + h * k.i, x.r + h * k.r, x.d + h * k.d, x.c + h * k.c};
}

}  // namespace

SirdPath integrate_sird(const SirdParams& p, int days, double dt) {
  if (!(dt > 0) || dt > 0.25) throw DataError("integrator step must be in (0, 0.25]");
  int spd = static_cast<int>(std::lround(1.0 / dt));
  if (std::fabs(spd * dt - 1.0) > 1e-9) throw DataError("integrator step must divide one day");
  if (days < 1) throw DataError("need at least one day");
  if (!p.beta || !p.tau) throw DataError("beta and tau schedules are required");

  const int K = days * spd;
  SirdPath path;
  path.dt = dt;
  path.steps_per_day = spd;
  path.t.reserve(K + 1);
  path.s.reserve(K + 1);
  path.i.reserve(K + 1);
  path.r.reserve(K + 1);
  path.d.reserve(K + 1);
  path.c.reserve(K + 1);

  State x{p.s0, p.i0, p.r0, p.d0, p.c0};
  for (int k = 0; k <= K; ++k) {
    double t = k * dt;
    path.t.push_back(t);
    path.s.push_back(x.s);
    path.i.push_back(x.i);
    path.r.push_back(x.r);
    path.d.push_back(x.d);
    path.c.push_back(x.c);
    if (k == K) break;

    State k1 = derivs(p, t, x);
    State k2 = derivs(p, t + 0.5 * dt, axpy(x, 0.5 * dt, k1));
    State k3 = derivs(p, t + 0.5 * dt, axpy(x, 0.5 * dt, k2));
    State k4 = derivs(p, t + dt, axpy(x, dt, k3));
    x.s += dt / 6.0 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s);
    x.i += dt / 6.0 * (k1.i + 2 * k2.i + 2 * k3.i + k4.i);
    x.r += dt / 6.0 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r);
    x.d += dt / 6.0 * (k1.d + 2 * k2.d + 2 * k3.d + k4.d);
    x.c += dt / 6.0 * (k1.c + 2 * k2.c + 2 * k3.c + k4.c);
    if (!(std::isfinite(x.s) && std::isfinite(x.i) && std::isfinite(x.c)))
      throw NumericalError("integration diverged at t=" + std::to_string(t));
  }
  return path;
}

double growth_identity_max_dev(const SirdPath& path, const SirdParams& p,
                               bool include_detection_term) {
  const size_t K = path.t.size();
  if (K < 3) throw DataError("path too short for the identity check");
  const double dt = path.dt;

  double worst = 0;
  for (size_t k = 1; k + 1 < K; ++k) {
    double cdot = (path.c[k + 1] - path.c[k - 1]) / (2 * dt);
    if (!(cdot > 0)) throw NumericalError("detected-case flow must stay positive");
    double cddot = (path.c[k + 1] - 2 * path.c[k] + path.c[k - 1]) / (dt * dt);
    double lhs = cddot / cdot;

    double s_frac = path.s[k] / p.n_pop;
    double rhs = s_frac * p.beta(path.t[k], s_frac) - p.gamma;
    if (include_detection_term) {
      double tau_k = p.tau(path.t[k]);
      double taudot = (p.tau(path.t[k + 1]) - p.tau(path.t[k - 1])) / (2 * dt);
      rhs += taudot / tau_k;
    }
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  return worst;
}

}  // namespace covidsem
