#include "covidsem/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/rng.hpp"
#include "covidsem/sird.hpp"

namespace covidsem {

namespace {

const std::vector<std::string>& behavior_names() {
  static const std::vector<std::string> names = {"grocery", "transit", "retail", "workplaces"};
  return names;
}

const std::vector<std::string>& closure_names() {
  static const std::vector<std::string> names = {"closed_movies", "closed_restaurants",
                                                 "closed_nonessential"};
  return names;
}

double smoothstep01(double x) {
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  return x * x * (3.0 - 2.0 * x);
}

// Stationary AR(1), marginal sd = sd.
std::vector<double> ar1(Rng& rng, int n, double sd, double rho) {
  std::vector<double> e(static_cast<size_t>(n), 0.0);
  if (sd <= 0.0) return e;
  double innov = sd * std::sqrt(std::max(0.0, 1.0 - rho * rho));
  e[0] = sd * rng.normal();
  for (int d = 1; d < n; ++d) e[static_cast<size_t>(d)] = rho * e[static_cast<size_t>(d - 1)] + innov * rng.normal();
  return e;
}

struct StateGen {
  std::vector<long long> cases, deaths, tests;
  std::vector<std::array<double, 4>> mob_pct;
  std::vector<std::pair<std::string, Day>> starts;  // adopted generator policies
  SynthResult::CovRow cov;
  double min_s_frac = 1.0;
};

StateGen gen_state(const SynthConfig& cfg, int si, const std::string& code) {
  const int n = cfg.n_days;
  const auto& behs = behavior_names();

  for (int attempt = 0;; ++attempt) {
    if (attempt >= 12)
      throw NumericalError("synthetic panel: state " + code +
                           " kept producing empty weekly counts; raise base_growth or "
                           "initial infections");
    // Separate streams so a fixed design_seed pins everything but the noise;
    // retries redraw only noise (a fresh design could not unblock them).
    std::uint64_t dseed = cfg.design_seed ? cfg.design_seed : cfg.seed;
    Rng rng_d(replicate_seed(dseed, static_cast<std::uint64_t>(si) * 16));
    Rng rng(replicate_seed(~cfg.seed, static_cast<std::uint64_t>(si) * 16 +
                                          static_cast<std::uint64_t>(attempt)));

    StateGen out;
    out.cov.state = code;
    out.cov.population = std::floor(1e6 * (1.0 + 9.0 * rng_d.uniform()));
    out.cov.area = std::floor(5e4 * (0.2 + 2.0 * rng_d.uniform()));
    out.cov.unemployment_rate = 3.0 + 8.0 * rng_d.uniform();
    out.cov.poverty_rate = 8.0 + 8.0 * rng_d.uniform();
    out.cov.pct_at_risk = 30.0 + 15.0 * rng_d.uniform();
    out.cov.republican = rng_d.uniform() < 0.5;

    double i0 = out.cov.population * 1e-4 * (0.5 + rng_d.uniform());
    double ramp_center = 35.0 + 20.0 * rng_d.uniform();
    const double ramp_width = 30.0;

    // Daily 0/1 policy paths (generator keys, closures collapsed to one).
    std::vector<std::vector<double>> x(cfg.policies.size(),
                                       std::vector<double>(static_cast<size_t>(n), 0.0));
    for (size_t j = 0; j < cfg.policies.size(); ++j) {
      const auto& pol = cfg.policies[j];
      double u_adopt = rng_d.uniform();
      double u_start = rng_d.uniform();
      if (u_adopt >= pol.adopt_prob) continue;
      Day s = pol.base_start +
              static_cast<Day>(std::lround((2.0 * u_start - 1.0) * pol.jitter_days));
      out.starts.emplace_back(pol.name, s);
      for (int d = std::max(0, static_cast<int>(s - cfg.start)); d < n; ++d)
        x[j][static_cast<size_t>(d)] = 1.0;
    }

    // Behavior = linear policy response + AR(1) noise, in fraction units.
    std::vector<std::vector<double>> b(behs.size());
    for (size_t k = 0; k < behs.size(); ++k) {
      b[k] = ar1(rng, n, cfg.noise_scale * cfg.sigma_behavior, cfg.ar_rho);
      double base = 0.0;
      if (auto it = cfg.behavior_base.find(behs[k]); it != cfg.behavior_base.end())
        base = it->second;
      const std::map<std::string, double>* resp = nullptr;
      if (auto it = cfg.behavior_response.find(behs[k]); it != cfg.behavior_response.end())
        resp = &it->second;
      for (int d = 0; d < n; ++d) {
        double v = base + b[k][static_cast<size_t>(d)];
        if (resp)
          for (size_t j = 0; j < cfg.policies.size(); ++j)
            if (auto it = resp->find(cfg.policies[j].name); it != resp->end())
              v += it->second * x[j][static_cast<size_t>(d)];
        b[k][static_cast<size_t>(d)] = v;
      }
    }

    std::vector<double> eps = ar1(rng, n, cfg.noise_scale * cfg.sigma_growth, cfg.ar_rho);

    auto at = [n](const std::vector<double>& v, double u) {
      int d = static_cast<int>(std::floor(u));
      d = std::clamp(d, 0, n - 1);
      return v[static_cast<size_t>(d)];
    };
    std::vector<double> theta(cfg.policies.size(), 0.0);
    for (size_t j = 0; j < cfg.policies.size(); ++j)
      if (auto it = cfg.theta_direct.find(cfg.policies[j].name); it != cfg.theta_direct.end())
        theta[j] = it->second;
    std::vector<double> alph(behs.size(), 0.0);
    for (size_t k = 0; k < behs.size(); ++k)
      if (auto it = cfg.alpha.find(behs[k]); it != cfg.alpha.end()) alph[k] = it->second;

    auto growth = [&](double u) {
      double acc = cfg.base_growth + at(eps, u);
      double ul = u - cfg.response_lag;
      for (size_t j = 0; j < cfg.policies.size(); ++j) acc += theta[j] * at(x[j], ul);
      for (size_t k = 0; k < behs.size(); ++k) acc += alph[k] * at(b[k], ul);
      return acc;
    };

    int beta_clamps = 0;
    SirdParams p;
    p.n_pop = out.cov.population;
    // Transmission keeps (S/N) beta - gamma equal to the forced growth path.
    p.beta = [&](double t, double s_frac) {
      double g = cfg.gamma + growth(t);
      if (g < 0.0) {
        ++beta_clamps;
        g = 0.0;
      }
      return g / std::max(s_frac, 1e-9);
    };
    double tau0 = cfg.tau0, tau1 = cfg.tau1;
    p.tau = [=](double t) {
      return tau0 + (tau1 - tau0) * smoothstep01((t - (ramp_center - ramp_width / 2)) / ramp_width);
    };
    p.gamma = cfg.gamma;
    p.kappa = cfg.kappa;
    p.i0 = i0;
    p.s0 = p.n_pop - i0;
    p.r0 = 0.0;
    p.d0 = 0.0;
    p.c0 = 2.0 * cfg.tau0 * i0;

    SirdPath path = integrate_sird(p, n - 1, cfg.dt);

    double test_volume = 0.002 * out.cov.population;
    std::vector<double> cum_tests(static_cast<size_t>(n), 0.0);
    {
      double running = 7.0 * test_volume * p.tau(0.0);
      cum_tests[0] = running;
      double dt = path.dt;
      for (size_t k = 0; k + 1 < path.t.size(); ++k) {
        running += dt * test_volume * 0.5 * (p.tau(path.t[k]) + p.tau(path.t[k + 1]));
        if ((k + 1) % static_cast<size_t>(path.steps_per_day) == 0) {
          size_t day = (k + 1) / static_cast<size_t>(path.steps_per_day);
          if (day < static_cast<size_t>(n)) cum_tests[day] = running;
        }
      }
    }

    out.cases.resize(static_cast<size_t>(n));
    out.deaths.resize(static_cast<size_t>(n));
    out.tests.resize(static_cast<size_t>(n));
    out.mob_pct.resize(static_cast<size_t>(n));
    for (int d = 0; d < n; ++d) {
      out.cases[static_cast<size_t>(d)] = std::llround(path.daily(path.c, d));
      out.deaths[static_cast<size_t>(d)] = std::llround(path.daily(path.d, d));
      out.tests[static_cast<size_t>(d)] = std::llround(cum_tests[static_cast<size_t>(d)]);
      for (size_t k = 0; k < behs.size(); ++k)
        out.mob_pct[static_cast<size_t>(d)][k] = 100.0 * b[k][static_cast<size_t>(d)];
    }
    for (double s : path.s) out.min_s_frac = std::min(out.min_s_frac, s / p.n_pop);

    bool ok = beta_clamps == 0;
    for (int d = 7; ok && d < n; ++d)
      if (out.cases[static_cast<size_t>(d)] - out.cases[static_cast<size_t>(d - 7)] < 1) ok = false;
    if (ok) return out;
  }
}

void validate_config(const SynthConfig& cfg) {
  if (cfg.n_states < 2 || cfg.n_states > static_cast<int>(state_codes().size()))
    throw DataError("synthetic panel: n_states out of range");
  if (cfg.n_days < 30) throw DataError("synthetic panel: need at least 30 days");
  if (cfg.policies.empty()) throw DataError("synthetic panel: no policies configured");
  for (const auto& pol : cfg.policies) {
    bool known = pol.name == "business";
    for (const auto& c : core_policies()) known = known || pol.name == c;
    if (!known) throw DataError("synthetic panel: unknown policy " + pol.name);
  }
  for (const auto& [k, v] : cfg.alpha) {
    (void)v;
    if (std::find(behavior_names().begin(), behavior_names().end(), k) == behavior_names().end())
      throw DataError("synthetic panel: unknown behavior " + k);
  }
}

}  // namespace

SynthConfig default_synth_config() {
  SynthConfig cfg;
  cfg.start = parse_date("2020-02-01");
  Day d0 = cfg.start;
  // Staggered starts with incomplete adoption keep every indicator varying
  // across states after calendar dummies soak the common component.
  cfg.policies = {
      {"closed_k12", 0.90, d0 + 45, 12},
      {"business", 0.92, d0 + 49, 8},
      {"stay_at_home", 0.85, d0 + 56, 9},
      {"mask_employees", 0.80, d0 + 83, 16},
  };
  cfg.theta_direct = {{"mask_employees", -0.010},
                      {"closed_k12", -0.004},
                      {"stay_at_home", -0.005},
                      {"business", -0.006}};
  cfg.behavior_response = {
      {"grocery", {{"closed_k12", -0.02}, {"stay_at_home", -0.03}, {"business", -0.02}}},
      {"transit", {{"closed_k12", -0.05}, {"stay_at_home", -0.07}, {"business", -0.05}}},
      {"retail", {{"closed_k12", -0.04}, {"stay_at_home", -0.08}, {"business", -0.07}}},
      {"workplaces", {{"closed_k12", -0.06}, {"stay_at_home", -0.09}, {"business", -0.05}}},
  };
  cfg.alpha = {{"grocery", 0.01}, {"transit", 0.02}, {"retail", 0.03}, {"workplaces", 0.05}};
  return cfg;
}

SynthResult synth_panel(const SynthConfig& cfg, int threads) {
  validate_config(cfg);

  std::vector<std::string> codes(state_codes().begin(),
                                 state_codes().begin() + cfg.n_states);
  std::vector<StateGen> gens(codes.size());
  std::vector<std::string> errors(codes.size());
  for_each_index(static_cast<int>(codes.size()), threads, [&](int i) {
    try {
      gens[static_cast<size_t>(i)] = gen_state(cfg, i, codes[static_cast<size_t>(i)]);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError(e);

  SynthResult res;
  res.truth.theta_direct = cfg.theta_direct;
  res.truth.alpha = cfg.alpha;
  res.truth.behavior_response = cfg.behavior_response;
  res.truth.gamma = cfg.gamma;
  res.truth.kappa = cfg.kappa;
  res.truth.seed = cfg.seed;
  for (const auto& pol : cfg.policies) {
    double total = 0.0;
    if (auto it = cfg.theta_direct.find(pol.name); it != cfg.theta_direct.end())
      total += it->second;
    for (const auto& [beh, resp] : cfg.behavior_response)
      if (auto it = resp.find(pol.name); it != resp.end()) {
        auto ia = cfg.alpha.find(beh);
        if (ia != cfg.alpha.end()) total += ia->second * it->second;
      }
    res.truth.theta_total[pol.name] = total;
  }

  Panel panel(codes, cfg.start, cfg.n_days);
  auto& cc = panel.add_series("cum_cases");
  auto& cd = panel.add_series("cum_deaths");
  auto& ct = panel.add_series("cum_tests");
  std::vector<Eigen::MatrixXd*> mob;
  for (const auto& bname : behavior_names()) mob.push_back(&panel.add_series(bname));

  Covariates cov;
  cov.names = {"population", "area", "unemployment_rate", "poverty_rate",
               "pct_at_risk", "governor_republican"};
  cov.values.resize(static_cast<int>(codes.size()), 6);

  for (size_t i = 0; i < codes.size(); ++i) {
    const auto& g = gens[i];
    res.truth.min_s_frac = std::min(res.truth.min_s_frac, g.min_s_frac);
    res.covariates.push_back(g.cov);
    int si = static_cast<int>(i);
    cov.values(si, 0) = g.cov.population;
    cov.values(si, 1) = g.cov.area;
    cov.values(si, 2) = g.cov.unemployment_rate;
    cov.values(si, 3) = g.cov.poverty_rate;
    cov.values(si, 4) = g.cov.pct_at_risk;
    cov.values(si, 5) = g.cov.republican ? 1.0 : 0.0;
    for (int d = 0; d < cfg.n_days; ++d) {
      Day date = cfg.start + d;
      size_t ud = static_cast<size_t>(d);
      res.counts.push_back({codes[i], date, g.cases[ud], g.deaths[ud], g.tests[ud]});
      // The panel stores what a reader of the emitted files would see, so
      // counts pass through the text round trip and mobility through x0.01.
      cc(si, d) = static_cast<double>(g.cases[ud]);
      cd(si, d) = static_cast<double>(g.deaths[ud]);
      ct(si, d) = static_cast<double>(g.tests[ud]);
      SynthResult::MobilityRow mrow{codes[i], date, 0, 0, 0, 0};
      std::array<double*, 4> slots = {&mrow.grocery, &mrow.transit, &mrow.retail,
                                      &mrow.workplaces};
      for (size_t k = 0; k < 4; ++k) {
        double pct = g.mob_pct[ud][k];  // fmt_double emits shortest round-trip text
        *slots[k] = pct;
        (*mob[k])(si, d) = pct * 0.01;
      }
      res.mobility.push_back(mrow);
    }
    for (const auto& [pname, start] : g.starts) {
      if (pname == "business") {
        for (const auto& c : closure_names())
          res.events.push_back({codes[i], c, start, std::nullopt});
      } else {
        res.events.push_back({codes[i], pname, start, std::nullopt});
      }
    }
  }
  panel.set_covariates(std::move(cov));
  add_policy_indicators(panel, res.events, IndicatorMode::start_only);
  res.panel = std::move(panel);
  return res;
}

std::string SynthTruth::to_json() const {
  nlohmann::json j;
  j["theta_total"] = theta_total;
  j["theta_weekly_total"] = nlohmann::json::object();
  for (const auto& [k, v] : theta_total) j["theta_weekly_total"][k] = 7.0 * v;
  j["theta_direct"] = theta_direct;
  j["alpha"] = alpha;
  j["behavior_response"] = behavior_response;
  j["gamma"] = gamma;
  j["kappa"] = kappa;
  j["seed"] = seed;
  j["min_s_frac"] = min_s_frac;
  return j.dump(2) + "\n";
}

void write_synth_files(const SynthResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw DataError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };

  {
    auto f = open("cases_deaths.csv");
    f << "state,date,cumulative_cases,cumulative_deaths\n";
    for (const auto& r : result.counts)
      f << r.state << ',' << format_date(r.date) << ',' << r.cases << ',' << r.deaths << '\n';
  }
  {
    auto f = open("tests.csv");
    f << "state,date,cumulative_tests\n";
    for (const auto& r : result.counts)
      f << r.state << ',' << format_date(r.date) << ',' << r.tests << '\n';
  }
  {
    auto f = open("mobility.csv");
    f << "state,date,grocery,transit,retail,workplaces\n";
    for (const auto& r : result.mobility)
      f << r.state << ',' << format_date(r.date) << ',' << fmt_double(r.grocery) << ','
        << fmt_double(r.transit) << ',' << fmt_double(r.retail) << ','
        << fmt_double(r.workplaces) << '\n';
  }
  {
    auto f = open("policies.csv");
    f << "state,policy,start_date,end_date\n";
    for (const auto& e : result.events) {
      f << e.state << ',' << e.policy << ',' << format_date(e.start) << ',';
      if (e.end) f << format_date(*e.end);
      f << '\n';
    }
  }
  {
    auto f = open("covariates.csv");
    f << "state,population,area,unemployment_rate,poverty_rate,pct_at_risk,governor_party\n";
    for (const auto& c : result.covariates)
      f << c.state << ',' << fmt_double(c.population) << ',' << fmt_double(c.area) << ','
        << fmt_double(c.unemployment_rate) << ',' << fmt_double(c.poverty_rate) << ','
        << fmt_double(c.pct_at_risk) << ',' << (c.republican ? "republican" : "democratic")
        << '\n';
  }
  open("truth.json") << result.truth.to_json();
}

}  // namespace covidsem
