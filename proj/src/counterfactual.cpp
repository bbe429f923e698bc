#include "covidsem/counterfactual.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/transform.hpp"

namespace covidsem {

std::string rule_kind_name(RuleKind k) {
  switch (k) {
    case RuleKind::set_on_from: return "set_on_from";
    case RuleKind::set_off_always: return "set_off_always";
    case RuleKind::set_on_always: return "set_on_always";
    case RuleKind::replace: return "replace";
  }
  return "";
}

RuleKind rule_kind_from_name(const std::string& s) {
  if (s == "set_on_from") return RuleKind::set_on_from;
  if (s == "set_off_always") return RuleKind::set_off_always;
  if (s == "set_on_always") return RuleKind::set_on_always;
  if (s == "replace") return RuleKind::replace;
  throw DataError("unknown rule kind '" + s + "'");
}

std::string coef_column_name(CoefColumn c) {
  switch (c) {
    case CoefColumn::direct: return "direct";
    case CoefColumn::indirect: return "indirect";
    case CoefColumn::total: return "total";
    case CoefColumn::reduced: return "reduced";
    case CoefColumn::average: return "average";
  }
  return "";
}

CoefColumn coef_column_from_name(const std::string& s) {
  if (s == "direct") return CoefColumn::direct;
  if (s == "indirect") return CoefColumn::indirect;
  if (s == "total") return CoefColumn::total;
  if (s == "reduced") return CoefColumn::reduced;
  if (s == "average") return CoefColumn::average;
  throw DataError("unknown coefficient column '" + s + "'");
}

Scenario scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario JSON: ") + e.what());
  }
  Scenario sc;
  try {
    sc.name = j.at("name").get<std::string>();
    for (const auto& rj : j.value("rules", nlohmann::json::array())) {
      PolicyRule r;
      r.policy = rj.at("policy").get<std::string>();
      r.kind = rule_kind_from_name(rj.at("kind").get<std::string>());
      if (rj.contains("date")) r.date = parse_date(rj.at("date").get<std::string>());
      else if (r.kind == RuleKind::set_on_from || r.kind == RuleKind::replace)
        throw DataError("rule kind '" + rule_kind_name(r.kind) + "' needs a date");
      if (rj.contains("states")) r.states = rj.at("states").get<std::vector<std::string>>();
      if (rj.contains("values")) r.values = rj.at("values").get<std::vector<double>>();
      if (r.kind == RuleKind::replace && r.values.empty())
        throw DataError("replace rule needs values");
      sc.rules.push_back(std::move(r));
    }
    sc.national_info = j.value("national_info", false);
    sc.coef_column = j.value("coefficients", std::string("average"));
    coef_column_from_name(sc.coef_column);  // validate early
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scenario JSON: ") + e.what());
  }
  return sc;
}

std::string scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["name"] = sc.name;
  auto rules = nlohmann::json::array();
  for (const PolicyRule& r : sc.rules) {
    nlohmann::json rj;
    rj["policy"] = r.policy;
    rj["kind"] = rule_kind_name(r.kind);
    if (r.kind == RuleKind::set_on_from || r.kind == RuleKind::replace)
      rj["date"] = format_date(r.date);
    if (!r.states.empty()) rj["states"] = r.states;
    if (!r.values.empty()) rj["values"] = r.values;
    rules.push_back(rj);
  }
  j["rules"] = rules;
  j["national_info"] = sc.national_info;
  j["coefficients"] = sc.coef_column;
  return j.dump(2) + "\n";
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scenario_from_json(buf.str());
}

std::vector<Scenario> builtin_scenarios() {
  Scenario mask;
  mask.name = "mask_march14";
  mask.rules = {{"mask_employees", RuleKind::set_on_from, parse_date("2020-03-14"), {}, {}}};
  Scenario business;
  business.name = "no_business";
  for (const char* p : {"closed_movies", "closed_restaurants", "closed_nonessential"})
    business.rules.push_back({p, RuleKind::set_off_always, 0, {}, {}});
  Scenario shelter;
  shelter.name = "no_shelter";
  shelter.rules = {{"stay_at_home", RuleKind::set_off_always, 0, {}, {}}};
  return {mask, business, shelter};
}

Panel apply_scenario(const Panel& panel, const Scenario& sc) {
  Panel out = panel;
  for (const PolicyRule& r : sc.rules) {
    std::string series = "policy_" + r.policy;
    if (!out.has_series(series))
      throw DataError("scenario '" + sc.name + "' touches unknown policy '" + r.policy + "'");
    if ((r.kind == RuleKind::set_on_from || r.kind == RuleKind::replace) &&
        r.date > out.end_day())
      throw DataError("scenario '" + sc.name + "' rule date " + format_date(r.date) +
                      " is past the sample");
    std::vector<int> idx;
    if (r.states.empty()) {
      for (int i = 0; i < out.n_states(); ++i) idx.push_back(i);
    } else {
      for (const std::string& s : r.states) {
        int i = out.state_index(s);
        if (i < 0) throw DataError("scenario '" + sc.name + "' names unknown state '" + s + "'");
        idx.push_back(i);
      }
    }
    Eigen::MatrixXd& m = out.series_mut(series);
    for (int i : idx) {
      switch (r.kind) {
        case RuleKind::set_on_always: m.row(i).setOnes(); break;
        case RuleKind::set_off_always: m.row(i).setZero(); break;
        case RuleKind::set_on_from: {
          int j0 = std::max(0, out.day_index(r.date));
          for (int j = j0; j < out.n_days(); ++j) m(i, j) = 1.0;
          break;
        }
        case RuleKind::replace: {
          if (out.day_index(r.date) < 0)
            throw DataError("scenario '" + sc.name + "' replacement starts before the sample");
          if (out.day_index(r.date) + static_cast<int>(r.values.size()) > out.n_days())
            throw DataError("scenario '" + sc.name + "' replacement runs past the sample");
          for (size_t t = 0; t < r.values.size(); ++t)
            m(i, out.day_index(r.date) + static_cast<int>(t)) = r.values[t];
          break;
        }
      }
    }
  }
  if (out.has_series("business_composite")) {
    Eigen::MatrixXd composite = (out.series("policy_closed_movies") +
                                 out.series("policy_closed_restaurants") +
                                 out.series("policy_closed_nonessential")) /
                                3.0;
    out.set_series("business_composite", std::move(composite));
  }
  return out;
}

namespace {

double stat_of(const EffectRow& row, CoefColumn c) {
  switch (c) {
    case CoefColumn::direct: return row.direct.est;
    case CoefColumn::indirect: return row.indirect.est;
    case CoefColumn::total: return row.total.est;
    case CoefColumn::reduced: return row.reduced.est;
    case CoefColumn::average: return row.average.est;
  }
  return 0;
}

double fit_coef_or_zero(const FitResult& fit, const std::string& name) {
  int c = fit.col(name);
  return c >= 0 ? fit.beta[c] : 0.0;
}

}  // namespace

RecursionCoefs recursion_coefs(const EffectTable& table, const FitResult& reduced,
                               const CfWiring& wiring, CoefColumn column) {
  RecursionCoefs rc;
  rc.a.resize(static_cast<Eigen::Index>(wiring.policies.size()));
  for (size_t j = 0; j < wiring.policies.size(); ++j) {
    const EffectRow* row = table.find(wiring.policies[j]);
    if (!row) throw DataError("effect table has no row for policy '" + wiring.policies[j] + "'");
    rc.a[static_cast<Eigen::Index>(j)] = stat_of(*row, column);
  }
  if (!wiring.own_growth_term.empty()) rc.own_growth = fit_coef_or_zero(reduced, wiring.own_growth_term);
  if (!wiring.own_level_term.empty()) rc.own_level = fit_coef_or_zero(reduced, wiring.own_level_term);
  rc.national_growth.resize(static_cast<Eigen::Index>(wiring.national_growth_terms.size()));
  for (size_t m = 0; m < wiring.national_growth_terms.size(); ++m)
    rc.national_growth[static_cast<Eigen::Index>(m)] =
        fit_coef_or_zero(reduced, wiring.national_growth_terms[m]);
  rc.national_level.resize(static_cast<Eigen::Index>(wiring.national_level_terms.size()));
  for (size_t m = 0; m < wiring.national_level_terms.size(); ++m)
    rc.national_level[static_cast<Eigen::Index>(m)] =
        fit_coef_or_zero(reduced, wiring.national_level_terms[m]);
  return rc;
}

std::vector<RecursionCoefs> recursion_coef_draws(const Equations& eq, const PairedEqDraws& draws,
                                                 const CfWiring& wiring, CoefColumn column) {
  const int B = draws.n_draws();
  if (eq.behaviors.size() != eq.b.size() || eq.b.size() != draws.b.size())
    throw DataError("recursion draws: behavior wiring mismatch");

  auto col_of = [](const FitResult& f, const BootstrapDraws& d, const std::string& name) {
    if (f.names != d.names) throw DataError("coefficient draws do not match fit '" + f.spec_name + "'");
    return f.col(name);
  };
  std::vector<int> alpha_col(eq.behaviors.size());
  for (size_t k = 0; k < eq.behaviors.size(); ++k) {
    alpha_col[k] = col_of(eq.y, draws.y, eq.behaviors[k]);
    if (alpha_col[k] < 0)
      throw DataError("behavior '" + eq.behaviors[k] + "' missing from the outcome equation");
  }

  const size_t np = wiring.policies.size();
  std::vector<int> cy(np), cr(np);
  std::vector<std::vector<int>> cb(np, std::vector<int>(eq.behaviors.size()));
  for (size_t j = 0; j < np; ++j) {
    cy[j] = col_of(eq.y, draws.y, wiring.policies[j]);
    cr[j] = col_of(eq.reduced, draws.reduced, wiring.policies[j]);
    for (size_t k = 0; k < eq.behaviors.size(); ++k)
      cb[j][k] = col_of(eq.b[k], draws.b[k], wiring.policies[j]);
  }
  auto fb_col = [&](const std::string& name) {
    return name.empty() ? -1 : col_of(eq.reduced, draws.reduced, name);
  };
  int c_og = fb_col(wiring.own_growth_term);
  int c_ol = fb_col(wiring.own_level_term);
  std::vector<int> c_ng, c_nl;
  for (const auto& t : wiring.national_growth_terms) c_ng.push_back(fb_col(t));
  for (const auto& t : wiring.national_level_terms) c_nl.push_back(fb_col(t));

  std::vector<RecursionCoefs> out(static_cast<size_t>(B));
  for (int r = 0; r < B; ++r) {
    RecursionCoefs rc;
    rc.a.resize(static_cast<Eigen::Index>(np));
    for (size_t j = 0; j < np; ++j) {
      double direct = cy[j] >= 0 ? draws.y.draws(r, cy[j]) : 0.0;
      double indirect = 0;
      for (size_t k = 0; k < eq.behaviors.size(); ++k)
        if (cb[j][k] >= 0)
          indirect += draws.y.draws(r, alpha_col[k]) * draws.b[k].draws(r, cb[j][k]);
      double reduced = cr[j] >= 0 ? draws.reduced.draws(r, cr[j]) : 0.0;
      double v = 0;
      switch (column) {
        case CoefColumn::direct: v = direct; break;
        case CoefColumn::indirect: v = indirect; break;
        case CoefColumn::total: v = direct + indirect; break;
        case CoefColumn::reduced: v = reduced; break;
        case CoefColumn::average: v = 0.5 * ((direct + indirect) + reduced); break;
      }
      rc.a[static_cast<Eigen::Index>(j)] = v;
    }
    rc.own_growth = c_og >= 0 ? draws.reduced.draws(r, c_og) : 0.0;
    rc.own_level = c_ol >= 0 ? draws.reduced.draws(r, c_ol) : 0.0;
    rc.national_growth.resize(static_cast<Eigen::Index>(c_ng.size()));
    for (size_t m = 0; m < c_ng.size(); ++m)
      rc.national_growth[static_cast<Eigen::Index>(m)] =
          c_ng[m] >= 0 ? draws.reduced.draws(r, c_ng[m]) : 0.0;
    rc.national_level.resize(static_cast<Eigen::Index>(c_nl.size()));
    for (size_t m = 0; m < c_nl.size(); ++m)
      rc.national_level[static_cast<Eigen::Index>(m)] =
          c_nl[m] >= 0 ? draws.reduced.draws(r, c_nl[m]) : 0.0;
    out[static_cast<size_t>(r)] = std::move(rc);
  }
  return out;
}

namespace {

struct TermLags {
  int own_growth = 0;
  int own_level = 0;
  std::vector<int> national_growth;
  std::vector<int> national_level;
};

int feedback_lag(const ModelSpec& spec, const std::string& name, const char* what) {
  const TermSpec* t = spec.find_term(name);
  if (!t) throw DataError(std::string(what) + " term '" + name + "' is not in the spec");
  if (t->lag < 1)
    throw DataError(std::string(what) + " term '" + name + "' needs lag >= 1 to feed back");
  return t->lag;
}

}  // namespace

ContrastPath simulate_contrast(const Panel& factual, const Panel& cf, const ModelSpec& spec,
                               const CfWiring& wiring, const RecursionCoefs& coefs,
                               Day sim_start, Day sim_end, bool national_info) {
  if (cf.states() != factual.states() || cf.start_day() != factual.start_day() ||
      cf.n_days() != factual.n_days())
    throw DataError("counterfactual panel does not match the factual panel");
  if (sim_end < sim_start) throw DataError("simulation window is empty");
  if (!factual.contains_day(sim_start) || !factual.contains_day(sim_end))
    throw DataError("simulation window leaves the panel date range");
  if (factual.day_index(sim_start) < 7)
    throw DataError("simulation start needs a week of panel history for cumulative seeds");
  if (static_cast<int>(wiring.policies.size()) != coefs.a.size())
    throw DataError("policy coefficient count does not match the wiring");

  const int S = factual.n_states();
  const int n = static_cast<int>(sim_end - sim_start) + 1;
  const int off = factual.day_index(sim_start);

  std::vector<const TermSpec*> pterms;
  for (const std::string& p : wiring.policies) {
    const TermSpec* t = spec.find_term(p);
    if (!t) throw DataError("policy term '" + p + "' is not in the spec");
    pterms.push_back(t);
  }
  TermLags lags;
  if (!wiring.own_growth_term.empty())
    lags.own_growth = feedback_lag(spec, wiring.own_growth_term, "own growth");
  if (!wiring.own_level_term.empty())
    lags.own_level = feedback_lag(spec, wiring.own_level_term, "own level");
  for (const auto& t : wiring.national_growth_terms)
    lags.national_growth.push_back(feedback_lag(spec, t, "national growth"));
  for (const auto& t : wiring.national_level_terms)
    lags.national_level.push_back(feedback_lag(spec, t, "national level"));

  // Policy contrast a'(X* - X) per state and sim day.
  Eigen::MatrixXd shift = Eigen::MatrixXd::Zero(S, n);
  for (size_t j = 0; j < pterms.size(); ++j) {
    double aj = coefs.a[static_cast<Eigen::Index>(j)];
    for (int i = 0; i < S; ++i) {
      Series xf = term_series(factual, i, *pterms[j], LogZero::drop);
      Series xc = term_series(cf, i, *pterms[j], LogZero::drop);
      for (int d = 0; d < n; ++d) {
        double dx = xc[off + d] - xf[off + d];
        if (std::isnan(dx))
          throw DataError("term '" + pterms[j]->name + "' is undefined for state " +
                          factual.states()[static_cast<size_t>(i)] + " at " +
                          format_date(sim_start + d));
        shift(i, d) += aj * dx;
      }
    }
  }

  // Factual weekly counts and cumulative seeds.
  if (!factual.has_series(wiring.cum_series))
    throw DataError("unknown cumulative series '" + wiring.cum_series + "'");
  const Eigen::MatrixXd& cum = factual.series(wiring.cum_series);
  Eigen::MatrixXd w(S, n);
  for (int i = 0; i < S; ++i)
    for (int d = 0; d < n; ++d) {
      double v = cum(i, off + d) - cum(i, off + d - 7);
      if (std::isnan(v))
        throw DataError("cumulative counts missing for state " +
                        factual.states()[static_cast<size_t>(i)] + " at " +
                        format_date(sim_start + d));
      w(i, d) = v;
    }
  for (int i = 0; i < S; ++i)
    for (int d = -7; d < 0; ++d)
      if (std::isnan(cum(i, off + d)))
        throw DataError("cumulative seed missing for state " +
                        factual.states()[static_cast<size_t>(i)] + " at " +
                        format_date(sim_start + d));

  ContrastPath out;
  out.start = sim_start;
  out.n_days = n;
  out.states = factual.states();
  out.log_contrast.resize(S, n);
  out.growth_change.resize(S, n);
  out.weekly_ratio.resize(S, n);
  out.cumulative_relative.resize(S, n);
  out.national_weekly_ratio.resize(n);
  out.national_cumulative_relative.resize(n);

  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(S, n);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  auto d_at = [&](int i, int d) { return d >= 0 ? D(i, d) : 0.0; };
  auto eta_at = [&](int d) { return d >= 0 ? eta[d] : 0.0; };
  Eigen::MatrixXd cstar(S, n);

  for (int d = 0; d < n; ++d) {
    for (int i = 0; i < S; ++i) {
      double v = shift(i, d) + d_at(i, d - 7);
      if (!wiring.own_growth_term.empty())
        v += coefs.own_growth * (d_at(i, d - lags.own_growth) - d_at(i, d - lags.own_growth - 7));
      if (!wiring.own_level_term.empty()) v += coefs.own_level * d_at(i, d - lags.own_level);
      if (national_info) {
        for (size_t m = 0; m < lags.national_growth.size(); ++m)
          v += coefs.national_growth[static_cast<Eigen::Index>(m)] *
               (eta_at(d - lags.national_growth[m]) - eta_at(d - lags.national_growth[m] - 7));
        for (size_t m = 0; m < lags.national_level.size(); ++m)
          v += coefs.national_level[static_cast<Eigen::Index>(m)] *
               eta_at(d - lags.national_level[m]);
      }
      D(i, d) = v;
    }
    double sw = 0, sw_cf = 0;
    for (int i = 0; i < S; ++i) {
      sw += w(i, d);
      sw_cf += w(i, d) * std::exp(D(i, d));
    }
    if (national_info) eta[d] = sw > 0 && sw_cf > 0 ? std::log(sw_cf) - std::log(sw) : 0.0;

    double csum = 0, csum_cf = 0;
    for (int i = 0; i < S; ++i) {
      out.log_contrast(i, d) = D(i, d);
      out.growth_change(i, d) = D(i, d) - d_at(i, d - 7);
      out.weekly_ratio(i, d) = std::exp(D(i, d));
      double prev = d >= 7 ? cstar(i, d - 7) : cum(i, off + d - 7);
      cstar(i, d) = prev + w(i, d) * out.weekly_ratio(i, d);
      double c_obs = cum(i, off + d);
      out.cumulative_relative(i, d) = c_obs > 0 ? (cstar(i, d) - c_obs) / c_obs : 0.0;
      csum += c_obs;
      csum_cf += cstar(i, d);
    }
    out.national_weekly_ratio[d] = sw > 0 ? sw_cf / sw : 1.0;
    out.national_cumulative_relative[d] = csum > 0 ? (csum_cf - csum) / csum : 0.0;
  }
  return out;
}

namespace {

// Linear-interpolation quantile on sorted values.
double quantile_sorted(const std::vector<double>& v, double q) {
  if (v.empty()) return 0;
  double pos = q * (static_cast<double>(v.size()) - 1);
  size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

}  // namespace

TrajectoryBands band_inference(const Panel& factual, const Panel& cf, const ModelSpec& spec,
                               const CfWiring& wiring, const std::vector<RecursionCoefs>& draws,
                               Day sim_start, Day sim_end, bool national_info,
                               double lo_q, double hi_q, int threads) {
  if (draws.empty()) throw DataError("band inference needs at least one draw");
  if (!(lo_q >= 0 && lo_q <= hi_q && hi_q <= 1)) throw DataError("quantiles must be ordered in [0,1]");
  const int B = static_cast<int>(draws.size());

  std::vector<ContrastPath> paths(static_cast<size_t>(B));
  std::vector<std::string> errors(static_cast<size_t>(B));
  for_each_index(static_cast<size_t>(B), threads, [&](size_t b) {
    try {
      paths[b] = simulate_contrast(factual, cf, spec, wiring, draws[b], sim_start, sim_end,
                                   national_info);
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("band inference failed: " + e);

  const int S = factual.n_states();
  const int n = paths[0].n_days;
  TrajectoryBands tb;
  tb.start = sim_start;
  tb.n_days = n;
  tb.states = factual.states();
  tb.lo_q = lo_q;
  tb.hi_q = hi_q;
  tb.n_draws = B;

  auto summarize = [&](auto value_at, Band& band) {
    band.mean.resize(S, n);
    band.lo.resize(S, n);
    band.hi.resize(S, n);
    std::vector<double> v(static_cast<size_t>(B));
    for (int i = 0; i < S; ++i)
      for (int d = 0; d < n; ++d) {
        double sum = 0;
        for (int b = 0; b < B; ++b) {
          v[static_cast<size_t>(b)] = value_at(paths[static_cast<size_t>(b)], i, d);
          sum += v[static_cast<size_t>(b)];
        }
        std::sort(v.begin(), v.end());
        band.mean(i, d) = sum / B;
        band.lo(i, d) = quantile_sorted(v, lo_q);
        band.hi(i, d) = quantile_sorted(v, hi_q);
      }
  };
  summarize([](const ContrastPath& p, int i, int d) { return p.growth_change(i, d); },
            tb.growth_change);
  summarize([](const ContrastPath& p, int i, int d) { return p.weekly_ratio(i, d); },
            tb.weekly_ratio);
  summarize([](const ContrastPath& p, int i, int d) { return p.cumulative_relative(i, d); },
            tb.cumulative_relative);

  auto summarize_nat = [&](auto value_at, NationalBand& band) {
    band.mean.resize(n);
    band.lo.resize(n);
    band.hi.resize(n);
    std::vector<double> v(static_cast<size_t>(B));
    for (int d = 0; d < n; ++d) {
      double sum = 0;
      for (int b = 0; b < B; ++b) {
        v[static_cast<size_t>(b)] = value_at(paths[static_cast<size_t>(b)], d);
        sum += v[static_cast<size_t>(b)];
      }
      std::sort(v.begin(), v.end());
      band.mean[d] = sum / B;
      band.lo[d] = quantile_sorted(v, lo_q);
      band.hi[d] = quantile_sorted(v, hi_q);
    }
  };
  summarize_nat([](const ContrastPath& p, int d) { return p.national_weekly_ratio[d]; },
                tb.national_weekly_ratio);
  summarize_nat([](const ContrastPath& p, int d) { return p.national_cumulative_relative[d]; },
                tb.national_cumulative_relative);
  return tb;
}

namespace {

void csv_band_rows(std::ostringstream& out, const TrajectoryBands& tb, int d) {
  Day date = tb.start + d;
  struct Kind {
    const char* name;
    const Band* band;
  };
  const Kind kinds[] = {{"growth_change", &tb.growth_change},
                        {"weekly_ratio", &tb.weekly_ratio},
                        {"cumulative_relative", &tb.cumulative_relative}};
  for (const Kind& k : kinds)
    for (int i = 0; i < static_cast<int>(tb.states.size()); ++i)
      out << "state," << tb.states[static_cast<size_t>(i)] << ',' << format_date(date) << ','
          << k.name << ',' << fmt_double(k.band->mean(i, d)) << ','
          << fmt_double(k.band->lo(i, d)) << ',' << fmt_double(k.band->hi(i, d)) << '\n';
  struct NatKind {
    const char* name;
    const NationalBand* band;
  };
  const NatKind nat[] = {{"weekly_ratio", &tb.national_weekly_ratio},
                         {"cumulative_relative", &tb.national_cumulative_relative}};
  for (const NatKind& k : nat)
    out << "national,," << format_date(date) << ',' << k.name << ','
        << fmt_double(k.band->mean[d]) << ',' << fmt_double(k.band->lo[d]) << ','
        << fmt_double(k.band->hi[d]) << '\n';
}

}  // namespace

std::string trajectory_csv(const TrajectoryBands& tb) {
  std::ostringstream out;
  out << "scope,state,date,contrast,mean,lo,hi\n";
  for (int d = 0; d < tb.n_days; ++d) csv_band_rows(out, tb, d);
  return out.str();
}

std::string endpoint_csv(const TrajectoryBands& tb) {
  std::ostringstream out;
  out << "scope,state,date,contrast,mean,lo,hi\n";
  if (tb.n_days > 0) csv_band_rows(out, tb, tb.n_days - 1);
  return out.str();
}

}  // namespace covidsem
