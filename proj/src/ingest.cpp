#include "covidsem/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"

namespace covidsem {

const std::vector<std::string>& state_codes() {
  static const std::vector<std::string> codes = {
      "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "HI", "IA",
      "ID", "IL", "IN", "KS", "KY", "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS",
      "MT", "NC", "ND", "NE", "NH", "NJ", "NM", "NV", "NY", "OH", "OK", "OR", "PA",
      "RI", "SC", "SD", "TN", "TX", "UT", "VA", "VT", "WA", "WI", "WV", "WY"};
  return codes;
}

bool is_state_code(const std::string& code) {
  const auto& v = state_codes();
  return std::binary_search(v.begin(), v.end(), code);
}

const std::vector<std::string>& core_policies() {
  static const std::vector<std::string> names = {
      "mask_employees", "closed_k12",         "stay_at_home",
      "closed_movies",  "closed_restaurants", "closed_nonessential"};
  return names;
}

namespace {

void warn(WarningLog* log, const std::string& file, const std::string& msg) {
  if (log) log->push_back({file, msg});
}

// Builds a panel from a per-(state,date) file. Validates state codes,
// rejects duplicate (state,date) rows, NaN-fills days a state never reports.
Panel panel_from_long(const CsvTable& t, const std::string& path,
                      const std::vector<std::string>& columns,
                      const std::vector<std::string>& series, bool counts, double scale) {
  int c_state = t.need_col("state");
  int c_date = t.need_col("date");
  std::vector<int> vcols;
  for (const auto& c : columns) vcols.push_back(t.need_col(c));

  std::set<std::string> states;
  std::set<std::pair<std::string, Day>> keys;
  Day lo = 0, hi = 0;
  bool first = true;
  for (const auto& r : t.rows) {
    const std::string& st = r[static_cast<size_t>(c_state)];
    if (!is_state_code(st)) throw DataError(path + ": unknown state code '" + st + "'");
    Day d = parse_date(r[static_cast<size_t>(c_date)]);
    if (!keys.insert({st, d}).second)
      throw DataError(path + ": duplicate row for " + st + " " + format_date(d));
    states.insert(st);
    if (first) {
      lo = hi = d;
      first = false;
    } else {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (first) throw DataError(path + ": no data rows");

  Panel p(std::vector<std::string>(states.begin(), states.end()), lo,
          static_cast<int>(hi - lo + 1));
  for (const auto& s : series) p.add_series(s);
  for (const auto& r : t.rows) {
    int si = p.state_index(r[static_cast<size_t>(c_state)]);
    int j = p.day_index(parse_date(r[static_cast<size_t>(c_date)]));
    for (size_t k = 0; k < series.size(); ++k) {
      const std::string& f = r[static_cast<size_t>(vcols[k])];
      if (f.empty()) continue;  // empty field = missing
      double v;
      if (counts) {
        v = static_cast<double>(parse_count(f, path));
      } else {
        v = parse_double(f, path);
        if (!std::isfinite(v)) throw DataError(path + ": non-finite value '" + f + "'");
      }
      p.series_mut(series[k])(si, j) = v * scale;
    }
  }
  return p;
}

void check_dips(const Panel& p, const std::string& name, const std::string& path,
                WarningLog* log) {
  const auto& m = p.series(name);
  for (int si = 0; si < p.n_states(); ++si) {
    double prev = std::nan("");
    int dips = 0;
    for (int j = 0; j < p.n_days(); ++j) {
      double v = m(si, j);
      if (std::isnan(v)) continue;
      if (!std::isnan(prev) && v < prev) ++dips;
      prev = v;
    }
    if (dips > 0)
      warn(log, path, name + " dips " + std::to_string(dips) + "x in " + p.states()[si] +
                          " (cumulative count revised downward)");
  }
}

}  // namespace

Panel load_cases_deaths(const std::string& path, WarningLog* warnings) {
  CsvTable t = read_csv(path);
  Panel p = panel_from_long(t, path, {"cumulative_cases", "cumulative_deaths"},
                            {"cum_cases", "cum_deaths"}, true, 1.0);
  check_dips(p, "cum_cases", path, warnings);
  check_dips(p, "cum_deaths", path, warnings);
  return p;
}

Panel load_tests(const std::string& path, WarningLog* warnings) {
  CsvTable t = read_csv(path);
  Panel p = panel_from_long(t, path, {"cumulative_tests"}, {"cum_tests"}, true, 1.0);
  check_dips(p, "cum_tests", path, warnings);
  return p;
}

Panel load_mobility(const std::string& path, WarningLog* warnings) {
  (void)warnings;
  CsvTable t = read_csv(path);
  // Stored as fractions so regression coefficients read per unit change.
  return panel_from_long(t, path, {"grocery", "transit", "retail", "workplaces"},
                         {"grocery", "transit", "retail", "workplaces"}, false, 0.01);
}

std::vector<PolicyEvent> load_policies(const std::string& path) {
  CsvTable t = read_csv(path);
  int c_state = t.need_col("state");
  int c_policy = t.need_col("policy");
  int c_start = t.need_col("start_date");
  int c_end = t.col("end_date");

  std::vector<PolicyEvent> events;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& r : t.rows) {
    PolicyEvent e;
    e.state = r[static_cast<size_t>(c_state)];
    if (!is_state_code(e.state))
      throw DataError(path + ": unknown state code '" + e.state + "'");
    e.policy = r[static_cast<size_t>(c_policy)];
    if (e.policy.empty()) throw DataError(path + ": empty policy name");
    if (!seen.insert({e.state, e.policy}).second)
      throw DataError(path + ": duplicate event for " + e.state + "/" + e.policy);
    e.start = parse_date(r[static_cast<size_t>(c_start)]);
    if (c_end >= 0 && !r[static_cast<size_t>(c_end)].empty()) {
      e.end = parse_date(r[static_cast<size_t>(c_end)]);
      if (*e.end < e.start)
        throw DataError(path + ": end before start for " + e.state + "/" + e.policy);
    }
    events.push_back(std::move(e));
  }
  return events;
}

Covariates load_covariates(const std::string& path, const std::vector<std::string>& states) {
  CsvTable t = read_csv(path);
  int c_state = t.need_col("state");
  for (const auto* req : {"population", "area", "unemployment_rate", "poverty_rate",
                          "pct_at_risk", "governor_party"})
    t.need_col(req);

  std::map<std::string, const std::vector<std::string>*> by_state;
  for (const auto& r : t.rows) {
    if (!is_state_code(r[static_cast<size_t>(c_state)]))
      throw DataError(path + ": unknown state code '" + r[static_cast<size_t>(c_state)] + "'");
    if (!by_state.emplace(r[static_cast<size_t>(c_state)], &r).second)
      throw DataError(path + ": duplicate state '" + r[static_cast<size_t>(c_state)] + "'");
  }

  Covariates cov;
  std::vector<int> value_cols;
  for (size_t c = 0; c < t.header.size(); ++c) {
    if (static_cast<int>(c) == c_state) continue;
    cov.names.push_back(t.header[c] == "governor_party" ? "governor_republican"
                                                        : t.header[c]);
    value_cols.push_back(static_cast<int>(c));
  }
  cov.values.resize(static_cast<int>(states.size()), static_cast<int>(cov.names.size()));
  for (size_t si = 0; si < states.size(); ++si) {
    auto it = by_state.find(states[si]);
    if (it == by_state.end())
      throw DataError(path + ": no covariate row for state '" + states[si] + "'");
    const auto& r = *it->second;
    for (size_t k = 0; k < value_cols.size(); ++k) {
      const std::string& f = r[static_cast<size_t>(value_cols[k])];
      if (cov.names[k] == "governor_republican") {
        std::string v;
        for (char ch : f) v += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (v == "republican" || v == "r" || v == "1")
          cov.values(static_cast<int>(si), static_cast<int>(k)) = 1.0;
        else if (v == "democratic" || v == "democrat" || v == "d" || v == "0")
          cov.values(static_cast<int>(si), static_cast<int>(k)) = 0.0;
        else
          throw DataError(path + ": unrecognized governor_party '" + f + "'");
      } else {
        cov.values(static_cast<int>(si), static_cast<int>(k)) = parse_double(f, path);
      }
    }
  }
  return cov;
}

void add_policy_indicators(Panel& panel, const std::vector<PolicyEvent>& events,
                           IndicatorMode mode) {
  std::set<std::string> names(core_policies().begin(), core_policies().end());
  for (const auto& e : events) names.insert(e.policy);
  // Core policies always get a series; a state with no event stays at 0.
  for (const auto& n : names) panel.add_series("policy_" + n).setZero();

  for (const auto& e : events) {
    int si = panel.state_index(e.state);
    if (si < 0) continue;  // state dropped by the merge intersection
    auto& m = panel.series_mut("policy_" + e.policy);
    Day from = std::max(e.start, panel.start_day());
    Day to = panel.end_day();
    if (mode == IndicatorMode::start_end && e.end) to = std::min(to, *e.end);
    for (Day d = from; d <= to; ++d) m(si, panel.day_index(d)) = 1.0;
  }
}

Panel ingest_all(const IngestPaths& paths, IndicatorMode mode, WarningLog* warnings) {
  std::vector<Panel> parts;
  parts.push_back(load_cases_deaths(paths.cases_deaths, warnings));
  parts.push_back(load_tests(paths.tests, warnings));
  parts.push_back(load_mobility(paths.mobility, warnings));
  Panel merged = Panel::merge(parts);
  merged.set_covariates(load_covariates(paths.covariates, merged.states()));
  add_policy_indicators(merged, load_policies(paths.policies), mode);
  return merged;
}

}  // namespace covidsem
