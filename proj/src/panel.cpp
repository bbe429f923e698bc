#include "covidsem/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"

namespace covidsem {

static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int Covariates::col(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

Panel::Panel(std::vector<std::string> states, Day start, int n_days)
    : states_(std::move(states)), start_(start), n_days_(n_days) {
  if (n_days_ <= 0) throw DataError("panel needs at least one day");
  if (states_.empty()) throw DataError("panel needs at least one state");
  if (!std::is_sorted(states_.begin(), states_.end()))
    std::sort(states_.begin(), states_.end());
  if (std::adjacent_find(states_.begin(), states_.end()) != states_.end())
    throw DataError("duplicate state codes in panel");
}

int Panel::state_index(const std::string& code) const {
  auto it = std::lower_bound(states_.begin(), states_.end(), code);
  if (it == states_.end() || *it != code) return -1;
  return static_cast<int>(it - states_.begin());
}

bool Panel::has_series(const std::string& name) const { return series_.count(name) > 0; }

std::vector<std::string> Panel::series_names() const {
  std::vector<std::string> out;
  for (const auto& kv : series_) out.push_back(kv.first);
  return out;
}

const Eigen::MatrixXd& Panel::series(const std::string& name) const {
  auto it = series_.find(name);
  if (it == series_.end()) throw DataError("panel has no series '" + name + "'");
  return it->second;
}

Eigen::MatrixXd& Panel::series_mut(const std::string& name) {
  auto it = series_.find(name);
  if (it == series_.end()) throw DataError("panel has no series '" + name + "'");
  return it->second;
}

Eigen::MatrixXd& Panel::add_series(const std::string& name) {
  if (series_.count(name)) throw DataError("series '" + name + "' already present");
  auto& m = series_[name];
  m.setConstant(n_states(), n_days_, kNaN);
  return m;
}

void Panel::set_series(const std::string& name, Eigen::MatrixXd m) {
  if (m.rows() != n_states() || m.cols() != n_days_)
    throw DataError("series '" + name + "' has wrong shape");
  series_[name] = std::move(m);
}

void Panel::set_covariates(Covariates c) {
  if (!c.names.empty() && c.values.rows() != n_states())
    throw DataError("covariate rows do not match panel states");
  cov_ = std::move(c);
}

Panel Panel::merge(const std::vector<Panel>& parts) {
  if (parts.empty()) throw DataError("merge of zero panels");
  std::set<std::string> common(parts[0].states_.begin(), parts[0].states_.end());
  Day lo = parts[0].start_, hi = parts[0].end_day();
  for (size_t i = 1; i < parts.size(); ++i) {
    std::set<std::string> next;
    for (const auto& s : parts[i].states_)
      if (common.count(s)) next.insert(s);
    common.swap(next);
    lo = std::min(lo, parts[i].start_);
    hi = std::max(hi, parts[i].end_day());
  }
  if (common.empty()) throw DataError("merge leaves no common states");

  Panel out(std::vector<std::string>(common.begin(), common.end()), lo,
            static_cast<int>(hi - lo + 1));
  for (const auto& part : parts) {
    for (const auto& kv : part.series_) {
      if (out.series_.count(kv.first))
        throw DataError("series '" + kv.first + "' present in more than one input");
      auto& dst = out.add_series(kv.first);
      for (int si = 0; si < out.n_states(); ++si) {
        int sj = part.state_index(out.states_[si]);
        int off = static_cast<int>(part.start_ - lo);
        dst.row(si).segment(off, part.n_days_) = kv.second.row(sj);
      }
    }
    if (!part.cov_.empty()) {
      if (!out.cov_.empty()) throw DataError("covariates present in more than one input");
      Covariates c;
      c.names = part.cov_.names;
      c.values.resize(out.n_states(), static_cast<int>(c.names.size()));
      for (int si = 0; si < out.n_states(); ++si)
        c.values.row(si) = part.cov_.values.row(part.state_index(out.states_[si]));
      out.cov_ = std::move(c);
    }
  }
  return out;
}

void Panel::write_csv(const std::string& series_path, const std::string& cov_path) const {
  std::ofstream out(series_path);
  if (!out) throw DataError("cannot write '" + series_path + "'");
  if (series_.count("_range")) throw DataError("series name '_range' is reserved");
  out << "state,date,series,value\n";
  for (const auto& kv : series_) {
    for (int si = 0; si < n_states(); ++si)
      for (int j = 0; j < n_days_; ++j) {
        double v = kv.second(si, j);
        if (std::isnan(v)) continue;  // missing slots have no row
        out << states_[si] << ',' << format_date(day_at(j)) << ','
            << csv_escape(kv.first) << ',' << fmt_double(v) << '\n';
      }
  }
  // Day range rows keep empty-edge days through a round trip.
  out << states_[0] << ',' << format_date(start_) << ",_range,0\n";
  out << states_[0] << ',' << format_date(end_day()) << ",_range,1\n";

  std::ofstream cov(cov_path);
  if (!cov) throw DataError("cannot write '" + cov_path + "'");
  cov << "state";
  for (const auto& n : cov_.names) cov << ',' << csv_escape(n);
  cov << '\n';
  for (int si = 0; si < n_states(); ++si) {
    cov << states_[si];
    for (size_t c = 0; c < cov_.names.size(); ++c)
      cov << ',' << fmt_double(cov_.values(si, static_cast<int>(c)));
    cov << '\n';
  }
}

Panel Panel::read_csv(const std::string& series_path, const std::string& cov_path) {
  CsvTable t = ::covidsem::read_csv(series_path);
  int c_state = t.need_col("state"), c_date = t.need_col("date");
  int c_series = t.need_col("series"), c_value = t.need_col("value");

  std::set<std::string> states;
  Day lo = 0, hi = 0;
  bool first = true;
  for (const auto& r : t.rows) {
    states.insert(r[c_state]);
    Day d = parse_date(r[c_date]);
    if (first) {
      lo = hi = d;
      first = false;
    } else {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  if (first) throw DataError(series_path + ": no data rows");

  Panel p(std::vector<std::string>(states.begin(), states.end()), lo,
          static_cast<int>(hi - lo + 1));
  for (const auto& r : t.rows) {
    const std::string& name = r[c_series];
    if (name == "_range") continue;
    if (!p.has_series(name)) p.add_series(name);
    int si = p.state_index(r[c_state]);
    int j = p.day_index(parse_date(r[c_date]));
    p.series_mut(name)(si, j) = parse_double(r[c_value], series_path);
  }

  CsvTable ct = ::covidsem::read_csv(cov_path);
  if (ct.header.empty() || ct.header[0] != "state")
    throw DataError(cov_path + ": first column must be 'state'");
  Covariates cov;
  for (size_t i = 1; i < ct.header.size(); ++i) cov.names.push_back(ct.header[i]);
  cov.values.setConstant(p.n_states(), static_cast<int>(cov.names.size()), kNaN);
  for (const auto& r : ct.rows) {
    int si = p.state_index(r[0]);
    if (si < 0) throw DataError(cov_path + ": unknown state '" + r[0] + "'");
    for (size_t c = 1; c < ct.header.size(); ++c)
      cov.values(si, static_cast<int>(c - 1)) = parse_double(r[c], cov_path);
  }
  p.set_covariates(std::move(cov));
  return p;
}

}  // namespace covidsem
