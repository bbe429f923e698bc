#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "covidsem/date.hpp"

namespace covidsem {

// Static per-state values, rows aligned with Panel::states().
struct Covariates {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // n_states x names.size()

  int col(const std::string& name) const;
  bool empty() const { return names.empty(); }
};

// Balanced state-by-day grid. Every series covers every (state, day) slot;
// NaN marks missing. Dates are contiguous.
class Panel {
 public:
  Panel() = default;
  Panel(std::vector<std::string> states, Day start, int n_days);

  const std::vector<std::string>& states() const { return states_; }
  int n_states() const { return static_cast<int>(states_.size()); }
  Day start_day() const { return start_; }
  Day end_day() const { return start_ + n_days_ - 1; }
  int n_days() const { return n_days_; }
  Day day_at(int j) const { return start_ + j; }
  int day_index(Day d) const { return static_cast<int>(d - start_); }  // may be out of range
  bool contains_day(Day d) const { return d >= start_ && d < start_ + n_days_; }

  int state_index(const std::string& code) const;  // -1 when absent

  bool has_series(const std::string& name) const;
  std::vector<std::string> series_names() const;
  const Eigen::MatrixXd& series(const std::string& name) const;
  Eigen::MatrixXd& series_mut(const std::string& name);
  // Adds a NaN-filled series and returns it for filling.
  Eigen::MatrixXd& add_series(const std::string& name);
  void set_series(const std::string& name, Eigen::MatrixXd m);

  const Covariates& covariates() const { return cov_; }
  void set_covariates(Covariates c);

  // Union of dates, intersection of states; series names must be disjoint.
  static Panel merge(const std::vector<Panel>& parts);

  // Flat long-form series file plus a per-state covariate sidecar. Values
  // use shortest round-trip formatting so read(write(p)) == p bit for bit.
  void write_csv(const std::string& series_path, const std::string& cov_path) const;
  static Panel read_csv(const std::string& series_path, const std::string& cov_path);

 private:
  std::vector<std::string> states_;
  Day start_ = 0;
  int n_days_ = 0;
  std::map<std::string, Eigen::MatrixXd> series_;
  Covariates cov_;
};

}  // namespace covidsem
