#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "covidsem/model_spec.hpp"
#include "covidsem/panel.hpp"
#include "covidsem/transform.hpp"

namespace covidsem {

struct DesignColumn {
  std::string name;
  Block block = Block::confounder;
  bool is_term = false;  // listed in the spec, as opposed to generated
};

struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<DesignColumn> cols;
  std::vector<int> cluster;                 // per-row cluster id
  std::vector<std::string> cluster_names;   // id -> state code
  std::vector<std::pair<int, Day>> rows;    // (panel state index, outcome date)
  std::vector<std::string> dropped_terms;   // removed by zero restrictions

  int n() const { return static_cast<int>(y.size()); }
  int k() const { return static_cast<int>(X.cols()); }
  int n_clusters() const { return static_cast<int>(cluster_names.size()); }
  int col_index(const std::string& name) const;        // -1 when absent
  int need_col(const std::string& name) const;         // throws
  std::vector<int> block_columns(Block b) const;       // is_term columns only
  std::vector<std::string> col_names() const;

  // Rows of the given clusters, in the order requested, duplicates kept.
  Design rows_for_clusters(const std::vector<int>& cluster_ids) const;
};

// Applies the sample window [start + spec.sample_lag_days, end], computes
// term columns, drops zero-restricted terms, appends intercept, calendar
// dummies (base category dropped), standardized static covariates and their
// interactions, then deletes rows with any missing value.
Design build_design(const Panel& panel, const ModelSpec& spec, Day window_start,
                    Day window_end, LogZero log_policy);

// Reference day for the logdays interaction clock.
Day interaction_epoch();

// Transformed and lagged regressor path of one term for one state, indexed
// by outcome date. The same path build_design uses for term columns.
Series term_series(const Panel& panel, int state_index, const TermSpec& term, LogZero lz);

}  // namespace covidsem
