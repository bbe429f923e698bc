#include "covidsem/design.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "covidsem/errors.hpp"

namespace covidsem {

int Design::col_index(const std::string& name) const {
  for (size_t i = 0; i < cols.size(); ++i)
    if (cols[i].name == name) return static_cast<int>(i);
  return -1;
}

int Design::need_col(const std::string& name) const {
  int c = col_index(name);
  if (c < 0) throw DataError("design has no column '" + name + "'");
  return c;
}

std::vector<int> Design::block_columns(Block b) const {
  std::vector<int> out;
  for (size_t i = 0; i < cols.size(); ++i)
    if (cols[i].is_term && cols[i].block == b) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<std::string> Design::col_names() const {
  std::vector<std::string> out;
  for (const auto& c : cols) out.push_back(c.name);
  return out;
}

Design Design::rows_for_clusters(const std::vector<int>& cluster_ids) const {
  std::vector<std::vector<int>> by_cluster(cluster_names.size());
  for (int r = 0; r < n(); ++r) by_cluster[static_cast<size_t>(cluster[r])].push_back(r);

  Design out;
  out.cols = cols;
  out.dropped_terms = dropped_terms;
  std::vector<int> keep;
  for (int g : cluster_ids)
    for (int r : by_cluster.at(static_cast<size_t>(g))) keep.push_back(r);
  if (keep.empty()) throw NumericalError("cluster resample has zero rows");

  out.y.resize(static_cast<Eigen::Index>(keep.size()));
  out.X.resize(static_cast<Eigen::Index>(keep.size()), X.cols());
  out.cluster.reserve(keep.size());
  out.rows.reserve(keep.size());
  // Each draw of a cluster becomes its own cluster id so a state drawn
  // twice contributes two independent clusters.
  int next_id = -1;
  size_t pos = 0;
  for (int g : cluster_ids) {
    ++next_id;
    for (int r : by_cluster[static_cast<size_t>(g)]) {
      out.y[static_cast<Eigen::Index>(pos)] = y[r];
      out.X.row(static_cast<Eigen::Index>(pos)) = X.row(r);
      out.cluster.push_back(next_id);
      out.rows.push_back(rows[static_cast<size_t>(r)]);
      ++pos;
    }
    out.cluster_names.push_back(cluster_names[static_cast<size_t>(g)]);
  }
  return out;
}

Day interaction_epoch() { return days_from_civil(2020, 1, 15); }

Series term_series(const Panel& panel, int si, const TermSpec& t, LogZero lz) {
  if (!panel.has_series(t.source))
    throw DataError("term '" + t.name + "' references unknown series '" + t.source + "'");
  Series x = panel.series(t.source).row(si).transpose().array();
  Series v;
  switch (t.transform) {
    case Transform::identity: v = x; break;
    case Transform::movavg7: v = movavg7(x); break;
    case Transform::weekly_growth: v = weekly_log_diff(weekly_diff(x), lz); break;
    case Transform::log_weekly: v = log_series(weekly_diff(x), lz); break;
    case Transform::weekly_log_diff: v = weekly_log_diff(x, lz); break;
  }
  return lag_series(v, t.lag);
}

Design build_design(const Panel& panel, const ModelSpec& spec, Day window_start,
                    Day window_end, LogZero log_policy) {
  spec.validate();
  const int S = panel.n_states();

  Day row_start = std::max<Day>(window_start + spec.sample_lag_days, panel.start_day());
  Day row_end = std::min<Day>(window_end, panel.end_day());
  if (row_start > row_end) throw DataError("sample window is empty");

  // Kept terms, spec order.
  std::vector<const TermSpec*> kept;
  std::vector<std::string> dropped;
  for (const auto& t : spec.terms) {
    bool zeroed = std::find(spec.zero_restrictions.begin(), spec.zero_restrictions.end(),
                            t.name) != spec.zero_restrictions.end();
    if (zeroed)
      dropped.push_back(t.name);
    else
      kept.push_back(&t);
  }

  // Per-state transformed series, full panel length.
  std::vector<Series> y_by_state(S);
  std::vector<std::vector<Series>> terms_by_state(S);
  for (int si = 0; si < S; ++si) {
    y_by_state[si] = term_series(panel, si, spec.outcome, log_policy);
    terms_by_state[si].reserve(kept.size());
    for (const auto* t : kept) terms_by_state[si].push_back(term_series(panel, si, *t, log_policy));
  }

  // Listwise deletion over outcome and term values.
  std::vector<std::pair<int, Day>> rows;
  for (int si = 0; si < S; ++si) {
    for (Day d = row_start; d <= row_end; ++d) {
      int j = panel.day_index(d);
      if (std::isnan(y_by_state[si][j])) continue;
      bool ok = true;
      for (const auto& ts : terms_by_state[si])
        if (std::isnan(ts[j])) {
          ok = false;
          break;
        }
      if (ok) rows.emplace_back(si, d);
    }
  }
  if (rows.empty()) throw DataError("design is empty after listwise deletion");

  // Dummy categories from kept rows; first category is the base.
  std::vector<int> cats;
  if (spec.dummies != Dummies::none) {
    std::set<int> seen;
    for (const auto& r : rows)
      seen.insert(spec.dummies == Dummies::month
                      ? year_of(r.second) * 12 + month_of(r.second)
                      : week_bucket(r.second));
    cats.assign(seen.begin(), seen.end());
  }

  // Standardized static covariates (across states, sample sd).
  const auto& cov = panel.covariates();
  std::vector<Eigen::VectorXd> statics;
  for (const auto& cname : spec.static_covariates) {
    int c = cov.col(cname);
    if (c < 0) throw DataError("unknown static covariate '" + cname + "'");
    Eigen::VectorXd v = cov.values.col(c);
    if (!v.array().isFinite().all())
      throw DataError("static covariate '" + cname + "' has missing values");
    double mean = v.mean();
    double sd = std::sqrt((v.array() - mean).square().sum() / std::max(1, S - 1));
    if (sd <= 0) throw DataError("static covariate '" + cname + "' is constant");
    statics.push_back((v.array() - mean) / sd);
  }

  Design dz;
  dz.dropped_terms = std::move(dropped);
  for (const auto* t : kept) dz.cols.push_back({t->name, t->block, true});
  dz.cols.push_back({"const", Block::confounder, false});
  std::vector<std::string> cat_names;
  for (size_t ci = 1; ci < cats.size(); ++ci) {  // base category dropped
    std::string nm = (spec.dummies == Dummies::month ? "month_" : "week_") +
                     std::to_string(cats[ci]);
    cat_names.push_back(nm);
    dz.cols.push_back({nm, Block::confounder, false});
  }
  for (size_t k = 0; k < statics.size(); ++k)
    dz.cols.push_back({spec.static_covariates[k], Block::confounder, false});
  if (spec.interactions == CovInteraction::logdays) {
    for (size_t k = 0; k < statics.size(); ++k)
      dz.cols.push_back({spec.static_covariates[k] + ":logdays", Block::confounder, false});
  } else if (spec.interactions == CovInteraction::month_dummies) {
    for (size_t k = 0; k < statics.size(); ++k)
      for (const auto& cn : cat_names)
        dz.cols.push_back({spec.static_covariates[k] + ":" + cn, Block::confounder, false});
  }

  const int n = static_cast<int>(rows.size());
  const int K = static_cast<int>(dz.cols.size());
  dz.y.resize(n);
  dz.X.resize(n, K);
  dz.rows = rows;

  std::map<int, int> state_to_cluster;
  for (int r = 0; r < n; ++r) {
    auto [si, d] = rows[static_cast<size_t>(r)];
    int j = panel.day_index(d);
    dz.y[r] = y_by_state[si][j];
    int c = 0;
    for (size_t tk = 0; tk < kept.size(); ++tk) dz.X(r, c++) = terms_by_state[si][tk][j];
    dz.X(r, c++) = 1.0;
    int cat = spec.dummies == Dummies::none
                  ? 0
                  : (spec.dummies == Dummies::month ? year_of(d) * 12 + month_of(d)
                                                    : week_bucket(d));
    for (size_t ci = 1; ci < cats.size(); ++ci) dz.X(r, c++) = (cat == cats[ci]) ? 1.0 : 0.0;
    for (const auto& sv : statics) dz.X(r, c++) = sv[si];
    if (spec.interactions == CovInteraction::logdays) {
      double ld = std::log(static_cast<double>(std::max<Day>(1, d - interaction_epoch())));
      for (const auto& sv : statics) dz.X(r, c++) = sv[si] * ld;
    } else if (spec.interactions == CovInteraction::month_dummies) {
      for (const auto& sv : statics)
        for (size_t ci = 1; ci < cats.size(); ++ci)
          dz.X(r, c++) = sv[si] * ((cat == cats[ci]) ? 1.0 : 0.0);
    }

    auto it = state_to_cluster.find(si);
    if (it == state_to_cluster.end()) {
      it = state_to_cluster.emplace(si, static_cast<int>(dz.cluster_names.size())).first;
      dz.cluster_names.push_back(panel.states()[static_cast<size_t>(si)]);
    }
    dz.cluster.push_back(it->second);
  }

  // Rank check with named culprits so spec mistakes surface early.
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(dz.X);
  qr.setThreshold(1e-10);
  if (qr.rank() < K) {
    auto perm = qr.colsPermutation().indices();
    std::string culprits;
    for (int i = qr.rank(); i < K; ++i) {
      if (!culprits.empty()) culprits += ", ";
      culprits += dz.cols[static_cast<size_t>(perm[i])].name;
    }
    throw NumericalError("design is rank deficient; dependent columns: " + culprits);
  }
  return dz;
}

}  // namespace covidsem
