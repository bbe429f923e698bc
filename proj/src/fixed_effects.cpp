#include "covidsem/fixed_effects.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "covidsem/errors.hpp"

namespace covidsem {

namespace {

// Subtracts group means from y and X in place; returns per-group row counts.
std::vector<int> demean_by_group(Eigen::VectorXd& y, Eigen::MatrixXd& X,
                                 const std::vector<int>& group, int n_groups) {
  Eigen::VectorXd ysum = Eigen::VectorXd::Zero(n_groups);
  Eigen::MatrixXd xsum = Eigen::MatrixXd::Zero(n_groups, X.cols());
  std::vector<int> count(static_cast<size_t>(n_groups), 0);
  for (int r = 0; r < y.size(); ++r) {
    int g = group[static_cast<size_t>(r)];
    ysum[g] += y[r];
    xsum.row(g) += X.row(r);
    ++count[static_cast<size_t>(g)];
  }
  for (int g = 0; g < n_groups; ++g) {
    if (count[static_cast<size_t>(g)] == 0) throw NumericalError("empty group in within transform");
    ysum[g] /= count[static_cast<size_t>(g)];
    xsum.row(g) /= count[static_cast<size_t>(g)];
  }
  for (int r = 0; r < y.size(); ++r) {
    int g = group[static_cast<size_t>(r)];
    y[r] -= ysum[g];
    X.row(r) -= xsum.row(g);
  }
  return count;
}

// Columns whose demeaned values vanish carry no within variation.
std::vector<int> varying_columns(const Eigen::MatrixXd& Xdm, const Eigen::MatrixXd& Xraw,
                                 std::vector<std::string>* dropped,
                                 const std::vector<DesignColumn>& cols) {
  std::vector<int> keep;
  for (int c = 0; c < Xdm.cols(); ++c) {
    double scale = Xraw.col(c).norm();
    if (Xdm.col(c).norm() <= 1e-10 * std::max(scale, 1.0)) {
      if (dropped) dropped->push_back(cols[static_cast<size_t>(c)].name);
    } else {
      keep.push_back(c);
    }
  }
  return keep;
}

Eigen::MatrixXd select_cols(const Eigen::MatrixXd& X, const std::vector<int>& keep) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = X.col(keep[i]);
  return out;
}

}  // namespace

FeFit fit_fixed_effects(const Design& dz) {
  const int G = dz.n_clusters();
  if (G < 2) throw NumericalError("within estimator needs at least 2 states");

  Eigen::VectorXd y = dz.y;
  Eigen::MatrixXd X = dz.X;
  demean_by_group(y, X, dz.cluster, G);

  FeFit fe;
  fe.n_groups = G;
  std::vector<int> keep = varying_columns(X, dz.X, &fe.dropped, dz.cols);
  if (keep.empty()) throw NumericalError("no regressors vary within states");
  Eigen::MatrixXd Xk = select_cols(X, keep);
  std::vector<std::string> names;
  for (int c : keep) names.push_back(dz.cols[static_cast<size_t>(c)].name);

  OlsFit f = ols(y, Xk, &names);
  int k_total = static_cast<int>(keep.size()) + G;  // slopes + absorbed effects
  if (dz.n() <= k_total)
    throw NumericalError("within estimator has no residual degrees of freedom");

  FitResult res;
  res.names = std::move(names);
  res.beta = f.beta;
  res.vcov = cluster_vcov(Xk, f.residuals, dz.cluster, G, f.xtx_inv, k_total);
  res.residuals = f.residuals;
  res.n = dz.n();
  res.k = k_total;
  res.n_clusters = G;
  res.r2 = f.r2;  // within R2
  res.r2_adj = f.r2_adj;
  fe.result = std::move(res);
  return fe;
}

JackknifeResult crossover_jackknife(const Design& dz) {
  const int N = dz.n_clusters();
  if (N < 2) throw NumericalError("jackknife needs at least 2 states");

  // Date rank within the design, 1-based.
  std::set<Day> date_set;
  for (const auto& r : dz.rows) date_set.insert(r.second);
  std::vector<Day> dates(date_set.begin(), date_set.end());
  const int T = static_cast<int>(dates.size());
  if (T < 2) throw NumericalError("jackknife needs at least 2 dates");

  std::map<Day, int> date_rank;
  for (int t = 0; t < T; ++t) date_rank[dates[static_cast<size_t>(t)]] = t + 1;

  const int state_hi = (N + 1) / 2;      // ceil(N/2)
  const int state_lo = N / 2 + 1;        // floor(N/2) + 1
  const int date_hi = (T + 1) / 2;
  const int date_lo = T / 2 + 1;

  FeFit full = fit_fixed_effects(dz);

  // Stack subpanel rows; (state, subpanel) pairs get distinct group ids.
  std::vector<int> rows_idx, group;
  for (int sub = 0; sub < 2; ++sub) {
    for (int r = 0; r < dz.n(); ++r) {
      int i = dz.cluster[static_cast<size_t>(r)] + 1;
      int t = date_rank[dz.rows[static_cast<size_t>(r)].second];
      bool in_s1 = (i <= state_hi && t <= date_hi) || (i >= state_lo && t >= date_lo);
      bool in_s2 = (i <= state_hi && t >= date_lo) || (i >= state_lo && t <= date_hi);
      if ((sub == 0 && in_s1) || (sub == 1 && in_s2)) {
        rows_idx.push_back(r);
        group.push_back(dz.cluster[static_cast<size_t>(r)] + sub * N);
      }
    }
  }
  if (rows_idx.empty()) throw NumericalError("jackknife subpanels are empty");

  // Compact group ids (a state can miss one diagonal in unbalanced panels).
  std::map<int, int> remap;
  for (int& g : group) {
    auto it = remap.find(g);
    if (it == remap.end()) it = remap.emplace(g, static_cast<int>(remap.size())).first;
    g = it->second;
  }

  Eigen::VectorXd ys(static_cast<Eigen::Index>(rows_idx.size()));
  Eigen::MatrixXd Xs(static_cast<Eigen::Index>(rows_idx.size()), dz.X.cols());
  for (size_t p = 0; p < rows_idx.size(); ++p) {
    ys[static_cast<Eigen::Index>(p)] = dz.y[rows_idx[p]];
    Xs.row(static_cast<Eigen::Index>(p)) = dz.X.row(rows_idx[p]);
  }
  demean_by_group(ys, Xs, group, static_cast<int>(remap.size()));

  // Same column set as the full fit so the vectors align.
  std::vector<int> keep;
  for (const auto& nm : full.result.names) keep.push_back(dz.need_col(nm));
  Eigen::MatrixXd Xk = select_cols(Xs, keep);
  OlsFit cross = ols(ys, Xk, &full.result.names);

  JackknifeResult out;
  out.names = full.result.names;
  out.beta_fe = full.result.beta;
  out.beta_cross = cross.beta;
  out.beta_bc = 2.0 * out.beta_fe - out.beta_cross;
  out.n_states = N;
  out.n_dates = T;
  out.state_hi = state_hi;
  out.state_lo = state_lo;
  out.date_hi = date_hi;
  out.date_lo = date_lo;
  return out;
}

}  // namespace covidsem
