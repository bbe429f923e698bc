#include "covidsem/dml.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "covidsem/errors.hpp"
#include "covidsem/estimator.hpp"
#include "covidsem/parallel.hpp"

namespace covidsem {

namespace {

struct FoldRows {
  std::vector<int> in, out;
};

Eigen::VectorXd take(const std::vector<int>& rows, const Eigen::VectorXd& v) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) r[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return r;
}

Eigen::MatrixXd take_m(const std::vector<int>& rows, const Eigen::MatrixXd& m) {
  Eigen::MatrixXd r(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (size_t i = 0; i < rows.size(); ++i) r.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return r;
}

// Out-of-fold nuisance stage for one variable: returns the pooled held-out
// residuals and fills the diagnostics.
Eigen::VectorXd crossfit(const Eigen::VectorXd& v, const Eigen::MatrixXd& W,
                         const std::vector<FoldRows>& folds, double lambda, int threads,
                         NuisanceDiag& diag) {
  Eigen::VectorXd resid = v;
  diag.lambda = lambda;
  diag.nonzero = 0;
  diag.oos_r2 = 0;
  if (W.cols() == 0) return resid;

  std::vector<LassoFit> fits(folds.size());
  std::vector<std::string> errors(folds.size());
  for_each_index(folds.size(), threads, [&](size_t f) {
    try {
      fits[f] = lasso(take(folds[f].in, v), take_m(folds[f].in, W), lambda);
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("nuisance fit failed: " + e);

  std::vector<bool> used(static_cast<size_t>(W.cols()), false);
  for (size_t f = 0; f < folds.size(); ++f) {
    Eigen::VectorXd pred = fits[f].predict(take_m(folds[f].out, W));
    for (size_t i = 0; i < folds[f].out.size(); ++i)
      resid[folds[f].out[i]] -= pred[static_cast<Eigen::Index>(i)];
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      if (fits[f].beta[j] != 0.0) used[static_cast<size_t>(j)] = true;
  }
  for (bool u : used) diag.nonzero += u;
  double base = v.squaredNorm();
  diag.oos_r2 = base > 0 ? 1.0 - resid.squaredNorm() / base : 0.0;
  return resid;
}

}  // namespace

DmlResult dml_fit(const Design& dz, const DmlSpec& spec, std::uint64_t seed, int threads) {
  if (spec.learner == "random_forest")
    throw DataError("random forest learner is not implemented; use lasso");
  if (spec.learner != "lasso") throw DataError("unknown learner '" + spec.learner + "'");

  const int n = dz.n();
  const int G = dz.n_clusters();
  if (spec.folds < 2) throw DataError("need at least 2 folds");
  if (spec.folds > G) throw DataError("more folds than clusters");

  int target_col = dz.need_col(spec.target);
  std::vector<int> linear_cols;
  for (const std::string& name : spec.linear) {
    if (name == spec.target)
      throw DataError("target '" + spec.target + "' cannot sit in the linear block");
    linear_cols.push_back(dz.need_col(name));
  }
  int const_col = dz.col_index("const");
  if (const_col >= 0 && const_col != target_col &&
      std::find(linear_cols.begin(), linear_cols.end(), const_col) == linear_cols.end())
    linear_cols.push_back(const_col);

  std::vector<int> w_cols;
  for (int j = 0; j < dz.k(); ++j)
    if (j != target_col && std::find(linear_cols.begin(), linear_cols.end(), j) == linear_cols.end())
      w_cols.push_back(j);

  Eigen::VectorXd d = dz.X.col(target_col);
  Eigen::MatrixXd W(n, static_cast<Eigen::Index>(w_cols.size()));
  for (size_t j = 0; j < w_cols.size(); ++j) W.col(static_cast<Eigen::Index>(j)) = dz.X.col(w_cols[j]);

  // Concentrate the linear block out of everything at once.
  Eigen::VectorXd ry = dz.y;
  Eigen::VectorXd rd = d;
  if (!linear_cols.empty()) {
    Eigen::MatrixXd L(n, static_cast<Eigen::Index>(linear_cols.size()));
    for (size_t j = 0; j < linear_cols.size(); ++j)
      L.col(static_cast<Eigen::Index>(j)) = dz.X.col(linear_cols[j]);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
    if (qr.rank() < L.cols()) throw NumericalError("linear block is rank deficient");
    ry -= L * qr.solve(dz.y);
    rd -= L * qr.solve(d);
    if (W.cols() > 0) W -= L * qr.solve(W);
  }

  DmlResult res;
  res.target = spec.target;
  res.n = n;
  res.n_clusters = G;
  res.folds = spec.folds;
  res.seed = seed;
  res.fold_of_cluster = cluster_folds(G, spec.folds, seed);
  for (int j : w_cols) res.nuisance_cols.push_back(dz.cols[static_cast<size_t>(j)].name);

  std::vector<FoldRows> folds(static_cast<size_t>(spec.folds));
  for (int i = 0; i < n; ++i) {
    int f = res.fold_of_cluster[static_cast<size_t>(dz.cluster[static_cast<size_t>(i)])];
    for (int g = 0; g < spec.folds; ++g)
      (g == f ? folds[static_cast<size_t>(g)].out : folds[static_cast<size_t>(g)].in).push_back(i);
  }

  double lam_y = 0, lam_d = 0;
  if (W.cols() > 0) {
    if (spec.lambda >= 0) {
      lam_y = lam_d = spec.lambda;
    } else {
      std::vector<double> grid_y =
          spec.lambda_grid.empty() ? default_lambda_grid(ry, W) : spec.lambda_grid;
      std::vector<double> grid_d =
          spec.lambda_grid.empty() ? default_lambda_grid(rd, W) : spec.lambda_grid;
      lam_y = cv_lambda(ry, W, dz.cluster, G, spec.folds, grid_y, seed, threads);
      lam_d = cv_lambda(rd, W, dz.cluster, G, spec.folds, grid_d, seed, threads);
    }
  }
  Eigen::VectorXd ey = crossfit(ry, W, folds, lam_y, threads, res.outcome);
  Eigen::VectorXd ed = crossfit(rd, W, folds, lam_d, threads, res.treatment);

  double denom = ed.squaredNorm();
  double var_d = d.squaredNorm() / n;
  if (denom / n < 1e-12 * std::max(1.0, var_d))
    throw NumericalError("residualized target '" + spec.target + "' is degenerate");

  res.theta = ed.dot(ey) / denom;
  Eigen::VectorXd u = ey - res.theta * ed;
  Eigen::MatrixXd bread(1, 1);
  bread(0, 0) = 1.0 / denom;
  Eigen::MatrixXd vc = cluster_vcov(ed, u, dz.cluster, G, bread);
  res.se = std::sqrt(vc(0, 0));
  return res;
}

std::string dml_to_json(const DmlResult& r) {
  nlohmann::json j;
  j["target"] = r.target;
  j["theta"] = r.theta;
  j["se"] = r.se;
  j["n"] = r.n;
  j["n_clusters"] = r.n_clusters;
  j["folds"] = r.folds;
  j["seed"] = r.seed;
  j["fold_of_cluster"] = r.fold_of_cluster;
  j["nuisance_cols"] = r.nuisance_cols;
  for (auto [key, diag] : {std::pair<const char*, const NuisanceDiag*>{"outcome", &r.outcome},
                           {"treatment", &r.treatment}}) {
    j[key] = {{"lambda", diag->lambda}, {"nonzero", diag->nonzero}, {"oos_r2", diag->oos_r2}};
  }
  return j.dump(2) + "\n";
}

}  // namespace covidsem
