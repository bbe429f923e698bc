#include "covidsem/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "covidsem/errors.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/rng.hpp"

namespace covidsem {

int LassoFit::nonzero() const {
  int c = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j) c += beta[j] != 0.0;
  return c;
}

Eigen::VectorXd LassoFit::predict(const Eigen::MatrixXd& X) const {
  if (X.cols() != beta.size()) throw DataError("prediction matrix width does not match the fit");
  return (X * beta).array() + intercept;
}

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct Standardized {
  Eigen::MatrixXd Z;     // centered, unit 1/n variance where possible
  Eigen::VectorXd mean;  // column means
  Eigen::VectorXd sd;    // population sd; 0 marks a constant column
};

Standardized standardize(const Eigen::MatrixXd& X) {
  const auto n = X.rows();
  Standardized s;
  s.mean = X.colwise().mean();
  s.Z = X.rowwise() - s.mean.transpose();
  s.sd.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    s.sd[j] = std::sqrt(s.Z.col(j).squaredNorm() / static_cast<double>(n));
    if (s.sd[j] > 0) s.Z.col(j) /= s.sd[j];
  }
  return s;
}

}  // namespace

LassoFit lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda,
               int max_sweeps, double tol) {
  const auto n = y.size();
  if (X.rows() != n) throw DataError("outcome length does not match the design");
  if (n == 0) throw DataError("empty sample");
  if (lambda < 0) throw DataError("penalty must be nonnegative");
  if (!std::isfinite(lambda)) throw DataError("penalty must be finite");

  Standardized s = standardize(X);
  const double ybar = y.mean();
  Eigen::VectorXd r = y.array() - ybar;  // residual of the running fit
  Eigen::VectorXd b = Eigen::VectorXd::Zero(X.cols());

  int sweep = 0;
  bool converged = false;
  const double dn = static_cast<double>(n);
  for (; sweep < max_sweeps && !converged; ++sweep) {
    double worst = 0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (s.sd[j] == 0) continue;
      double zj = s.Z.col(j).dot(r) / dn + b[j];  // unit column variance
      double nj = soft_threshold(zj, lambda);
      if (nj != b[j]) {
        r -= (nj - b[j]) * s.Z.col(j);
        worst = std::max(worst, std::abs(nj - b[j]));
        b[j] = nj;
      }
    }
    converged = worst < tol;
  }
  if (!converged)
    throw NumericalError("lasso did not converge after " + std::to_string(sweep) + " passes");

  LassoFit fit;
  fit.lambda = lambda;
  fit.sweeps = sweep;
  fit.beta.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) fit.beta[j] = s.sd[j] > 0 ? b[j] / s.sd[j] : 0.0;
  fit.intercept = ybar - s.mean.dot(fit.beta);
  return fit;
}

double lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  if (X.rows() != y.size()) throw DataError("outcome length does not match the design");
  if (y.size() == 0) throw DataError("empty sample");
  Standardized s = standardize(X);
  Eigen::VectorXd yc = y.array() - y.mean();
  double m = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (s.sd[j] > 0) m = std::max(m, std::abs(s.Z.col(j).dot(yc)) / static_cast<double>(y.size()));
  return m;
}

std::vector<double> default_lambda_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                        int points, double ratio) {
  if (points < 1) throw DataError("grid needs at least one point");
  if (!(ratio > 0 && ratio <= 1)) throw DataError("grid ratio must lie in (0, 1]");
  double top = lambda_max(y, X);
  if (top == 0) return {0.0};
  std::vector<double> grid(static_cast<size_t>(points));
  for (int i = 0; i < points; ++i) {
    double f = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    grid[static_cast<size_t>(i)] = top * std::pow(ratio, 1.0 - f);
  }
  return grid;
}

std::vector<int> cluster_folds(int n_clusters, int folds, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least 2 folds");
  if (folds > n_clusters) throw DataError("more folds than clusters");
  std::vector<int> order(static_cast<size_t>(n_clusters));
  for (int g = 0; g < n_clusters; ++g) order[static_cast<size_t>(g)] = g;
  Rng rng(seed);
  for (int i = n_clusters - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(rng.bounded(static_cast<std::uint64_t>(i) + 1))]);
  std::vector<int> fold_of(static_cast<size_t>(n_clusters));
  for (int i = 0; i < n_clusters; ++i) fold_of[static_cast<size_t>(order[static_cast<size_t>(i)])] = i % folds;
  return fold_of;
}

double cv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                 const std::vector<int>& cluster, int n_clusters, int folds,
                 const std::vector<double>& grid, std::uint64_t seed, int threads) {
  if (grid.empty()) throw DataError("empty penalty grid");
  if (static_cast<Eigen::Index>(cluster.size()) != y.size())
    throw DataError("cluster ids do not match the sample");
  std::vector<int> fold_of = cluster_folds(n_clusters, folds, seed);

  // Row splits, shared across grid points.
  std::vector<std::vector<int>> in(static_cast<size_t>(folds)), out(static_cast<size_t>(folds));
  for (int f = 0; f < folds; ++f)
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      int g = cluster[static_cast<size_t>(i)];
      if (g < 0 || g >= n_clusters) throw DataError("cluster id out of range");
      (fold_of[static_cast<size_t>(g)] == f ? out : in)[static_cast<size_t>(f)].push_back(
          static_cast<int>(i));
    }
  auto take = [&](const std::vector<int>& rows, const Eigen::VectorXd& v) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) r[static_cast<Eigen::Index>(i)] = v[rows[i]];
    return r;
  };
  auto take_m = [&](const std::vector<int>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
    return m;
  };

  std::vector<double> sse(grid.size(), 0.0);
  std::vector<std::string> errors(grid.size());
  for_each_index(grid.size(), threads, [&](size_t gi) {
    try {
      double total = 0;
      for (int f = 0; f < folds; ++f) {
        LassoFit fit = lasso(take(in[static_cast<size_t>(f)], y), take_m(in[static_cast<size_t>(f)]),
                             grid[gi]);
        Eigen::VectorXd pred = fit.predict(take_m(out[static_cast<size_t>(f)]));
        total += (take(out[static_cast<size_t>(f)], y) - pred).squaredNorm();
      }
      sse[gi] = total;
    } catch (const std::exception& e) {
      errors[gi] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("cross validation failed: " + e);

  // Ascending scan so exact ties resolve to the larger penalty.
  std::vector<size_t> idx(grid.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return grid[a] < grid[b]; });
  double best = grid[idx[0]], best_sse = sse[idx[0]];
  for (size_t i = 1; i < idx.size(); ++i)
    if (sse[idx[i]] <= best_sse) {
      best_sse = sse[idx[i]];
      best = grid[idx[i]];
    }
  return best;
}

}  // namespace covidsem
