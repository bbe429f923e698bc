#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace covidsem {

struct LassoFit {
  Eigen::VectorXd beta;  // original scale, one entry per X column
  double intercept = 0;
  double lambda = 0;
  int sweeps = 0;  // coordinate passes until convergence

  int nonzero() const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
};

// Coordinate descent for 1/(2n)||y - a - Xb||^2 + lambda*||b||_1 with
// columns standardized internally and an unpenalized intercept. Coefficients
// come back on the original scale; constant columns get coefficient zero.
// Converged when no standardized coefficient moves more than `tol` in a full
// pass; throws NumericalError with the pass count otherwise.
LassoFit lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, double lambda,
               int max_sweeps = 100000, double tol = 1e-8);

// Smallest penalty whose solution is all zero: max_j |x_j'(y - ybar)|/n over
// the standardized columns.
double lambda_max(const Eigen::VectorXd& y, const Eigen::MatrixXd& X);

// Log-spaced ascending grid from ratio*lambda_max up to lambda_max.
std::vector<double> default_lambda_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                        int points = 20, double ratio = 1e-3);

// Deterministic partition of clusters into folds: ids shuffled by seed, then
// dealt round robin. Sizes differ by at most one.
std::vector<int> cluster_folds(int n_clusters, int folds, std::uint64_t seed);

// Cluster-level K-fold cross validation: the penalty with the smallest
// pooled held-out squared error wins, ties going to the larger penalty.
double cv_lambda(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                 const std::vector<int>& cluster, int n_clusters, int folds,
                 const std::vector<double>& grid, std::uint64_t seed, int threads = 0);

}  // namespace covidsem
