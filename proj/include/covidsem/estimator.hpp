#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "covidsem/design.hpp"

namespace covidsem {

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;  // (X'X)^-1, the sandwich bread
  double r2 = 0;
  double r2_adj = 0;
};

// Least squares via column-pivoted QR; throws NumericalError on rank
// deficiency, naming the dependent columns when names are supplied.
OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
           const std::vector<std::string>* colnames = nullptr);

// Cluster-robust sandwich with the G/(G-1) * (n-1)/(n-k) small-sample
// factor. Singleton clusters reduce to the heteroskedasticity-robust case.
// k_params overrides the parameter count in the factor when effects were
// absorbed outside X (fixed-effects demeaning); -1 means X.cols().
Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster, int n_clusters,
                             const Eigen::MatrixXd& xtx_inv, int k_params = -1);

struct FitResult {
  std::string spec_name;
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd residuals;
  int n = 0;
  int k = 0;
  int n_clusters = 0;
  double r2 = 0;
  double r2_adj = 0;

  Eigen::VectorXd se() const;
  double coef(const std::string& name) const;   // throws on unknown name
  double se_of(const std::string& name) const;
  int col(const std::string& name) const;       // -1 when absent
};

FitResult fit_cluster_ols(const Design& dz, const std::string& spec_name = "");

std::string fit_to_json(const FitResult& fit);
// Columns: term,estimate,se,z,stars. Stars at the 10/5/1% two-sided levels.
std::string fit_to_csv(const FitResult& fit);
std::string significance_stars(double estimate, double se);

enum class BootScheme { pairs_cluster, multiplier_cluster, gaussian_asymptotic };
BootScheme boot_scheme_from_name(const std::string& s);
std::string boot_scheme_name(BootScheme s);

struct BootstrapDraws {
  BootScheme scheme = BootScheme::gaussian_asymptotic;
  std::uint64_t seed = 0;
  std::vector<std::string> names;
  Eigen::MatrixXd draws;  // B x k

  Eigen::VectorXd se() const;  // column standard deviations
};

// B refits or score draws, one deterministic RNG stream per replicate, so
// results are identical at any thread count. Degenerate pairs resamples are
// retried with fresh sub-seeds, at most 10*B retries in total.
BootstrapDraws bootstrap(const Design& dz, BootScheme scheme, int B, std::uint64_t seed,
                         int threads);

// Gaussian draws from N(beta, vcov). A vcov that is not PSD (within
// tolerance) is projected onto the PSD cone; `clipped` reports whether any
// eigenvalue was raised to zero.
Eigen::MatrixXd draw_coefficients(const FitResult& fit, int B, std::uint64_t seed,
                                  bool* clipped = nullptr);

}  // namespace covidsem
