#include "covidsem/estimator.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/rng.hpp"

namespace covidsem {

OlsFit ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
           const std::vector<std::string>* colnames) {
  const int n = static_cast<int>(X.rows());
  const int k = static_cast<int>(X.cols());
  if (n == 0 || k == 0) throw NumericalError("empty design in least squares");
  if (y.size() != n) throw NumericalError("y/X row mismatch");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::string msg = "rank-deficient design in least squares";
    if (colnames) {
      auto perm = qr.colsPermutation().indices();
      msg += "; dependent columns:";
      for (int i = qr.rank(); i < k; ++i)
        msg += " " + (*colnames)[static_cast<size_t>(perm[i])];
    }
    throw NumericalError(msg);
  }

  OlsFit fit;
  fit.beta = qr.solve(y);
  fit.residuals = y - X * fit.beta;

  // (X'X)^-1 from the R factor of the pivoted QR.
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.inverse();
  Eigen::MatrixXd inv_permuted = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  fit.xtx_inv = P * inv_permuted * P.transpose();

  double ssr = fit.residuals.squaredNorm();
  double mean_y = y.mean();
  double sst = (y.array() - mean_y).square().sum();
  fit.r2 = sst > 0 ? 1.0 - ssr / sst : 0.0;
  fit.r2_adj = n > k ? 1.0 - (1.0 - fit.r2) * (n - 1) / double(n - k) : fit.r2;
  return fit;
}

Eigen::MatrixXd cluster_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                             const std::vector<int>& cluster, int n_clusters,
                             const Eigen::MatrixXd& xtx_inv, int k_params) {
  const int n = static_cast<int>(X.rows());
  const int kx = static_cast<int>(X.cols());
  const int k = k_params >= 0 ? k_params : kx;  // dof factor only
  if (n_clusters < 2) throw NumericalError("clustered variance needs at least 2 clusters");
  if (n <= k) throw NumericalError("clustered variance needs n > k");

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, kx);
  for (int r = 0; r < n; ++r)
    scores.row(cluster[static_cast<size_t>(r)]) += residuals[r] * X.row(r);
  Eigen::MatrixXd meat = scores.transpose() * scores;

  double q = double(n_clusters) / (n_clusters - 1) * double(n - 1) / (n - k);
  return q * xtx_inv * meat * xtx_inv;
}

Eigen::VectorXd FitResult::se() const {
  return vcov.diagonal().array().max(0.0).sqrt();
}

int FitResult::col(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

double FitResult::coef(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw DataError("fit has no coefficient '" + name + "'");
  return beta[c];
}

double FitResult::se_of(const std::string& name) const {
  int c = col(name);
  if (c < 0) throw DataError("fit has no coefficient '" + name + "'");
  return std::sqrt(std::max(0.0, vcov(c, c)));
}

FitResult fit_cluster_ols(const Design& dz, const std::string& spec_name) {
  auto names = dz.col_names();
  OlsFit f = ols(dz.y, dz.X, &names);

  FitResult out;
  out.spec_name = spec_name;
  out.names = std::move(names);
  out.beta = f.beta;
  out.vcov = cluster_vcov(dz.X, f.residuals, dz.cluster, dz.n_clusters(), f.xtx_inv);
  out.residuals = f.residuals;
  out.n = dz.n();
  out.k = dz.k();
  out.n_clusters = dz.n_clusters();
  out.r2 = f.r2;
  out.r2_adj = f.r2_adj;
  return out;
}

std::string significance_stars(double estimate, double se) {
  // Zero variance: an exact nonzero estimate, or a coefficient pinned to 0.
  if (se <= 0) return estimate != 0.0 ? "***" : "";
  double z = std::fabs(estimate / se);
  if (z > 2.5758293035489004) return "***";  // 1%
  if (z > 1.959963984540054) return "**";    // 5%
  if (z > 1.6448536269514722) return "*";    // 10%
  return "";
}

std::string fit_to_json(const FitResult& fit) {
  nlohmann::json j;
  j["spec"] = fit.spec_name;
  j["n"] = fit.n;
  j["k"] = fit.k;
  j["n_clusters"] = fit.n_clusters;
  j["r2"] = fit.r2;
  j["r2_adj"] = fit.r2_adj;
  auto coefs = nlohmann::json::array();
  Eigen::VectorXd se = fit.se();
  for (size_t i = 0; i < fit.names.size(); ++i) {
    int c = static_cast<int>(i);
    coefs.push_back({{"term", fit.names[i]},
                     {"estimate", fit.beta[c]},
                     {"se", se[c]},
                     {"stars", significance_stars(fit.beta[c], se[c])}});
  }
  j["coefficients"] = coefs;
  auto vc = nlohmann::json::array();
  for (int r = 0; r < fit.vcov.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (int c = 0; c < fit.vcov.cols(); ++c) row.push_back(fit.vcov(r, c));
    vc.push_back(row);
  }
  j["vcov"] = vc;
  return j.dump(2) + "\n";
}

std::string fit_to_csv(const FitResult& fit) {
  std::string out = "term,estimate,se,z,stars\n";
  Eigen::VectorXd se = fit.se();
  for (size_t i = 0; i < fit.names.size(); ++i) {
    int c = static_cast<int>(i);
    double z = se[c] > 0 ? fit.beta[c] / se[c] : 0.0;
    out += csv_escape(fit.names[i]) + "," + fmt_double(fit.beta[c]) + "," +
           fmt_double(se[c]) + "," + fmt_double(z) + "," +
           significance_stars(fit.beta[c], se[c]) + "\n";
  }
  return out;
}

BootScheme boot_scheme_from_name(const std::string& s) {
  if (s == "pairs_cluster") return BootScheme::pairs_cluster;
  if (s == "multiplier_cluster") return BootScheme::multiplier_cluster;
  if (s == "gaussian_asymptotic") return BootScheme::gaussian_asymptotic;
  throw DataError("unknown bootstrap scheme '" + s + "'");
}

std::string boot_scheme_name(BootScheme s) {
  switch (s) {
    case BootScheme::pairs_cluster: return "pairs_cluster";
    case BootScheme::multiplier_cluster: return "multiplier_cluster";
    case BootScheme::gaussian_asymptotic: return "gaussian_asymptotic";
  }
  return "gaussian_asymptotic";
}

Eigen::VectorXd BootstrapDraws::se() const {
  const Eigen::Index B = draws.rows();
  Eigen::VectorXd out(draws.cols());
  for (Eigen::Index c = 0; c < draws.cols(); ++c) {
    double mean = draws.col(c).mean();
    out[c] = B > 1 ? std::sqrt((draws.col(c).array() - mean).square().sum() / double(B - 1))
                   : 0.0;
  }
  return out;
}

// Matrix square root via symmetric eigendecomposition; negative eigenvalues
// within roundoff of zero are clipped.
static Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& V, bool* clipped) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  bool any_clip = false;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0) {
      if (ev[i] < -1e-8 * scale) any_clip = true;
      ev[i] = 0;
    }
  }
  if (clipped) *clipped = any_clip;
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd draw_coefficients(const FitResult& fit, int B, std::uint64_t seed,
                                  bool* clipped) {
  const int k = static_cast<int>(fit.beta.size());
  Eigen::MatrixXd L = psd_sqrt(fit.vcov, clipped);
  Eigen::MatrixXd out(B, k);
  for (int b = 0; b < B; ++b) {
    Rng rng(replicate_seed(seed, static_cast<std::uint64_t>(b)));
    Eigen::VectorXd z(k);
    for (int i = 0; i < k; ++i) z[i] = rng.normal();
    out.row(b) = (fit.beta + L * z).transpose();
  }
  return out;
}

BootstrapDraws bootstrap(const Design& dz, BootScheme scheme, int B, std::uint64_t seed,
                         int threads) {
  if (B < 1) throw DataError("bootstrap needs B >= 1");
  BootstrapDraws out;
  out.scheme = scheme;
  out.seed = seed;
  out.names = dz.col_names();
  out.draws.resize(B, dz.k());

  if (scheme == BootScheme::gaussian_asymptotic) {
    FitResult fit = fit_cluster_ols(dz);
    out.draws = draw_coefficients(fit, B, seed);
    return out;
  }

  const int G = dz.n_clusters();
  OlsFit base = ols(dz.y, dz.X, nullptr);

  // Per-cluster score sums for the multiplier scheme.
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(G, dz.k());
  if (scheme == BootScheme::multiplier_cluster) {
    for (int r = 0; r < dz.n(); ++r)
      scores.row(dz.cluster[static_cast<size_t>(r)]) += base.residuals[r] * dz.X.row(r);
  }

  std::vector<std::string> errors(static_cast<size_t>(B));
  for_each_index(static_cast<size_t>(B), threads, [&](size_t b) {
    try {
      if (scheme == BootScheme::multiplier_cluster) {
        Rng rng(replicate_seed(seed, b));
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(dz.k());
        for (int g = 0; g < G; ++g) sum += rng.normal() * scores.row(g).transpose();
        out.draws.row(static_cast<Eigen::Index>(b)) =
            (base.beta + base.xtx_inv * sum).transpose();
        return;
      }
      // pairs_cluster: resample G clusters with replacement, refit. A
      // degenerate resample gets a fresh sub-seed, up to 10 retries each
      // (10B total across replicates in the worst case).
      for (int attempt = 0;; ++attempt) {
        Rng rng(replicate_seed(seed, b + static_cast<std::uint64_t>(attempt) * 0x10000000ULL));
        std::vector<int> ids(static_cast<size_t>(G));
        for (int g = 0; g < G; ++g)
          ids[static_cast<size_t>(g)] = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(G)));
        try {
          Design res = dz.rows_for_clusters(ids);
          OlsFit f = ols(res.y, res.X, nullptr);
          out.draws.row(static_cast<Eigen::Index>(b)) = f.beta.transpose();
          return;
        } catch (const NumericalError&) {
          if (attempt >= 9) throw NumericalError("bootstrap replicate " + std::to_string(b) +
                                                 " degenerate after 10 retries");
        }
      }
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("bootstrap failed: " + e);
  return out;
}

}  // namespace covidsem
