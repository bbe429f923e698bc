#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "covidsem/design.hpp"
#include "covidsem/lasso.hpp"

namespace covidsem {

// Partially linear target equation: the named policy coefficient is the
// parameter, the linear block stays parametric and unpenalized, everything
// else in the design (minus the intercept) is the penalized nuisance block.
struct DmlSpec {
  std::string target;
  std::vector<std::string> linear;  // kept linear; the intercept joins implicitly
  int folds = 5;
  std::string learner = "lasso";    // random_forest is declared but not implemented
  std::vector<double> lambda_grid;  // empty: data-driven default grid
  double lambda = -1;               // >= 0 pins the penalty and skips CV
};

struct NuisanceDiag {
  double lambda = 0;
  int nonzero = 0;   // nuisance columns selected in any fold
  double oos_r2 = 0; // pooled out-of-fold fit against the linear baseline
};

struct DmlResult {
  std::string target;
  double theta = 0;
  double se = 0;  // clustered, from the orthogonal moment scores
  int n = 0;
  int n_clusters = 0;
  int folds = 0;
  std::uint64_t seed = 0;
  std::vector<int> fold_of_cluster;
  std::vector<std::string> nuisance_cols;
  NuisanceDiag outcome, treatment;
};

// Cross-fitting with cluster-level folds: the linear block is concentrated
// out of outcome, target and nuisances once on the full sample, the nuisance
// predictions for outcome and target are fit on each fold's complement, and
// theta comes from residual-on-residual least squares over the pooled
// held-out residuals. With no nuisance columns this reduces exactly to the
// OLS coefficient of the target.
DmlResult dml_fit(const Design& dz, const DmlSpec& spec, std::uint64_t seed, int threads = 0);

std::string dml_to_json(const DmlResult& r);

}  // namespace covidsem
