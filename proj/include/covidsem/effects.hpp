#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "covidsem/estimator.hpp"
#include "covidsem/panel.hpp"

namespace covidsem {

// National means of behavior series over a date window; the weights of the
// weighted behavior-coefficient sum.
struct BehaviorWeights {
  std::vector<std::string> names;
  Eigen::VectorXd w;
  Day window_start = 0;
  Day window_end = 0;

  double of(const std::string& name) const;  // throws on unknown name
};

// w_k = mean of series k over all states and the window days, inclusive.
// Empty window, window outside the panel, or NaN slots throw DataError.
BehaviorWeights behavior_weights(const Panel& panel, const std::vector<std::string>& series,
                                 Day window_start, Day window_end);

// Zero restriction on one term of one named spec.
struct Restriction {
  std::string spec;
  std::string term;
};

// Appends to zero_restrictions; unknown spec or term names throw DataError.
std::vector<ModelSpec> apply_restrictions(std::vector<ModelSpec> specs,
                                          const std::vector<Restriction>& restrictions);

// Fitted system behind one decomposition: the outcome equation on
// behavior+policy+information, one equation per behavior on
// policy+information, and the reduced form outcome on policy+information.
struct Equations {
  FitResult y;
  std::vector<std::string> behaviors;  // term names in `y`, index-paired with b
  std::vector<FitResult> b;
  FitResult reduced;
  std::vector<std::string> policies;
  std::vector<std::string> information;
};

// Coefficient draws for every equation. The cluster schemes share one
// resample (or one weight vector) across equations within a replicate, so
// cross-equation covariances survive into derived statistics.
// gaussian_asymptotic draws each equation independently.
struct PairedEqDraws {
  BootScheme scheme = BootScheme::pairs_cluster;
  std::uint64_t seed = 0;
  BootstrapDraws y;
  std::vector<BootstrapDraws> b;
  BootstrapDraws reduced;

  int n_draws() const { return static_cast<int>(y.draws.rows()); }
};

// All designs must share one cluster universe (same id -> state mapping).
PairedEqDraws paired_bootstrap(const Design& dy, const std::vector<Design>& db,
                               const Design& dreduced, BootScheme scheme, int B,
                               std::uint64_t seed, int threads);

struct EffectStat {
  double est = 0;
  double se = 0;
};

// One decomposition row. direct holds behavior fixed, indirect runs through
// the behavior equations, total = direct + indirect, reduced is the
// reduced-form coefficient, average the midpoint of total and reduced, and
// difference = reduced - total (zero when the reduced design spans the
// structural one on identical rows).
struct EffectRow {
  std::string name;
  EffectStat direct, indirect, total, reduced, average, difference;
};

struct EffectTable {
  std::string label;
  BootScheme scheme = BootScheme::pairs_cluster;
  std::uint64_t seed = 0;
  int n_draws = 0;
  std::vector<EffectRow> rows;  // policies first, then information terms
  int n_policies = 0;
  std::vector<std::string> behaviors;
  EffectStat behavior_sum;           // sum_k w_k alpha_k
  Eigen::MatrixXd policy_draw_sums;  // B x 6 per-draw policy-block column sums

  const EffectRow* find(const std::string& name) const;  // nullptr when absent
};

// Point estimates come from the fits, SEs are draw standard deviations. A
// term absent from an equation's columns is an imposed zero: exact 0.0 with
// zero variance. total = direct + indirect and average = (total + reduced)/2
// hold exactly in the point estimates and in every draw.
EffectTable decompose(const Equations& eq, const BehaviorWeights& weights,
                      const PairedEqDraws& draws, const std::string& label = "");

// Sum of the policy rows; SE propagated through the stored per-draw sums.
EffectRow policy_sum(const EffectTable& table);

// Wide layout, one row per term plus the policy-sum and weighted-behavior
// rows; cells without a defined value stay empty.
std::string effects_to_csv(const EffectTable& table);
std::string effects_to_json(const EffectTable& table);

}  // namespace covidsem
