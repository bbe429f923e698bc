#include "covidsem/effects.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covidsem/csv.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/parallel.hpp"
#include "covidsem/rng.hpp"

namespace covidsem {

double BehaviorWeights::of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return w[static_cast<Eigen::Index>(i)];
  throw DataError("no behavior weight for '" + name + "'");
}

BehaviorWeights behavior_weights(const Panel& panel, const std::vector<std::string>& series,
                                 Day window_start, Day window_end) {
  if (window_end < window_start)
    throw DataError("behavior weight window is empty: " + format_date(window_start) + " .. " +
                    format_date(window_end));
  if (!panel.contains_day(window_start) || !panel.contains_day(window_end))
    throw DataError("behavior weight window leaves the panel date range");
  if (series.empty()) throw DataError("behavior weight series list is empty");

  BehaviorWeights out;
  out.names = series;
  out.window_start = window_start;
  out.window_end = window_end;
  out.w.resize(static_cast<Eigen::Index>(series.size()));
  int j0 = panel.day_index(window_start);
  int j1 = panel.day_index(window_end);
  for (size_t k = 0; k < series.size(); ++k) {
    const Eigen::MatrixXd& m = panel.series(series[k]);
    double sum = 0;
    for (int i = 0; i < panel.n_states(); ++i)
      for (int j = j0; j <= j1; ++j) sum += m(i, j);
    double w = sum / (panel.n_states() * (j1 - j0 + 1));
    if (!std::isfinite(w))
      throw DataError("behavior series '" + series[k] + "' has missing values in the window");
    out.w[static_cast<Eigen::Index>(k)] = w;
  }
  return out;
}

std::vector<ModelSpec> apply_restrictions(std::vector<ModelSpec> specs,
                                          const std::vector<Restriction>& restrictions) {
  for (const Restriction& r : restrictions) {
    ModelSpec* spec = nullptr;
    for (ModelSpec& s : specs)
      if (s.name == r.spec) spec = &s;
    if (!spec) throw DataError("restriction names unknown spec '" + r.spec + "'");
    if (!spec->find_term(r.term))
      throw DataError("restriction names unknown term '" + r.term + "' in spec '" + r.spec + "'");
    if (std::find(spec->zero_restrictions.begin(), spec->zero_restrictions.end(), r.term) ==
        spec->zero_restrictions.end())
      spec->zero_restrictions.push_back(r.term);
  }
  return specs;
}

namespace {

void check_same_clusters(const Design& a, const Design& b, const std::string& what) {
  if (a.cluster_names != b.cluster_names)
    throw DataError("paired bootstrap needs one cluster universe; " + what + " differs");
}

BootstrapDraws empty_draws(const Design& dz, BootScheme scheme, std::uint64_t seed, int B) {
  BootstrapDraws d;
  d.scheme = scheme;
  d.seed = seed;
  d.names = dz.col_names();
  d.draws.resize(B, dz.k());
  return d;
}

struct ScoreCache {
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtx_inv;
  Eigen::MatrixXd scores;  // G x k
};

ScoreCache score_cache(const Design& dz) {
  ScoreCache c;
  OlsFit f = ols(dz.y, dz.X, nullptr);
  c.beta = f.beta;
  c.xtx_inv = f.xtx_inv;
  c.scores = Eigen::MatrixXd::Zero(dz.n_clusters(), dz.k());
  for (int r = 0; r < dz.n(); ++r)
    c.scores.row(dz.cluster[static_cast<size_t>(r)]) += f.residuals[r] * dz.X.row(r);
  return c;
}

}  // namespace

PairedEqDraws paired_bootstrap(const Design& dy, const std::vector<Design>& db,
                               const Design& dreduced, BootScheme scheme, int B,
                               std::uint64_t seed, int threads) {
  if (B < 1) throw DataError("paired bootstrap needs B >= 1");
  check_same_clusters(dy, dreduced, "reduced form");
  for (size_t k = 0; k < db.size(); ++k)
    check_same_clusters(dy, db[k], "behavior equation " + std::to_string(k));

  PairedEqDraws out;
  out.scheme = scheme;
  out.seed = seed;

  if (scheme == BootScheme::gaussian_asymptotic) {
    out.y = bootstrap(dy, scheme, B, replicate_seed(seed, 0), threads);
    out.b.reserve(db.size());
    for (size_t k = 0; k < db.size(); ++k)
      out.b.push_back(bootstrap(db[k], scheme, B, replicate_seed(seed, 1 + k), threads));
    out.reduced = bootstrap(dreduced, scheme, B, replicate_seed(seed, 1 + db.size()), threads);
    return out;
  }

  out.y = empty_draws(dy, scheme, seed, B);
  out.b.reserve(db.size());
  for (const Design& d : db) out.b.push_back(empty_draws(d, scheme, seed, B));
  out.reduced = empty_draws(dreduced, scheme, seed, B);

  const int G = dy.n_clusters();
  std::vector<ScoreCache> caches;
  if (scheme == BootScheme::multiplier_cluster) {
    caches.reserve(db.size() + 2);
    caches.push_back(score_cache(dy));
    for (const Design& d : db) caches.push_back(score_cache(d));
    caches.push_back(score_cache(dreduced));
  }

  std::vector<std::string> errors(static_cast<size_t>(B));
  for_each_index(static_cast<size_t>(B), threads, [&](size_t rep) {
    auto row = static_cast<Eigen::Index>(rep);
    try {
      if (scheme == BootScheme::multiplier_cluster) {
        // One weight per cluster, shared by every equation in the replicate.
        Rng rng(replicate_seed(seed, rep));
        Eigen::VectorXd wt(G);
        for (int g = 0; g < G; ++g) wt[g] = rng.normal();
        size_t c = 0;
        auto fill = [&](BootstrapDraws& dst) {
          const ScoreCache& sc = caches[c++];
          dst.draws.row(row) = (sc.beta + sc.xtx_inv * (sc.scores.transpose() * wt)).transpose();
        };
        fill(out.y);
        for (auto& d : out.b) fill(d);
        fill(out.reduced);
        return;
      }
      // pairs_cluster: one resample per replicate, every equation refit on
      // it. A resample degenerate for any equation is redrawn for all.
      for (int attempt = 0;; ++attempt) {
        Rng rng(replicate_seed(seed, rep + static_cast<std::uint64_t>(attempt) * 0x10000000ULL));
        std::vector<int> ids(static_cast<size_t>(G));
        for (int g = 0; g < G; ++g)
          ids[static_cast<size_t>(g)] =
              static_cast<int>(rng.bounded(static_cast<std::uint64_t>(G)));
        try {
          auto refit = [&](const Design& dz, BootstrapDraws& dst) {
            Design res = dz.rows_for_clusters(ids);
            dst.draws.row(row) = ols(res.y, res.X, nullptr).beta.transpose();
          };
          refit(dy, out.y);
          for (size_t k = 0; k < db.size(); ++k) refit(db[k], out.b[k]);
          refit(dreduced, out.reduced);
          return;
        } catch (const NumericalError&) {
          if (attempt >= 9)
            throw NumericalError("paired bootstrap replicate " + std::to_string(rep) +
                                 " degenerate after 10 retries");
        }
      }
    } catch (const std::exception& e) {
      errors[rep] = e.what();
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("paired bootstrap failed: " + e);
  return out;
}

namespace {

// Column of `name` in the fit, or -1 for an imposed zero.
int coef_col(const FitResult& fit, const BootstrapDraws& draws, const std::string& name) {
  if (fit.names != draws.names)
    throw DataError("coefficient draws do not match fit '" + fit.spec_name + "'");
  return fit.col(name);
}

double sd(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0;
  double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / (v.size() - 1));
}

constexpr int kStatCols = 6;  // direct, indirect, total, reduced, average, difference

void fill_row(EffectRow& row, const Eigen::VectorXd& point, const Eigen::MatrixXd& draws) {
  EffectStat* stats[kStatCols] = {&row.direct,  &row.indirect, &row.total,
                                  &row.reduced, &row.average,  &row.difference};
  for (int c = 0; c < kStatCols; ++c) {
    stats[c]->est = point[c];
    stats[c]->se = sd(draws.col(c));
  }
}

}  // namespace

const EffectRow* EffectTable::find(const std::string& name) const {
  for (const EffectRow& r : rows)
    if (r.name == name) return &r;
  return nullptr;
}

EffectTable decompose(const Equations& eq, const BehaviorWeights& weights,
                      const PairedEqDraws& draws, const std::string& label) {
  if (eq.behaviors.size() != eq.b.size())
    throw DataError("decompose: behavior name/equation count mismatch");
  if (eq.b.size() != draws.b.size())
    throw DataError("decompose: behavior draw/equation count mismatch");
  const int B = draws.n_draws();
  if (B < 2) throw DataError("decompose needs at least 2 draws");
  if (draws.reduced.draws.rows() != B) throw DataError("decompose: draw counts differ");
  for (const auto& d : draws.b)
    if (d.draws.rows() != B) throw DataError("decompose: draw counts differ");

  const size_t nb = eq.behaviors.size();
  std::vector<int> alpha_col(nb), w_col(nb);
  for (size_t k = 0; k < nb; ++k) {
    alpha_col[k] = coef_col(eq.y, draws.y, eq.behaviors[k]);
    if (alpha_col[k] < 0)
      throw DataError("behavior '" + eq.behaviors[k] + "' missing from the outcome equation");
    weights.of(eq.behaviors[k]);  // unknown name throws here
  }

  EffectTable table;
  table.label = label;
  table.scheme = draws.scheme;
  table.seed = draws.seed;
  table.n_draws = B;
  table.behaviors = eq.behaviors;
  table.n_policies = static_cast<int>(eq.policies.size());

  // alpha draws once; every row's indirect term reuses them.
  Eigen::MatrixXd alpha_draws(B, static_cast<Eigen::Index>(nb));
  Eigen::VectorXd alpha_point(static_cast<Eigen::Index>(nb));
  for (size_t k = 0; k < nb; ++k) {
    alpha_point[static_cast<Eigen::Index>(k)] = eq.y.beta[alpha_col[k]];
    alpha_draws.col(static_cast<Eigen::Index>(k)) = draws.y.draws.col(alpha_col[k]);
  }

  Eigen::MatrixXd sum_draws = Eigen::MatrixXd::Zero(B, kStatCols);

  std::vector<std::string> names = eq.policies;
  names.insert(names.end(), eq.information.begin(), eq.information.end());
  for (size_t idx = 0; idx < names.size(); ++idx) {
    const std::string& name = names[idx];
    bool is_policy = idx < eq.policies.size();
    int cy = coef_col(eq.y, draws.y, name);
    int cr = coef_col(eq.reduced, draws.reduced, name);
    std::vector<int> cb(nb);
    bool anywhere = cy >= 0 || cr >= 0;
    for (size_t k = 0; k < nb; ++k) {
      cb[k] = coef_col(eq.b[k], draws.b[k], name);
      anywhere = anywhere || cb[k] >= 0;
    }
    if (!anywhere) throw DataError("term '" + name + "' is missing from every equation");

    Eigen::VectorXd point(kStatCols);
    Eigen::MatrixXd rowdraws(B, kStatCols);
    double direct = cy >= 0 ? eq.y.beta[cy] : 0.0;
    double indirect = 0;
    for (size_t k = 0; k < nb; ++k)
      if (cb[k] >= 0) indirect += alpha_point[static_cast<Eigen::Index>(k)] * eq.b[k].beta[cb[k]];
    double reduced = cr >= 0 ? eq.reduced.beta[cr] : 0.0;
    point << direct, indirect, direct + indirect, reduced,
        0.5 * ((direct + indirect) + reduced), reduced - (direct + indirect);

    Eigen::VectorXd d_direct =
        cy >= 0 ? Eigen::VectorXd(draws.y.draws.col(cy)) : Eigen::VectorXd::Zero(B);
    Eigen::VectorXd d_indirect = Eigen::VectorXd::Zero(B);
    for (size_t k = 0; k < nb; ++k)
      if (cb[k] >= 0)
        d_indirect.array() += alpha_draws.col(static_cast<Eigen::Index>(k)).array() *
                              draws.b[k].draws.col(cb[k]).array();
    Eigen::VectorXd d_reduced =
        cr >= 0 ? Eigen::VectorXd(draws.reduced.draws.col(cr)) : Eigen::VectorXd::Zero(B);
    rowdraws.col(0) = d_direct;
    rowdraws.col(1) = d_indirect;
    rowdraws.col(2) = d_direct + d_indirect;
    rowdraws.col(3) = d_reduced;
    rowdraws.col(4) = 0.5 * (rowdraws.col(2) + d_reduced);
    rowdraws.col(5) = d_reduced - rowdraws.col(2);

    EffectRow row;
    row.name = name;
    fill_row(row, point, rowdraws);
    table.rows.push_back(row);
    if (is_policy) sum_draws += rowdraws;
  }
  // Re-derive the composite columns so closure stays exact for the sum row
  // (summing pre-composed columns regroups the additions).
  sum_draws.col(2) = sum_draws.col(0) + sum_draws.col(1);
  sum_draws.col(4) = 0.5 * (sum_draws.col(2) + sum_draws.col(3));
  sum_draws.col(5) = sum_draws.col(3) - sum_draws.col(2);
  table.policy_draw_sums = sum_draws;

  Eigen::VectorXd bs_draws = Eigen::VectorXd::Zero(B);
  double bs_point = 0;
  for (size_t k = 0; k < nb; ++k) {
    double w = weights.of(eq.behaviors[k]);
    bs_point += w * alpha_point[static_cast<Eigen::Index>(k)];
    bs_draws += w * alpha_draws.col(static_cast<Eigen::Index>(k));
  }
  table.behavior_sum = {bs_point, sd(bs_draws)};
  return table;
}

EffectRow policy_sum(const EffectTable& table) {
  EffectRow row;
  row.name = "sum_policies";
  Eigen::VectorXd point = Eigen::VectorXd::Zero(kStatCols);
  for (int i = 0; i < table.n_policies; ++i) {
    const EffectRow& r = table.rows[static_cast<size_t>(i)];
    point[0] += r.direct.est;
    point[1] += r.indirect.est;
    point[3] += r.reduced.est;
  }
  point[2] = point[0] + point[1];
  point[4] = 0.5 * (point[2] + point[3]);
  point[5] = point[3] - point[2];
  fill_row(row, point, table.policy_draw_sums);
  return row;
}

namespace {

void csv_stats(std::ostringstream& out, const EffectRow& r) {
  const EffectStat* stats[kStatCols] = {&r.direct,  &r.indirect, &r.total,
                                        &r.reduced, &r.average,  &r.difference};
  for (int c = 0; c < kStatCols; ++c)
    out << ',' << fmt_double(stats[c]->est) << ',' << fmt_double(stats[c]->se);
  out << '\n';
}

nlohmann::json stat_json(const EffectStat& s) {
  return {{"estimate", s.est}, {"se", s.se}};
}

nlohmann::json row_json(const EffectRow& r) {
  return {{"term", r.name},           {"direct", stat_json(r.direct)},
          {"indirect", stat_json(r.indirect)}, {"total", stat_json(r.total)},
          {"reduced", stat_json(r.reduced)},   {"average", stat_json(r.average)},
          {"difference", stat_json(r.difference)}};
}

}  // namespace

std::string effects_to_csv(const EffectTable& table) {
  std::ostringstream out;
  out << "term,direct,direct_se,indirect,indirect_se,total,total_se,"
         "reduced,reduced_se,average,average_se,difference,difference_se\n";
  for (const EffectRow& r : table.rows) {
    out << csv_escape(r.name);
    csv_stats(out, r);
  }
  EffectRow sum = policy_sum(table);
  out << sum.name;
  csv_stats(out, sum);
  out << "sum_weighted_behavior," << fmt_double(table.behavior_sum.est) << ','
      << fmt_double(table.behavior_sum.se) << ",,,,,,,,,,\n";
  return out.str();
}

std::string effects_to_json(const EffectTable& table) {
  nlohmann::json j;
  j["label"] = table.label;
  j["scheme"] = boot_scheme_name(table.scheme);
  j["seed"] = table.seed;
  j["n_draws"] = table.n_draws;
  j["n_policies"] = table.n_policies;
  j["behaviors"] = table.behaviors;
  auto rows = nlohmann::json::array();
  for (const EffectRow& r : table.rows) rows.push_back(row_json(r));
  j["rows"] = rows;
  j["policy_sum"] = row_json(policy_sum(table));
  j["weighted_behavior_sum"] = stat_json(table.behavior_sum);
  return j.dump(2) + "\n";
}

}  // namespace covidsem
