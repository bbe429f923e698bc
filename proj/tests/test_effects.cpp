#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "covidsem/effects.hpp"
#include "covidsem/errors.hpp"
#include "covidsem/rng.hpp"

using namespace covidsem;

namespace {

Panel weight_panel() {
  Panel p({"AA", "BB"}, parse_date("2020-04-01"), 15);
  Eigen::MatrixXd& g = p.add_series("grocery");
  Eigen::MatrixXd& t = p.add_series("transit");
  Rng rng(7);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 15; ++j) {
      g(i, j) = -0.5;
      t(i, j) = -0.3 + 0.1 * rng.normal();
    }
  return p;
}

FitResult mini_fit(const std::vector<std::string>& names, const std::vector<double>& beta) {
  FitResult f;
  f.names = names;
  f.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  f.vcov = Eigen::MatrixXd::Zero(f.beta.size(), f.beta.size());
  f.n = 10;
  f.k = static_cast<int>(beta.size());
  return f;
}

BootstrapDraws mini_draws(const FitResult& f, int B) {
  BootstrapDraws d;
  d.names = f.names;
  d.draws = f.beta.transpose().replicate(B, 1);
  return d;
}

// Three-equation system on one row set: y on (b1,b2,p1,p2,w,const), each
// behavior on (p1,p2,w,const), reduced y on the same columns.
struct SystemFixture {
  Design dy, db1, db2, dred;
};

Design bare_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                   const std::vector<std::string>& names, int G) {
  Design d;
  d.y = y;
  d.X = X;
  for (const auto& n : names) d.cols.push_back({n, Block::confounder, true});
  int per = static_cast<int>(y.size()) / G;
  for (int g = 0; g < G; ++g) {
    d.cluster_names.push_back("S" + std::to_string(g));
    for (int r = 0; r < per; ++r) {
      d.cluster.push_back(g);
      d.rows.push_back({g, static_cast<Day>(r)});
    }
  }
  return d;
}

SystemFixture make_system(std::uint64_t seed) {
  const int G = 24, T = 10, n = G * T;
  Rng rng(seed);
  Eigen::MatrixXd P(n, 2), W(n, 2), B(n, 2);
  Eigen::VectorXd y(n);
  for (int g = 0; g < G; ++g) {
    double shock = 0.3 * rng.normal();
    for (int t = 0; t < T; ++t) {
      int r = g * T + t;
      P(r, 0) = t >= 3 + g % 4 ? 1.0 : 0.0;
      P(r, 1) = t >= 5 + g % 3 ? 1.0 : 0.0;
      W(r, 0) = 0.4 * rng.normal() + 0.1 * g;
      W(r, 1) = 1.0;
      B(r, 0) = -0.4 * P(r, 0) - 0.1 * P(r, 1) + 0.2 * W(r, 0) + shock + 0.3 * rng.normal();
      B(r, 1) = -0.2 * P(r, 0) - 0.5 * P(r, 1) - 0.1 * W(r, 0) + shock + 0.3 * rng.normal();
      y[r] = 0.8 * B(r, 0) + 0.5 * B(r, 1) - 0.15 * P(r, 0) - 0.25 * P(r, 1) + 0.3 * W(r, 0) +
             shock + 0.2 * rng.normal();
    }
  }
  Eigen::MatrixXd Xy(n, 6), Xb(n, 4);
  Xy << B, P, W;
  Xb << P, W;
  SystemFixture fx;
  fx.dy = bare_design(y, Xy, {"b1", "b2", "p1", "p2", "w", "const"}, G);
  fx.db1 = bare_design(B.col(0), Xb, {"p1", "p2", "w", "const"}, G);
  fx.db2 = bare_design(B.col(1), Xb, {"p1", "p2", "w", "const"}, G);
  fx.dred = bare_design(y, Xb, {"p1", "p2", "w", "const"}, G);
  return fx;
}

Equations fit_system(const SystemFixture& fx) {
  Equations eq;
  eq.y = fit_cluster_ols(fx.dy, "y");
  eq.behaviors = {"b1", "b2"};
  eq.b = {fit_cluster_ols(fx.db1, "b1"), fit_cluster_ols(fx.db2, "b2")};
  eq.reduced = fit_cluster_ols(fx.dred, "reduced");
  eq.policies = {"p1", "p2"};
  return eq;
}

BehaviorWeights unit_weights() {
  BehaviorWeights w;
  w.names = {"b1", "b2"};
  w.w = Eigen::Vector2d(-0.5, -0.25);
  return w;
}

}  // namespace

TEST_SUITE_BEGIN("effects");

TEST_CASE("behavior weights are national window means") {
  Panel p = weight_panel();
  Day d0 = parse_date("2020-04-01"), d1 = parse_date("2020-04-10");
  BehaviorWeights w = behavior_weights(p, {"grocery", "transit"}, d0, d1);
  CHECK(w.w[0] == doctest::Approx(-0.5).epsilon(1e-15));

  // Brute-force oracle over states and days.
  const Eigen::MatrixXd& t = p.series("transit");
  double sum = 0;
  int cnt = 0;
  for (int i = 0; i < p.n_states(); ++i)
    for (Day d = d0; d <= d1; ++d) {
      sum += t(i, p.day_index(d));
      ++cnt;
    }
  CHECK(cnt == 20);
  CHECK(w.of("transit") == doctest::Approx(sum / cnt).epsilon(1e-15));

  CHECK_THROWS_AS(behavior_weights(p, {"grocery"}, d1, d0), DataError);
  CHECK_THROWS_AS(behavior_weights(p, {"grocery"}, d0, parse_date("2020-05-01")), DataError);
  CHECK_THROWS_AS(w.of("retail"), DataError);
  p.series_mut("transit")(1, 3) = std::nan("");
  CHECK_THROWS_AS(behavior_weights(p, {"transit"}, d0, d1), DataError);
}

TEST_CASE("two-state mean splits the difference") {
  Panel p({"AA", "BB"}, parse_date("2020-04-01"), 10);
  Eigen::MatrixXd& g = p.add_series("grocery");
  g.row(0).setConstant(-0.4);
  g.row(1).setConstant(-0.6);
  BehaviorWeights w =
      behavior_weights(p, {"grocery"}, parse_date("2020-04-01"), parse_date("2020-04-10"));
  CHECK(w.w[0] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("hand decomposition arithmetic") {
  Equations eq;
  eq.y = mini_fit({"b1", "b2", "pol", "const"}, {1.0, 2.0, 0.05, 0.0});
  eq.behaviors = {"b1", "b2"};
  eq.b = {mini_fit({"pol", "const"}, {0.1, 0.0}), mini_fit({"pol", "const"}, {-0.3, 0.0})};
  eq.reduced = mini_fit({"pol", "const"}, {-0.40, 0.0});
  eq.policies = {"pol"};

  PairedEqDraws dr;
  dr.y = mini_draws(eq.y, 3);
  dr.b = {mini_draws(eq.b[0], 3), mini_draws(eq.b[1], 3)};
  dr.reduced = mini_draws(eq.reduced, 3);

  EffectTable t = decompose(eq, unit_weights(), dr);
  const EffectRow* r = t.find("pol");
  REQUIRE(r != nullptr);
  CHECK(r->direct.est == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(r->indirect.est == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(r->total.est == doctest::Approx(-0.45).epsilon(1e-15));
  CHECK(r->reduced.est == doctest::Approx(-0.40).epsilon(1e-15));
  CHECK(r->average.est == doctest::Approx(-0.425).epsilon(1e-15));
  CHECK(r->difference.est == doctest::Approx(0.05).epsilon(1e-14));
  // Constant draws carry zero spread.
  CHECK(r->total.se == 0.0);
  // sum_k w_k alpha_k with w = (-0.5, -0.25).
  CHECK(t.behavior_sum.est == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("zero behavior responses make total equal direct") {
  Equations eq;
  eq.y = mini_fit({"b1", "pol", "const"}, {1.5, 0.07, 0.0});
  eq.behaviors = {"b1"};
  eq.b = {mini_fit({"pol", "const"}, {0.0, 0.2})};
  eq.reduced = mini_fit({"pol", "const"}, {0.07, 0.0});
  eq.policies = {"pol"};
  BehaviorWeights w;
  w.names = {"b1"};
  w.w = Eigen::VectorXd::Constant(1, -1.0);

  PairedEqDraws dr;
  dr.y = mini_draws(eq.y, 2);
  dr.b = {mini_draws(eq.b[0], 2)};
  dr.reduced = mini_draws(eq.reduced, 2);
  EffectTable t = decompose(eq, w, dr);
  CHECK(t.rows[0].indirect.est == 0.0);
  CHECK(t.rows[0].total.est == t.rows[0].direct.est);
}

TEST_CASE("terms absent from an equation are imposed zeros") {
  Equations eq;
  // mask dropped from the behavior equation, business dropped from y.
  eq.y = mini_fit({"b1", "mask", "const"}, {1.0, -0.09, 0.0});
  eq.behaviors = {"b1"};
  eq.b = {mini_fit({"business", "const"}, {-0.2, 0.0})};
  eq.reduced = mini_fit({"mask", "business", "const"}, {-0.08, -0.11, 0.0});
  eq.policies = {"mask", "business"};
  BehaviorWeights w;
  w.names = {"b1"};
  w.w = Eigen::VectorXd::Constant(1, -0.5);

  PairedEqDraws dr;
  dr.y = mini_draws(eq.y, 2);
  dr.b = {mini_draws(eq.b[0], 2)};
  dr.reduced = mini_draws(eq.reduced, 2);
  EffectTable t = decompose(eq, w, dr);

  const EffectRow* mask = t.find("mask");
  CHECK(mask->indirect.est == 0.0);
  CHECK(mask->indirect.se == 0.0);
  CHECK(mask->total.est == mask->direct.est);
  const EffectRow* bus = t.find("business");
  CHECK(bus->direct.est == 0.0);
  CHECK(bus->direct.se == 0.0);
  CHECK(bus->indirect.est == doctest::Approx(-0.2).epsilon(1e-15));

  // A term in no equation at all is a wiring error, not a restriction.
  eq.policies.push_back("phantom");
  CHECK_THROWS_AS(decompose(eq, w, dr), DataError);
}

TEST_CASE("apply_restrictions appends and validates") {
  ModelSpec a;
  a.name = "eq_a";
  a.outcome = {"y", "cum_cases", Transform::weekly_growth, 0, Block::confounder};
  a.terms = {{"mask", "policy_mask", Transform::movavg7, 14, Block::policy},
             {"biz", "policy_biz", Transform::movavg7, 14, Block::policy}};
  ModelSpec b = a;
  b.name = "eq_b";
  auto out = apply_restrictions({a, b}, {{"eq_b", "mask"}, {"eq_b", "mask"}});
  CHECK(out[0].zero_restrictions.empty());
  REQUIRE(out[1].zero_restrictions.size() == 1);
  CHECK(out[1].zero_restrictions[0] == "mask");
  CHECK_THROWS_AS(apply_restrictions({a}, {{"nope", "mask"}}), DataError);
  CHECK_THROWS_AS(apply_restrictions({a}, {{"eq_a", "nope"}}), DataError);
}

TEST_CASE("reduced form on the structural span makes differences vanish") {
  SystemFixture fx = make_system(11);
  Equations eq = fit_system(fx);
  PairedEqDraws dr =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 60, 5, 0);
  EffectTable t = decompose(eq, unit_weights(), dr);

  // OLS projection algebra: a_j = pi_j + sum_k alpha_k beta_kj on shared rows,
  // so the difference column is zero in the points and in every paired draw.
  for (int j = 0; j < t.n_policies; ++j) {
    CHECK(std::fabs(t.rows[static_cast<size_t>(j)].difference.est) < 1e-10);
    CHECK(t.rows[static_cast<size_t>(j)].difference.se < 1e-10);
  }
  EffectRow sum = policy_sum(t);
  CHECK(std::fabs(sum.difference.est) < 1e-10);
  CHECK(sum.difference.se < 1e-10);
}

TEST_CASE("closure holds in every draw and the sums") {
  SystemFixture fx = make_system(23);
  Equations eq = fit_system(fx);
  PairedEqDraws dr =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::multiplier_cluster, 80, 9, 0);
  EffectTable t = decompose(eq, unit_weights(), dr);

  for (const EffectRow& r : t.rows) {
    CHECK(r.total.est == r.direct.est + r.indirect.est);
    CHECK(r.average.est == 0.5 * (r.total.est + r.reduced.est));
  }
  const Eigen::MatrixXd& s = t.policy_draw_sums;
  CHECK(((s.col(0) + s.col(1)) - s.col(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.col(4) - 0.5 * (s.col(2) + s.col(3))).cwiseAbs().maxCoeff() == 0.0);
  EffectRow sum = policy_sum(t);
  CHECK(sum.total.est == sum.direct.est + sum.indirect.est);
  CHECK(sum.average.est == 0.5 * (sum.total.est + sum.reduced.est));
}

TEST_CASE("behavior equation order does not matter") {
  SystemFixture fx = make_system(31);
  Equations eq = fit_system(fx);
  PairedEqDraws dr =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 40, 13, 0);
  EffectTable t1 = decompose(eq, unit_weights(), dr);

  Equations swapped = eq;
  std::swap(swapped.behaviors[0], swapped.behaviors[1]);
  std::swap(swapped.b[0], swapped.b[1]);
  PairedEqDraws dr2 = dr;
  std::swap(dr2.b[0], dr2.b[1]);
  EffectTable t2 = decompose(swapped, unit_weights(), dr2);

  for (size_t i = 0; i < t1.rows.size(); ++i) {
    CHECK(t1.rows[i].indirect.est ==
          doctest::Approx(t2.rows[i].indirect.est).epsilon(1e-14));
    CHECK(t1.rows[i].indirect.se == doctest::Approx(t2.rows[i].indirect.se).epsilon(1e-12));
  }
  CHECK(t1.behavior_sum.est == doctest::Approx(t2.behavior_sum.est).epsilon(1e-14));
}

TEST_CASE("policy sum row adds point estimates") {
  Equations eq;
  eq.y = mini_fit({"b1", "p1", "p2", "const"}, {1.0, 0.1, -0.3, 0.0});
  eq.behaviors = {"b1"};
  eq.b = {mini_fit({"p1", "p2", "const"}, {0.0, 0.0, 0.0})};
  eq.reduced = mini_fit({"p1", "p2", "const"}, {0.1, -0.3, 0.0});
  eq.policies = {"p1", "p2"};
  BehaviorWeights w;
  w.names = {"b1"};
  w.w = Eigen::VectorXd::Constant(1, 1.0);
  PairedEqDraws dr;
  dr.y = mini_draws(eq.y, 2);
  dr.b = {mini_draws(eq.b[0], 2)};
  dr.reduced = mini_draws(eq.reduced, 2);
  EffectRow sum = policy_sum(decompose(eq, w, dr));
  CHECK(sum.direct.est == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(sum.total.est == doctest::Approx(-0.2).epsilon(1e-15));
}

TEST_CASE("paired draws share the resample across equations") {
  SystemFixture fx = make_system(47);
  PairedEqDraws dr =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 50, 21, 0);

  // Per draw, the reduced coefficient must equal pi + sum alpha beta computed
  // from the same replicate, because each replicate refits on shared rows.
  int cp1 = 2;  // p1 in dy columns; p1 is column 0 in db/dred
  for (int r = 0; r < 50; ++r) {
    double pi = dr.y.draws(r, cp1);
    double indirect =
        dr.y.draws(r, 0) * dr.b[0].draws(r, 0) + dr.y.draws(r, 1) * dr.b[1].draws(r, 0);
    CHECK(dr.reduced.draws(r, 0) == doctest::Approx(pi + indirect).epsilon(1e-8));
  }
}

TEST_CASE("paired bootstrap is thread-invariant and seed-sensitive") {
  SystemFixture fx = make_system(53);
  PairedEqDraws a =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 30, 99, 1);
  PairedEqDraws b =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 30, 99, 4);
  CHECK(a.y.draws == b.y.draws);
  CHECK(a.b[0].draws == b.b[0].draws);
  CHECK(a.reduced.draws == b.reduced.draws);
  PairedEqDraws c =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::pairs_cluster, 30, 100, 1);
  CHECK(a.y.draws != c.y.draws);

  Design other = fx.db1;
  other.cluster_names[0] = "ZZ";
  CHECK_THROWS_AS(
      paired_bootstrap(fx.dy, {other, fx.db2}, fx.dred, BootScheme::pairs_cluster, 4, 1, 0),
      DataError);
}

TEST_CASE("effect table serializes to csv and json") {
  SystemFixture fx = make_system(61);
  Equations eq = fit_system(fx);
  eq.information = {"w"};
  PairedEqDraws dr =
      paired_bootstrap(fx.dy, {fx.db1, fx.db2}, fx.dred, BootScheme::multiplier_cluster, 40, 3, 0);
  EffectTable t = decompose(eq, unit_weights(), dr, "fixture");

  std::string csv = effects_to_csv(t);
  size_t lines = static_cast<size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines == 1 + t.rows.size() + 2);  // header, terms, sum, weighted behavior
  CHECK(csv.find("sum_policies") != std::string::npos);
  CHECK(csv.find("sum_weighted_behavior") != std::string::npos);

  std::string js = effects_to_json(t);
  CHECK(js.find("\"label\": \"fixture\"") != std::string::npos);
  CHECK(js.find("\"term\": \"w\"") != std::string::npos);
  CHECK(js.find("multiplier_cluster") != std::string::npos);
}

TEST_SUITE_END();
