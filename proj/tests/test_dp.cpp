#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "robustdp/dp.hpp"
#include "robustdp/errors.hpp"
#include "robustdp/geometry.hpp"
#include "robustdp/recipes.hpp"
#include "support/nested_oracle.hpp"
#include "support/random_instance.hpp"

using namespace robustdp;

namespace {

const RandomUtility kLp = RandomUtility::deterministic(ScalarUtility::linear_power(0.75));

double fin(ExtReal v) { return v.value(); }

Market three_diracs() {
  return make_market(1, 1,
                     {{"r", 0, std::nullopt, {0.0}}, {"m", 1, "r", {-1.0}}, {"z", 1, "r", {0.0}}, {"p", 1, "r", {1.0}}},
                     {{"r", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}});
}

Market flat_market() {
  return make_market(2, 1,
                     {{"r", 0, std::nullopt, {1.0}}, {"a", 1, "r", {1.0}}, {"b", 1, "r", {1.0}}, {"aa", 2, "a", {1.0}},
                      {"bb", 2, "b", {1.0}}},
                     {{"r", {{0.5, 0.5}, {0.2, 0.8}}}, {"a", {{1.0}}}, {"b", {{1.0}}}});
}

AECertificate constant_certificate(const Market& m, double c, double gamma = 0.875) {
  AECertificate cert;
  cert.gamma = gamma;
  cert.side = gamma < 1.0 ? Side::plus_infinity : Side::minus_infinity;
  for (NodeIndex leaf : m.tree.leaves()) cert.C_of_leaf[m.tree.node(leaf).id] = c;
  return cert;
}

ProductPriorSpec random_H_prior(const Market& m, std::mt19937_64& rng) {
  ProductPriorSpec q;
  q.kernel.resize(m.tree.size());
  q.extreme_choice.assign(m.tree.size(), -1);
  Vec lambdas(m.tree.size(), 1.0);
  std::uniform_real_distribution<double> lam(0.1, 1.0);
  for (NodeIndex i : m.tree.interior()) {
    const auto& ex = m.extremes(i);
    std::size_t e = rng() % ex.size();
    q.kernel[i] = ex[e];
    q.extreme_choice[i] = static_cast<int>(e);
    lambdas[i] = lam(rng);
  }
  return build_H_prior(m, q, lambdas);
}

}  // namespace

TEST(BuildPStar, Examples) {
  Instance r9 = remark9_market({0.8, 0.3}, 0.75);
  ProductPriorSpec p = build_p_star(r9.market);
  NodeIndex n0 = r9.market.tree.index_of("n0");
  ASSERT_EQ(p.kernel[n0].size(), 2u);
  EXPECT_NEAR(p.kernel[n0][0], 0.8, 1e-15);
  EXPECT_NEAR(p.kernel[n0][1], 0.2, 1e-15);

  ProductPriorSpec d = build_p_star(three_diracs());
  for (double w : d.kernel[0]) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);

  Market up = make_market(2, 1,
                          {{"r", 0, std::nullopt, {0.0}}, {"a", 1, "r", {1.0}}, {"b", 1, "r", {-1.0}},
                           {"a0", 2, "a", {2.0}}, {"a1", 2, "a", {3.0}}, {"b0", 2, "b", {0.0}}, {"b1", 2, "b", {-2.0}}},
                          {{"r", {{0.5, 0.5}}}, {"a", {{0.5, 0.5}}}, {"b", {{0.5, 0.5}}}});
  try {
    build_p_star(up);
    FAIL() << "expected NAFailure";
  } catch (const NAFailure& e) {
    EXPECT_EQ(e.node(), "a");
    ASSERT_FALSE(e.witness().empty());
    EXPECT_GT(e.witness()[0], 0.0);
  }
}

TEST(BuildHPrior, MixingAndDominance) {
  Market m = three_diracs();
  ProductPriorSpec p = build_p_star(m);
  ProductPriorSpec q;
  q.kernel = {{0.0, 0.0, 1.0}, {}, {}, {}};
  q.extreme_choice = {2, -1, -1, -1};
  EXPECT_EQ(build_H_prior(m, q, {1.0, 1.0, 1.0, 1.0}).kernel[0], p.kernel[0]);
  Vec half = build_H_prior(m, q, {0.5, 1.0, 1.0, 1.0}).kernel[0];
  EXPECT_NEAR(half[0], 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(half[2], 0.5 + 1.0 / 6.0, 1e-15);
  EXPECT_THROW(build_H_prior(m, q, {0.0, 1.0, 1.0, 1.0}), LambdaError);
  EXPECT_THROW(build_H_prior(m, q, {1.5, 1.0, 1.0, 1.0}), LambdaError);

  std::mt19937_64 rng(3);
  for (std::uint64_t s = 0; s < 30; ++s) {
    Market rm = fixtures::random_two_period_market(s);
    for (const ProductPriorSpec& comp : ExtremeProducts(rm)) {
      Vec lambdas(rm.tree.size(), 1.0);
      for (NodeIndex i : rm.tree.interior()) lambdas[i] = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
      ProductPriorSpec mix = build_H_prior(rm, comp, lambdas);
      Vec a = leaf_distribution(rm.tree, comp), b = leaf_distribution(rm.tree, mix);
      for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] > 0.0) EXPECT_GT(b[k], 0.0);
    }
  }
}

TEST(PropagateCJ, ConstantLeavesGiveConstantC) {
  Market m = fixtures::random_two_period_market(5);
  AuxProcesses aux = propagate_CJ(m, kLp, constant_certificate(m, 2.5));
  for (NodeIndex i = 0; i < m.tree.size(); ++i) EXPECT_NEAR(aux.C[i], 2.5, 1e-12);
}

TEST(PropagateCJ, HandComputedTwoLevelEnvelope) {
  // r -> {a, b}; a -> {a0, a1}; b -> {b0}
  Market m = make_market(2, 1,
                         {{"r", 0, std::nullopt, {0.0}}, {"a", 1, "r", {1.0}}, {"b", 1, "r", {-1.0}},
                          {"a0", 2, "a", {2.0}}, {"a1", 2, "a", {0.0}}, {"b0", 2, "b", {-1.0}}},
                         {{"r", {{0.5, 0.5}, {0.9, 0.1}}}, {"a", {{0.25, 0.75}, {0.6, 0.4}}}, {"b", {{1.0}}}});
  AECertificate cert = constant_certificate(m, 0.0);
  cert.C_of_leaf = {{"a0", 4.0}, {"a1", 1.0}, {"b0", 2.0}};
  AuxProcesses aux = propagate_CJ(m, kLp, cert);
  const double Ca = std::max(0.25 * 4 + 0.75 * 1, 0.6 * 4 + 0.4 * 1);  // 2.8
  const double Cr = std::max(0.5 * Ca + 0.5 * 2, 0.9 * Ca + 0.1 * 2);
  EXPECT_NEAR(aux.C[m.tree.index_of("a")], Ca, 1e-14);
  EXPECT_NEAR(aux.C[m.tree.index_of("b")], 2.0, 1e-14);
  EXPECT_NEAR(aux.C[0], Cr, 1e-14);

  // J at wealth -1: leaves give U- = 0.75
  std::vector<Section> sec = bind_sections(kLp, m.tree);
  EXPECT_NEAR(fin(J_value(m, sec, 0, -1.0)), 0.75, 1e-15);
  EXPECT_NEAR(fin(J_value(m, sec, 0, 1.0)), 0.0, 1e-15);

  for (NodeIndex i : m.tree.interior()) {
    EXPECT_LE(aux.c_P[i], aux.C[i] + aux.J0[i] + 1e-12);
    EXPECT_NEAR(aux.i_P[i], 1.0 + 2.0 * aux.c_P[i] / aux.alpha_P[i], 1e-12);
  }
}

TEST(ComputeNt, ThresholdExamples) {
  Market m = make_market(1, 1, {{"r", 0, std::nullopt, {1.0}}, {"c", 1, "r", {1.0}}}, {{"r", {{1.0}}}});
  DpParams p;
  p.certificate = constant_certificate(m, 1.5);
  ValueFunction vf = value_function(m, kLp, p);
  // level 1 + 2 * 1.5 / 1 = 4 and U(-k) = -0.75 k
  EXPECT_EQ(compute_N_t(vf).at("r"), 6.0);

  RandomUtility steep = RandomUtility::deterministic(ScalarUtility::piecewise_linear({0.0}, {2.0, 1.0}));
  DpParams q;
  q.certificate = constant_certificate(m, 0.0, 2.0);
  EXPECT_EQ(compute_N_t(value_function(m, steep, q)).at("r"), 1.0);
}

TEST(ComputeNt, WealthThresholdBreakIsUnbounded) {
  Instance r8 = make_recipe("remark8");
  ValueFunction vf = value_function(r8.market, r8.utility);
  try {
    compute_N_t(vf);
    FAIL() << "expected NtUnbounded";
  } catch (const NtUnbounded& e) {
    EXPECT_EQ(e.node(), "root");
  }
}

TEST(ValueFunction, SinglePeriodReducesToOnePeriodProblem) {
  Market m = make_market(1, 1, {{"r", 0, std::nullopt, {2.0}}, {"u", 1, "r", {3.0}}, {"d", 1, "r", {1.0}}},
                         {{"r", {{0.7, 0.3}}}});
  ValueFunction vf = value_function(m, kLp);
  for (double x : {-1.0, 0.0, 2.0}) {
    MaxResult r = vf.argmax(0, x);
    EXPECT_EQ(vf(0, x), r.value);
    EXPECT_EQ(r.value, psi_robust(vf.instance(0), x, r.h));
  }
}

TEST(ValueFunction, SplitGridTimeOneValues) {
  Instance r9 = make_recipe("remark9");
  ValueFunction vf = value_function(r9.market, r9.utility);
  for (auto it = r9.expected["nodes"].begin(); it != r9.expected["nodes"].end(); ++it) {
    double u1 = it.value()["u1"].get<double>();
    EXPECT_NEAR(fin(vf.at(it.key(), 0.0)), u1, 1e-6 * (1.0 + u1)) << it.key();
  }
}

TEST(ValueFunction, MatchesNestedGridOracle) {
  const double delta = 1e-3;
  for (std::uint64_t s = 0; s < 8; ++s) {
    Market m = fixtures::random_two_period_market(100 + s);
    ValueFunction vf = value_function(m, kLp);
    for (double x : {-1.0, 0.0, 1.0}) {
      double v = fin(vf(0, x));
      double slope = std::max(1.0, 1.5 * std::fabs(fin(vf(0, x + delta)) - fin(vf(0, x - delta))) / (2 * delta));
      double oracle = fixtures::nested_grid_value(m, kLp, 0, x, delta);
      EXPECT_LE(std::fabs(v - oracle), 5 * delta * slope) << "seed " << s << " x " << x;
      EXPECT_GE(v, oracle - 1e-9) << "solver below a grid strategy";
    }
  }
}

TEST(ValueFunction, GridModeUnderestimatesExact) {
  Market m = fixtures::random_two_period_market(7);
  DpParams g;
  g.mode = Mode::grid;
  g.grid_lo = -20;
  g.grid_hi = 20;
  g.grid_step = 0.25;
  ValueFunction exact = value_function(m, kLp), grid = value_function(m, kLp, g);
  double gap = grid.knot_gap_error(32, 1);
  EXPECT_GE(gap, 0.0);
  for (NodeIndex i = 0; i < m.tree.size(); ++i)
    for (double x = -10.0; x <= 10.0; x += 0.37) EXPECT_LE(fin(grid(i, x)), fin(exact(i, x)) + gap + 1e-9);
}

TEST(ValueFunctionP, SingleExtremeMatchesRobust) {
  Instance r9 = remark9_market({0.2, 0.6, 0.9}, 0.75);
  ValueFunction u = value_function(r9.market, r9.utility);
  ValueFunction up = value_function_P(r9.market, r9.utility, build_p_star(r9.market));
  for (NodeIndex i = 0; i < r9.market.tree.size(); ++i)
    for (double x : {-2.0, 0.0, 0.5, 3.0})
      EXPECT_NEAR(fin(u(i, x)), fin(up(i, x)), 1e-9 * (1.0 + std::fabs(fin(u(i, x)))));
}

TEST(ValueFunctionP, SandwichBetweenMinusJAndPriorValue) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> ux(-5.0, 5.0);
  for (std::uint64_t s = 0; s < 4; ++s) {
    Market m = fixtures::random_two_period_market(200 + s);
    ValueFunction u = value_function(m, kLp);
    std::vector<ValueFunction> priors;
    for (int k = 0; k < 5; ++k) priors.push_back(value_function_P(m, kLp, random_H_prior(m, rng)));
    for (int k = 0; k < 50; ++k) {
      NodeIndex i = rng() % m.tree.size();
      double x = ux(rng);
      ExtReal v = u(i, x);
      EXPECT_GE(fin(v), -fin(u.J(i, x)) - 1e-9);
      for (const ValueFunction& p : priors) EXPECT_LE(fin(v), fin(p(i, x)) + 1e-8 * (1.0 + std::fabs(fin(v))));
    }
  }
}

TEST(ValueFunctionP, SplitGridReferenceValueGrowsUnderRefinement) {
  double prev = 0.0;
  for (int n : {9, 99}) {
    Instance r9 = remark9_market(midpoint_grid(n), 0.75);
    double v = fin(value_function_P(r9.market, r9.utility, build_p_star(r9.market))(0, 0.0));
    EXPECT_GT(v, 5.0 * prev);
    prev = v;
  }
}

TEST(CheckAssumptionU0, GaussianDiracIsFinite) {
  Instance r2 = make_recipe("remark2");
  U0Report rep = check_assumption_U0(r2.market, r2.utility, 3, 5);
  EXPECT_FALSE(rep.divergent);
  EXPECT_TRUE(rep.errors.empty());
  EXPECT_EQ(rep.values.size(), 4u);
  for (const auto& [label, v] : rep.values) EXPECT_TRUE(v.is_finite()) << label;
  EXPECT_EQ(rep.seed, 5u);
}

TEST(CheckAssumptionU0, SinglePeriodBoundedUtility) {
  Market m = make_market(1, 1, {{"r", 0, std::nullopt, {0.0}}, {"u", 1, "r", {1.0}}, {"d", 1, "r", {-1.0}}},
                         {{"r", {{0.6, 0.4}}}});
  RandomUtility cara = RandomUtility::deterministic(ScalarUtility::exp_cara());
  U0Report rep = check_assumption_U0(m, cara, 2, 0);
  double one = fin(value_function(m, cara)(0, 1.0));
  EXPECT_LT(fin(rep.max_value), 1.0);
  for (const auto& [label, v] : rep.values) EXPECT_NEAR(fin(v), one, 1e-12) << label;
}

TEST(GlueStrategy, SplitGridStrategy) {
  Instance r9 = make_recipe("remark9");
  ValueFunction vf = value_function(r9.market, r9.utility);
  GluedStrategy g = glue_strategy(vf, 0.0);
  for (auto it = r9.expected["nodes"].begin(); it != r9.expected["nodes"].end(); ++it) {
    double H = it.value()["H_star"].get<double>();
    EXPECT_NEAR(g.h[r9.market.tree.index_of(it.key())][0], H, 1e-4 * std::max(1.0, std::fabs(H)));
  }
  EXPECT_LE(g.identity_residual, 1e-6);
}

TEST(GlueStrategy, FlatMarketKeepsWealth) {
  Market m = flat_market();
  GluedStrategy g = glue_strategy(value_function(m, kLp), 0.7);
  for (NodeIndex i = 0; i < m.tree.size(); ++i) {
    EXPECT_EQ(g.wealth[i], 0.7);
    for (double h : g.h[i]) EXPECT_EQ(h, 0.0);
  }
}

TEST(GlueStrategy, WealthRecursionAndFrame) {
  for (std::uint64_t s = 0; s < 6; ++s) {
    Market m = fixtures::random_two_period_market(300 + s);
    ValueFunction vf = value_function(m, kLp);
    GluedStrategy g = glue_strategy(vf, 0.25);
    EXPECT_EQ(g.wealth[0], 0.25);
    for (NodeIndex i = 1; i < m.tree.size(); ++i) {
      NodeIndex p = *m.tree.node(i).parent;
      EXPECT_EQ(g.wealth[i], g.wealth[p] + g.h[p][0] * increment(m.tree, i)[0]);
    }
    EXPECT_LE(g.identity_residual, 1e-6);
    MaxResult root = vf.argmax(0, 0.25);
    EXPECT_EQ(g.h[0], root.h);
  }
}

TEST(RobustExpectation, MatchesProductEnumeration) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (std::uint64_t s = 0; s < 30; ++s) {
    Market m = fixtures::random_two_period_market(s);
    std::map<std::string, ExtReal> leaf;
    Vec vals;
    for (NodeIndex l : m.tree.leaves()) {
      vals.push_back(u(rng));
      leaf[m.tree.node(l).id] = vals.back();
    }
    double worst = HUGE_VAL;
    for (const ProductPriorSpec& spec : ExtremeProducts(m)) {
      Vec d = leaf_distribution(m.tree, spec);
      worst = std::min(worst, std::inner_product(d.begin(), d.end(), vals.begin(), 0.0));
    }
    EXPECT_NEAR(fin(robust_expectation(m, leaf)), worst, 1e-12);
    std::map<std::string, ExtReal> constant;
    for (const auto& [k, v] : leaf) constant[k] = 4.25;
    EXPECT_NEAR(fin(robust_expectation(m, constant)), 4.25, 1e-12);
  }
  Instance r9 = remark9_market({0.8, 0.4}, 0.75);
  std::map<std::string, ExtReal> leaf{{"n0u", 1.0}, {"n0d", 0.0}, {"n1u", 2.0}, {"n1d", 0.0}};
  EXPECT_NEAR(fin(robust_expectation(r9.market, leaf)), 0.5 * 0.8 + 0.5 * 0.8, 1e-15);
}

TEST(Admissibility, FloorBreachAtChargedLeaf) {
  Market m = make_market(1, 1, {{"r", 0, std::nullopt, {0.0}}, {"u", 1, "r", {1.0}}, {"d", 1, "r", {-1.0}}},
                         {{"r", {{0.5, 0.5}}}});
  RandomUtility floored = RandomUtility::deterministic(ScalarUtility::linear_power(0.75).with_floor(-2.0));
  GluedStrategy s;
  s.x0 = 0.0;
  s.h = {{1.0}, {}, {}};
  s.wealth = {0.0, 1.0, -1.0};
  Admissibility ok = check_admissibility(m, floored, s);
  EXPECT_TRUE(ok.admissible);
  EXPECT_NEAR(fin(ok.max_negative), 0.75, 1e-15);
  EXPECT_EQ(ok.worst_leaf, "d");

  s.h = {{3.0}, {}, {}};
  s.wealth = {0.0, 3.0, -3.0};
  Admissibility bad = check_admissibility(m, floored, s);
  EXPECT_FALSE(bad.admissible);
  ASSERT_TRUE(bad.witness_leaf);
  EXPECT_EQ(*bad.witness_leaf, "d");
}

TEST(Admissibility, UnchargedLeafIsIgnored) {
  Market m = make_market(1, 1,
                         {{"r", 0, std::nullopt, {0.0}}, {"u", 1, "r", {1.0}}, {"d", 1, "r", {-1.0}},
                          {"x", 1, "r", {-5.0}}},
                         {{"r", {{0.5, 0.5, 0.0}}}});
  RandomUtility floored = RandomUtility::deterministic(ScalarUtility::linear_power(0.75).with_floor(-2.0));
  GluedStrategy s;
  s.h = {{1.0}, {}, {}, {}};
  s.wealth = {0.0, 1.0, -1.0, -5.0};
  EXPECT_TRUE(check_admissibility(m, floored, s).admissible);
  EXPECT_FALSE(reachable_nodes(m)[m.tree.index_of("x")]);
}

TEST(Solve, GaussianDiracAndArbitrage) {
  Instance r2 = make_recipe("remark2");
  SolveReport rep = solve(r2.market, r2.utility, 1.0);
  ASSERT_TRUE(rep.ok()) << rep.to_json().dump();
  EXPECT_LE(fin(*rep.value), 1.0 + std::exp(std::exp(1.0)) + 1e-6);
  EXPECT_TRUE(rep.admissible);

  SolveReport na = solve(arbitrage_toy().market, arbitrage_toy().utility, 0.0);
  ASSERT_EQ(na.failures.size(), 1u);
  EXPECT_EQ(na.failures[0].code, "NAFailure");
  EXPECT_EQ(na.failures[0].node, "root");
  EXPECT_FALSE(na.value);
}

TEST(Solve, ReportCarriesDiagnostics) {
  Instance r9 = make_recipe("remark9");
  SolveReport rep = solve(r9.market, r9.utility, 0.0);
  ASSERT_TRUE(rep.ok());
  nlohmann::json j = rep.to_json();
  for (const char* k : {"alpha", "n0", "K1_visited", "N_t", "assumptions", "C_t", "J_t0"})
    EXPECT_TRUE(j["diagnostics"].contains(k)) << k;
  EXPECT_EQ(j["diagnostics"]["alpha"]["root"], 1.0);
  for (auto it = r9.expected["nodes"].begin(); it != r9.expected["nodes"].end(); ++it)
    EXPECT_DOUBLE_EQ(j["diagnostics"]["alpha"][it.key()].get<double>(), it.value()["alpha"].get<double>());
}

TEST(DpProperties, StructuralInvariantsOnRandomTrees) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(-5.0, 5.0), ul(1.0, 100.0);
  for (std::uint64_t s = 0; s < 6; ++s) {
    Market m = fixtures::random_two_period_market(400 + s);
    ValueFunction vf = value_function(m, kLp);
    const double g = vf.certificate().gamma;
    for (NodeIndex i = 0; i < m.tree.size(); ++i) {
      // 11-point monotonicity and midpoint concavity
      Vec v;
      for (int k = 0; k <= 10; ++k) v.push_back(fin(vf(i, -5.0 + k)));
      for (int k = 0; k < 10; ++k) EXPECT_LE(v[k], v[k + 1] + 1e-9);
      for (int k = 1; k < 10; ++k) EXPECT_GE(v[k], 0.5 * (v[k - 1] + v[k + 1]) - 1e-7 * (1 + std::fabs(v[k])));
      // dynamic growth inequality
      for (int k = 0; k < 20; ++k) {
        double x = ux(rng), l = ul(rng);
        double lhs = fin(vf(i, l * x)), base = fin(vf(i, x));
        double rhs = std::pow(l, g) * (base + vf.aux().C[i]);
        EXPECT_LE(lhs, rhs + 1e-7 * (1.0 + std::fabs(rhs))) << "node " << i << " x " << x << " l " << l;
      }
    }
    SolveReport rep = solve(m, kLp, 0.5);
    ASSERT_TRUE(rep.ok());
    EXPECT_LE(rep.diagnostics["assumptions"]["dp_identity"]["max_relative_residual"].get<double>(), 1e-6);
    EXPECT_TRUE(rep.admissible);
    EXPECT_LE(rep.diagnostics["assumptions"]["consistency"]["relative_residual"].get<double>(), 1e-5);
  }
}
