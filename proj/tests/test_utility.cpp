#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "robustdp/errors.hpp"
#include "robustdp/recipes.hpp"
#include "robustdp/utility.hpp"

using namespace robustdp;

namespace {

// Independent sweep: U(l x) <= l^g (U(x) + C) + 1e-9 (1 + |U(x)|) on a
// log-spaced lambda grid in [1, 1e4] and an even wealth grid in [-1e3, 1e3].
bool growth_holds(const Section& s, double g, double C) {
  for (int i = 0; i < 100; ++i) {
    double l = std::pow(10.0, 4.0 * i / 99.0);
    for (int j = 0; j < 100; ++j) {
      double x = -1e3 + 2e3 * j / 99.0;
      ExtReal lhs = s(l * x), u = s(x);
      if (lhs.is_neg_inf()) continue;
      if (!u.is_finite()) return false;
      double rhs = std::pow(l, g) * (u.value() + C) + 1e-9 * (1.0 + std::fabs(u.value()));
      if (lhs.value() > rhs) return false;
    }
  }
  return true;
}

std::vector<ScalarUtility> concave_builtins() {
  return {ScalarUtility::linear_power(0.6), ScalarUtility::linear_power(0.75), ScalarUtility::linear_power(0.9),
          ScalarUtility::exp_cara(), ScalarUtility::exp_cara(2.0), ScalarUtility::linear(),
          ScalarUtility::piecewise_linear({-1.0, 2.0}, {3.0, 1.0, 0.5}),
          ScalarUtility::piecewise_linear({0.0}, {2.0, 0.25}, 1.0)};
}

const ClauseReport* clause(const TypeAReport& r, const std::string& name) {
  for (const ClauseReport& c : r.clauses)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST(Eval, Examples) {
  ScalarUtility lp = ScalarUtility::linear_power(0.75);
  EXPECT_DOUBLE_EQ(lp(-2.0).value(), -1.5);
  EXPECT_DOUBLE_EQ(lp(0.0).value(), 0.0);
  EXPECT_NEAR(lp(1.0).value(), std::pow(2.0, 0.75) - 1.0, 1e-15);
  RandomUtility b = RandomUtility::benchmark(ScalarUtility::exp_cara(), {{"leaf", 1.0}});
  EXPECT_DOUBLE_EQ(b.eval("leaf", 1.0).value(), 0.0);
  EXPECT_THROW(b.eval("other", 1.0), UnknownLeaf);
  RandomUtility d = RandomUtility::deterministic(lp);
  EXPECT_EQ(d.eval("anything", -2.0), ExtReal(-1.5));
}

TEST(Eval, ConstructionGuards) {
  EXPECT_THROW(ScalarUtility::piecewise_linear({0.0}, {1.0, 2.0}), ParameterError);
  EXPECT_THROW(ScalarUtility::piecewise_linear({0.0}, {1.0, -1.0}), ParameterError);
  EXPECT_NO_THROW(ScalarUtility::piecewise_linear_unchecked({0.0}, {1.0, 2.0}));
}

TEST(Eval, JsonRoundTrip) {
  RandomUtility t = RandomUtility::table({{"a", ScalarUtility::exp_cara(3.0)},
                                          {"b", ScalarUtility::piecewise_linear({-1.0, 1.0}, {2.0, 1.0, 0.0})}});
  RandomUtility back = load_utility(t.to_json().dump());
  EXPECT_EQ(back.to_json(), t.to_json());
  for (double x : {-3.0, -1.0, 0.0, 0.5, 4.0}) {
    EXPECT_EQ(back.eval("a", x), t.eval("a", x));
    EXPECT_EQ(back.eval("b", x), t.eval("b", x));
  }
  EXPECT_THROW(load_utility("{\"kind\": \"nope\"}"), ParseError);
}

TEST(ConcavityMonotonicity, RandomTriples) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (const ScalarUtility& s : concave_builtins()) {
    for (int rep = 0; rep < 2000; ++rep) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      double m = 0.5 * (a + b);
      double fa = s(a).value(), fb = s(b).value(), fm = s(m).value();
      double slack = 1e-10 * (1.0 + std::fabs(fa) + std::fabs(fb));
      EXPECT_LE(fa, fm + slack);
      EXPECT_LE(fm, fb + slack);
      EXPECT_GE(fm, 0.5 * (fa + fb) - slack) << s.name();
    }
  }
}

TEST(AsymptoticElasticity, Examples) {
  for (double a : {0.6, 0.75, 0.9}) {
    AEResult r = asymptotic_elasticity(ScalarUtility::linear_power(a), Side::plus_infinity);
    EXPECT_NEAR(r.value.value(), a, 1e-4);
    EXPECT_TRUE(r.converged);
  }
  AEResult e = asymptotic_elasticity(ScalarUtility::exp_cara(), Side::minus_infinity);
  EXPECT_TRUE(e.value.is_pos_inf());
  double peak = 0.0;
  for (double v : e.scan)
    if (std::isfinite(v)) peak = std::max(peak, v);
  EXPECT_GT(peak, 1e6);
  for (Side side : {Side::plus_infinity, Side::minus_infinity})
    EXPECT_NEAR(asymptotic_elasticity(ScalarUtility::linear(), side).value.value(), 1.0, 1e-12);
  EXPECT_THROW(asymptotic_elasticity(ScalarUtility::piecewise_linear({}, {0.0}), Side::plus_infinity), DomainError);
}

TEST(AsymptoticElasticity, BoundsForConcaveBuiltins) {
  for (const ScalarUtility& s : concave_builtins()) {
    EXPECT_LE(asymptotic_elasticity(s, Side::plus_infinity).value, ExtReal(1.0 + 1e-6)) << s.name();
    EXPECT_GE(asymptotic_elasticity(s, Side::minus_infinity).value, ExtReal(1.0 - 1e-6)) << s.name();
  }
}

TEST(ConstructGammaC, MinusSideForExpCara) {
  ScalarUtility u = ScalarUtility::exp_cara();
  ScalarCertificate c = construct_gamma_C(u, 2.0);
  EXPECT_EQ(c.side, Side::minus_infinity);
  EXPECT_LT(c.x_lower, 0.0);
  EXPECT_NEAR(c.C, u(0).positive_part().value() + u(0).negative_part().value() + u(c.x_lower).negative_part().value(),
              1e-12);
  EXPECT_TRUE(growth_holds(Section{u}, 2.0, c.C));
  EXPECT_TRUE(certificate_sweep(Section{u}, 2.0, c.C).ok);
}

TEST(ConstructGammaC, PlusSideForLinearPower) {
  ScalarUtility u = ScalarUtility::linear_power(0.75);
  ScalarCertificate c = construct_gamma_C(u, 0.9);
  EXPECT_EQ(c.side, Side::plus_infinity);
  EXPECT_LT(c.x_prime, 0.0);
  EXPECT_GT(c.x_bar, 0.0);
  double expect = u(c.x_bar).positive_part().value() + u(c.x_prime).negative_part().value() +
                  u(0).negative_part().value();
  EXPECT_NEAR(c.C, expect, 1e-12);
  EXPECT_TRUE(growth_holds(Section{u}, 0.9, c.C));
}

TEST(ConstructGammaC, LinearHasNoRAE) {
  for (double g : {0.5, 0.9, 1.5, 2.0}) EXPECT_THROW(construct_gamma_C(ScalarUtility::linear(), g), RAEViolation);
}

TEST(Gamma1Bound, Examples) {
  EXPECT_TRUE(gamma1_bound_check(ScalarUtility::exp_cara()));
  EXPECT_TRUE(gamma1_bound_check(ScalarUtility::linear()));
  EXPECT_TRUE(gamma1_bound_check(ScalarUtility::linear_power(0.75)));
  EXPECT_FALSE(gamma1_bound_check(ScalarUtility::piecewise_linear_unchecked({1.0}, {0.5, 2.0})));
}

TEST(CertifyGrowth, EveryCertificatePassesIndependentSweep) {
  std::vector<Instance> insts{make_recipe("remark9"), make_recipe("remark2"), make_recipe("example1")};
  for (const Instance& inst : insts) {
    AECertificate cert = certify_growth(inst.utility, inst.market.tree);
    for (NodeIndex leaf : inst.market.tree.leaves()) {
      const std::string& id = inst.market.tree.node(leaf).id;
      EXPECT_TRUE(growth_holds(inst.utility.section(id), cert.gamma, cert.C_of_leaf.at(id))) << inst.name << " " << id;
    }
  }
}

TEST(TypeA, BenchmarkOverSplitGridTree) {
  Instance r9 = make_recipe("remark9");
  std::map<std::string, double> Z;
  int k = 0;
  for (NodeIndex leaf : r9.market.tree.leaves()) Z[r9.market.tree.node(leaf).id] = 0.1 * (k++ % 5) - 0.2;
  RandomUtility b = RandomUtility::benchmark(ScalarUtility::linear_power(0.75), Z);
  TypeAReport r = certify_type_A(b, r9.market);
  EXPECT_TRUE(r.verdict);
  for (const ClauseReport& c : r.clauses) EXPECT_TRUE(c.ok) << c.name;
}

TEST(TypeA, DeterministicLinearPowerFitsLinearLowerBound) {
  Instance r9 = make_recipe("remark9");
  TypeAReport r = certify_type_A(r9.utility, r9.market);
  EXPECT_TRUE(r.verdict);
  EXPECT_DOUBLE_EQ(r.p, 1.0);
  for (const auto& [leaf, c1] : r.C1) EXPECT_NEAR(c1, 0.75, 1e-9) << leaf;
}

TEST(TypeA, LinearFailsOnGrowthClause) {
  Instance r9 = make_recipe("remark9");
  RandomUtility lin = RandomUtility::deterministic(ScalarUtility::linear());
  try {
    certify_type_A(lin, r9.market);
    FAIL() << "expected CertificationFailure";
  } catch (const CertificationFailure& e) {
    EXPECT_EQ(e.clause(), "ae_certificate");
  }
  TypeAReport r = assess_type_A(lin, r9.market);
  EXPECT_FALSE(r.verdict);
  ASSERT_NE(r.first_failure(), nullptr);
  EXPECT_EQ(r.first_failure()->name, "ae_certificate");
}

TEST(LowerBar, GaussianDiracClosedForm) {
  Instance r2 = make_recipe("remark2");
  AECertificate cert = certify_growth(r2.utility, r2.market.tree);
  std::map<std::string, double> xb = assumption5_lowerbar(r2.utility, r2.market.tree, cert);
  for (NodeIndex leaf : r2.market.tree.leaves()) {
    const std::string& id = r2.market.tree.node(leaf).id;
    const double w = increment(r2.market.tree, leaf)[0];
    // solve 1 - exp(-x) + exp(exp(w)) = -C - 1
    double closed = -std::log(2.0 + cert.C_of_leaf.at(id) + std::exp(std::exp(w)));
    EXPECT_NEAR(xb.at(id), closed, 1e-8 * (1.0 + std::fabs(closed))) << id;
  }
}

TEST(LowerBar, DeterministicAlwaysSucceeds) {
  Instance r9 = make_recipe("remark9");
  AECertificate cert = certify_growth(r9.utility, r9.market.tree);
  for (const auto& [leaf, x] : assumption5_lowerbar(r9.utility, r9.market.tree, cert)) {
    EXPECT_LT(x, 0.0);
    EXPECT_LE(r9.utility.eval(leaf, x).value() + cert.C_of_leaf.at(leaf), -1.0 + 1e-9);
  }
}

TEST(LowerBar, WealthThresholdBreakFails) {
  Instance r8 = make_recipe("remark8");
  AECertificate cert = certify_growth(r8.utility, r8.market.tree);
  EXPECT_THROW(assumption5_lowerbar(r8.utility, r8.market.tree, cert), AssumptionFailure);
}
