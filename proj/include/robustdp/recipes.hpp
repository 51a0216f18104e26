#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "robustdp/market.hpp"
#include "robustdp/utility.hpp"

namespace robustdp {

/// A generated instance with the closed-form values it should reproduce.
struct Instance {
  std::string name;
  Market market;
  RandomUtility utility;
  nlohmann::json parameters;
  nlohmann::json expected;
};

/// Two-period counterexample: root (price 2) -> one node per l (price 2) ->
/// leaves at prices 3 and 1 with kernel (l, 1 - l).  Utility linear_power(a).
/// Node ids: "root", "n<i>", "n<i>u", "n<i>d".
Instance remark9_market(const Vec& l_grid, double a = 0.75);
/// (i - 1/2) / n for i = 1..n.
Vec midpoint_grid(int n);
/// Optimal one-period position at wealth 0 for kernel (l, 1 - l).
double remark9_H_star(double l, double a);
/// l U(h) + (1 - l) U(-h) with U = linear_power(a).
double remark9_u1(double l, double a, double h);

/// One period, n normal-quantile atoms (one extreme) plus a Dirac(+1) extreme.
/// Leaf utility 1 - exp(-x) + exp(exp(w)).  Ids "root", "w<i>", "dirac".
Instance remark2_market(int n_points);

/// One period, Y in {-1, 1, 2} with p = (0.45, 0.45, 0.1); utility zero on
/// Y <= 1.5 and linear_power(0.75) above.  Breaks the wealth threshold bound.
Instance remark8_instance();

/// Root price 1, children 2 and 3 under (1/2, 1/2): every increment positive.
Instance arbitrage_toy();

/// Fixed 21-atom grid -5, -4.5, ..., 5.
Vec example1_atoms();
/// Exponential-moment bound 2 exp(1/2) + 0.1.
double example1_C();
/// Whether p meets E Z = 0, E Z^2 = 1 (1e-9) and E exp(|Z|) <= C.
bool example1_admissible(const Vec& p, std::string* why = nullptr);
/// Random admissible priors by projection and rejection.  GenerationExhausted
/// after 1e5 rejections.
std::vector<Vec> example1_priors(int n_priors, unsigned seed);
/// Largest beta with p{Z < -beta} >= beta and p{-Z < -beta} >= beta for every
/// prior.  BetaNotFound when no beta > 1e-9 works.
double lemma3_beta(const std::vector<Vec>& priors);
/// One-period market S_1 = S_0 + r + sigma Z with the generated priors as
/// extremes, r = r_fraction * beta * sigma.  Utility: benchmark linear_power.
Instance example1_market(int n_priors, unsigned seed, double sigma = 1.0, double r_fraction = 0.5);

/// Names accepted by make_recipe.
std::vector<std::string> recipe_names();
/// Default-parameter instance by name; ParameterError for unknown names.
Instance make_recipe(const std::string& name, unsigned seed = 0);

}  // namespace robustdp
