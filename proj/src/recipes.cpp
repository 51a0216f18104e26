#include "robustdp/recipes.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "robustdp/errors.hpp"
#include "robustdp/geometry.hpp"

namespace robustdp {

using nlohmann::json;

Vec midpoint_grid(int n) {
  if (n < 1) throw ParameterError("grid size must be positive");
  Vec g;
  for (int i = 1; i <= n; ++i) g.push_back((i - 0.5) / n);
  return g;
}

double remark9_H_star(double l, double a) {
  const double p = 1.0 / (1.0 - a);
  if (l >= 0.5) return std::pow(l / (1.0 - l), p) - 1.0;
  return 1.0 - std::pow((1.0 - l) / l, p);
}

double remark9_u1(double l, double a, double h) {
  ScalarUtility u = ScalarUtility::linear_power(a);
  return l * u(h).value() + (1.0 - l) * u(-h).value();
}

Instance remark9_market(const Vec& l_grid, double a) {
  if (!(a > 0.5 && a < 1.0)) throw ParameterError("remark9 needs 0.5 < a < 1");
  if (l_grid.empty()) throw ParameterError("remark9 needs a nonempty l grid");
  for (double l : l_grid)
    if (!(l > 0.0 && l < 1.0)) throw ParameterError("remark9 grid values must lie in (0, 1)");
  std::vector<NodeSpec> nodes{{"root", 0, std::nullopt, {2.0}}};
  std::unordered_map<std::string, std::vector<Vec>> priors;
  const std::size_t n = l_grid.size();
  priors["root"] = {Vec(n, 1.0 / n)};
  json expected = json::object();
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = "n" + std::to_string(i);
    nodes.push_back({id, 1, "root", {2.0}});
    const double l = l_grid[i];
    priors[id] = {Vec{l, 1.0 - l}};
    double h = remark9_H_star(l, a);
    expected[id] = json{{"l", l}, {"H_star", h}, {"alpha", std::min(l, 1.0 - l)}, {"u1", remark9_u1(l, a, h)}};
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::string id = "n" + std::to_string(i);
    nodes.push_back({id + "u", 2, id, {3.0}});
    nodes.push_back({id + "d", 2, id, {1.0}});
  }
  Instance inst{"remark9", make_market(2, 1, nodes, priors),
                RandomUtility::deterministic(ScalarUtility::linear_power(a)),
                json{{"a", a}, {"l_grid", l_grid}}, json{{"nodes", expected}, {"root_alpha", 1.0}}};
  return inst;
}

Instance remark2_market(int n_points) {
  if (n_points < 3 || n_points % 2 == 0) throw ParameterError("remark2 needs an odd number of atoms >= 3");
  boost::math::normal gauss;
  std::vector<NodeSpec> nodes{{"root", 0, std::nullopt, {0.0}}};
  std::map<std::string, ScalarUtility> table;
  Vec normal_kernel, dirac_kernel;
  for (int i = 1; i <= n_points; ++i) {
    double w = boost::math::quantile(gauss, (i - 0.5) / n_points);
    if (std::fabs(w) < 1e-15) w = 0.0;
    std::string id = "w" + std::to_string(i - 1);
    nodes.push_back({id, 1, "root", {w}});
    table.emplace(id, ScalarUtility::exp_cara(std::exp(std::exp(w))));
    normal_kernel.push_back(1.0 / n_points);
    dirac_kernel.push_back(0.0);
  }
  nodes.push_back({"dirac", 1, "root", {1.0}});
  table.emplace("dirac", ScalarUtility::exp_cara(std::exp(std::exp(1.0))));
  normal_kernel.push_back(0.0);
  dirac_kernel.push_back(1.0);
  std::unordered_map<std::string, std::vector<Vec>> priors{{"root", {normal_kernel, dirac_kernel}}};
  return Instance{"remark2", make_market(1, 1, nodes, priors), RandomUtility::table(std::move(table)),
                  json{{"n_points", n_points}}, json{{"upper_bound", 1.0 + std::exp(std::exp(1.0))}}};
}

Instance remark8_instance() {
  const Vec Y{-1.0, 1.0, 2.0};
  const double M = 1.5;
  std::vector<NodeSpec> nodes{{"root", 0, std::nullopt, {0.0}}};
  std::map<std::string, ScalarUtility> table;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    std::string id = "y" + std::to_string(i);
    nodes.push_back({id, 1, "root", {Y[i]}});
    table.emplace(id, Y[i] > M ? ScalarUtility::linear_power(0.75) : ScalarUtility::piecewise_linear({}, {0.0}));
  }
  std::unordered_map<std::string, std::vector<Vec>> priors{{"root", {Vec{0.45, 0.45, 0.1}}}};
  return Instance{"remark8", make_market(1, 1, nodes, priors), RandomUtility::table(std::move(table)),
                  json{{"M", M}, {"Y", Y}, {"p", {0.45, 0.45, 0.1}}},
                  json{{"alpha", 0.45}, {"failure", "pb_inequality"}}};
}

Instance arbitrage_toy() {
  std::vector<NodeSpec> nodes{{"root", 0, std::nullopt, {1.0}}, {"up", 1, "root", {2.0}}, {"upup", 1, "root", {3.0}}};
  std::unordered_map<std::string, std::vector<Vec>> priors{{"root", {Vec{0.5, 0.5}}}};
  return Instance{"arbitrage_toy", make_market(1, 1, nodes, priors),
                  RandomUtility::deterministic(ScalarUtility::linear_power(0.75)), json::object(),
                  json{{"failure", "no_arbitrage"}, {"node", "root"}}};
}

// ---------------------------------------------------------------- example 1

Vec example1_atoms() {
  Vec z;
  for (int k = 0; k <= 20; ++k) z.push_back(-5.0 + 0.5 * k);
  return z;
}

double example1_C() { return 2.0 * std::exp(0.5) + 0.1; }

bool example1_admissible(const Vec& p, std::string* why) {
  const Vec z = example1_atoms();
  auto fail = [&](const char* msg) {
    if (why) *why = msg;
    return false;
  };
  if (p.size() != z.size()) return fail("wrong number of atoms");
  double s = 0.0, m1 = 0.0, m2 = 0.0, ex = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (!(p[k] >= 0.0)) return fail("negative weight");
    s += p[k];
    m1 += p[k] * z[k];
    m2 += p[k] * z[k] * z[k];
    ex += p[k] * std::exp(std::fabs(z[k]));
  }
  if (std::fabs(s - 1.0) > 1e-12) return fail("weights do not sum to one");
  if (std::fabs(m1) > 1e-9) return fail("mean is not zero");
  if (std::fabs(m2 - 1.0) > 1e-9) return fail("variance is not one");
  if (ex > example1_C()) return fail("exponential moment exceeds C");
  return true;
}

std::vector<Vec> example1_priors(int n_priors, unsigned seed) {
  if (n_priors < 0) throw ParameterError("n_priors must be nonnegative");
  const Vec z = example1_atoms();
  const int n = static_cast<int>(z.size());
  Eigen::MatrixXd A(3, n);
  for (int k = 0; k < n; ++k) {
    A(0, k) = 1.0;
    A(1, k) = z[k];
    A(2, k) = z[k] * z[k];
  }
  const Eigen::Vector3d b(1.0, 0.0, 1.0);
  const Eigen::Matrix3d gram_inv = (A * A.transpose()).inverse();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::vector<Vec> out;
  long rejections = 0;
  while (static_cast<int>(out.size()) < n_priors) {
    Eigen::VectorXd w(n);
    for (int k = 0; k < n; ++k) w(k) = std::exp(-0.5 * z[k] * z[k]) * jitter(rng);
    w /= w.sum();
    w -= A.transpose() * (gram_inv * (A * w - b));
    Vec p(w.data(), w.data() + n);
    for (double& v : p)
      if (std::fabs(v) < 1e-300) v = 0.0;
    if (example1_admissible(p)) {
      out.push_back(std::move(p));
    } else if (++rejections >= 100000) {
      throw GenerationExhausted("example1: 1e5 consecutive draws violated the constraints");
    }
  }
  return out;
}

double lemma3_beta(const std::vector<Vec>& priors) {
  if (priors.empty()) throw BetaNotFound("lemma3_beta needs at least one prior");
  const Vec z = example1_atoms();
  Vec neg_z(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) neg_z[k] = -z[k];
  double beta = 1.0;
  for (const Vec& p : priors) {
    if (p.size() != z.size()) throw StructureError("prior length does not match the atom grid");
    beta = std::min({beta, largest_loss_level(z, p), largest_loss_level(neg_z, p)});
  }
  if (!(beta > 1e-9)) throw BetaNotFound("no positive beta satisfies the two-sided loss condition");
  return beta;
}

Instance example1_market(int n_priors, unsigned seed, double sigma, double r_fraction) {
  if (!(sigma > 0.0)) throw ParameterError("sigma must be positive");
  if (!(std::fabs(r_fraction) < 1.0)) throw ParameterError("|r / sigma| must stay below beta");
  std::vector<Vec> priors = example1_priors(n_priors, seed);
  const double beta = lemma3_beta(priors);
  const double r = r_fraction * beta * sigma;
  const Vec z = example1_atoms();
  std::vector<NodeSpec> nodes{{"root", 0, std::nullopt, {0.0}}};
  std::map<std::string, double> Z;
  for (std::size_t k = 0; k < z.size(); ++k) {
    std::string id = "z" + std::to_string(k);
    nodes.push_back({id, 1, "root", {r + sigma * z[k]}});
    Z[id] = 0.1 * z[k];
  }
  std::unordered_map<std::string, std::vector<Vec>> pri{{"root", priors}};
  const double alpha = std::min({beta, sigma * beta - r, sigma * beta + r});
  return Instance{"example1", make_market(1, 1, nodes, pri),
                  RandomUtility::benchmark(ScalarUtility::linear_power(0.75), Z),
                  json{{"n_priors", n_priors}, {"seed", seed}, {"sigma", sigma}, {"r", r},
                       {"r_over_sigma_range", {-beta, beta}}},
                  json{{"beta", beta}, {"alpha_lower_bound", alpha}}};
}

std::vector<std::string> recipe_names() { return {"remark9", "remark2", "remark8", "example1", "arbitrage_toy"}; }

Instance make_recipe(const std::string& name, unsigned seed) {
  if (name == "remark9") {
    Vec grid;
    for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
    return remark9_market(grid, 0.75);
  }
  if (name == "remark2") return remark2_market(11);
  if (name == "remark8") return remark8_instance();
  if (name == "example1") return example1_market(5, seed);
  if (name == "arbitrage_toy") return arbitrage_toy();
  throw ParameterError("unknown recipe '" + name + "'");
}

}  // namespace robustdp
