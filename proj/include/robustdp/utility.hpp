#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "robustdp/extreal.hpp"
#include "robustdp/market.hpp"

namespace robustdp {

enum class Builtin { linear_power, exp_cara, linear, piecewise_linear };

/**
 * Named scalar utility.  Every builtin accepts an additive `offset`.
 *   linear_power(a): a x for x <= 0, (1+x)^a - 1 for x > 0, 0 < a <= 1
 *   exp_cara:        1 - exp(-x)
 *   linear:          x
 *   piecewise_linear(knots, slopes): U(0) = offset, slope slopes[j] between
 *   knots j-1 and j; slopes nonincreasing and nonnegative.
 * An optional `floor` makes U = -inf strictly below it (still concave).
 */
class ScalarUtility {
 public:
  static ScalarUtility linear_power(double a, double offset = 0.0);
  static ScalarUtility exp_cara(double offset = 0.0);
  static ScalarUtility linear(double offset = 0.0);
  static ScalarUtility piecewise_linear(Vec knots, Vec slopes, double offset = 0.0);
  /// Skips the concavity and monotonicity checks; for building bad inputs.
  static ScalarUtility piecewise_linear_unchecked(Vec knots, Vec slopes, double offset = 0.0);

  /// Copy that equals -inf strictly below `floor`.
  ScalarUtility with_floor(double floor) const;

  static ScalarUtility from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  Builtin kind() const noexcept { return kind_; }
  std::string name() const;
  double param_a() const noexcept { return a_; }
  double offset() const noexcept { return offset_; }
  double floor() const noexcept { return floor_; }
  bool is_constant() const;

  ExtReal operator()(double x) const;
  /// Right derivative for x >= 0, left derivative for x < 0.
  double derivative(double x) const;
  /// x U'(x) / U(x) in overflow-safe form; NaN where U(x) = 0.
  double elasticity(double x) const;

 private:
  Builtin kind_ = Builtin::linear;
  double a_ = 1.0;
  double offset_ = 0.0;
  double floor_ = -std::numeric_limits<double>::infinity();
  Vec knots_, slopes_, knot_values_;
  void prepare_table();
};

/// Wealth section of a random utility at one leaf: x -> spec(x - shift).
struct Section {
  ScalarUtility spec;
  double shift = 0.0;

  ExtReal operator()(double x) const { return spec(x - shift); }
  double derivative(double x) const { return spec.derivative(x - shift); }
  double elasticity(double x) const;
  bool is_constant() const { return spec.is_constant(); }
};

enum class UtilityKind { deterministic, benchmark, table };

class RandomUtility {
 public:
  static RandomUtility deterministic(ScalarUtility base);
  static RandomUtility benchmark(ScalarUtility base, std::map<std::string, double> Z);
  static RandomUtility table(std::map<std::string, ScalarUtility> table);

  static RandomUtility from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  UtilityKind kind() const noexcept { return kind_; }
  const ScalarUtility& base() const;
  const std::map<std::string, double>& Z() const noexcept { return Z_; }
  const std::map<std::string, ScalarUtility>& entries() const noexcept { return table_; }

  /// UnknownLeaf when the leaf has no Z (benchmark) or no entry (table).
  Section section(std::string_view leaf) const;
  ExtReal eval(std::string_view leaf, double x) const { return section(leaf)(x); }

 private:
  UtilityKind kind_ = UtilityKind::deterministic;
  std::optional<ScalarUtility> base_;
  std::map<std::string, double> Z_;
  std::map<std::string, ScalarUtility> table_;
};

RandomUtility load_utility(std::string_view text);
RandomUtility load_utility_file(const std::string& path);

/// Sections indexed by node; only leaf slots are meaningful.
std::vector<Section> bind_sections(const RandomUtility& u, const ScenarioTree& tree);

enum class Side { plus_infinity, minus_infinity };
std::string to_string(Side s);

struct AEResult {
  ExtReal value;
  bool converged = false;
  std::vector<double> scan;  // ratio at +-2^j, j = 10..60 (NaN where undefined)
};

/// Grid limit of x U'(x) / U(x) along x = +-2^j, j = 10..60.
AEResult asymptotic_elasticity(const Section& s, Side side);
AEResult asymptotic_elasticity(const ScalarUtility& spec, Side side);

/// Growth certificate U(l x) <= l^gamma (U(x) + C) for l >= 1, one section.
struct ScalarCertificate {
  double gamma = 0.0;
  double C = 0.0;
  Side side = Side::minus_infinity;
  double x_lower = 0.0;  // minus side anchor
  double x_prime = 0.0;  // plus side anchors
  double x_bar = 0.0;
};

struct SweepResult {
  bool ok = true;
  double worst_excess = -std::numeric_limits<double>::infinity();
  double lambda = 1.0;
  double x = 0.0;
};

/// lambda log-spaced in [1, 1e4] times x evenly spaced in [-1e3, 1e3], 10^4 points.
SweepResult certificate_sweep(const Section& s, double gamma, double C);
ScalarCertificate construct_gamma_C(const Section& s, double gamma);
ScalarCertificate construct_gamma_C(const ScalarUtility& spec, double gamma);

/// U(l x) <= l (U(x) + U-(0)) on the same sweep, slack 1e-9.
bool gamma1_bound_check(const ScalarUtility& spec);

struct Anchors {
  double x_lower = 0.0;
  double x_prime = 0.0;
  double x_bar = 0.0;
};

struct AECertificate {
  double gamma = 0.0;
  Side side = Side::minus_infinity;
  std::map<std::string, double> C_of_leaf;
  std::map<std::string, Anchors> anchors;
};

struct GammaChoice {
  Side side;
  double gamma;
};

/// Picks a side and gamma valid for every non-constant section.  RAEViolation
/// when neither side works.
GammaChoice choose_gamma(const std::vector<Section>& sections);

/// Per-leaf certificate for a random utility.  Benchmark leaves follow the
/// shifted-anchor construction.  Every leaf is sweep-checked; failure raises
/// CertificationFailure("ae_certificate").
AECertificate certify_growth(const RandomUtility& u, const ScenarioTree& tree,
                             std::optional<double> gamma = std::nullopt);

/// Smallest-magnitude X < 0 with U(leaf, X) + C(leaf) <= -1 per leaf.
/// AssumptionFailure("lowerbar") if none above -2^60.
std::map<std::string, double> assumption5_lowerbar(const RandomUtility& u, const ScenarioTree& tree,
                                                   const AECertificate& cert);

struct ClauseReport {
  std::string name;
  bool ok = false;
  std::string detail;
  nlohmann::json evidence;
};

struct TypeAReport {
  bool verdict = false;
  std::vector<ClauseReport> clauses;
  std::optional<AECertificate> certificate;
  std::map<std::string, double> x_lower;
  std::map<std::string, double> C1;
  double p = 0.0;

  const ClauseReport* first_failure() const;
  nlohmann::json to_json() const;
};

/// Evaluates every type-(A) clause without throwing.
TypeAReport assess_type_A(const RandomUtility& u, const Market& m,
                          std::optional<double> gamma_hint = std::nullopt,
                          unsigned seed = 0);
/// As assess_type_A, but throws CertificationFailure on the first failed clause.
TypeAReport certify_type_A(const RandomUtility& u, const Market& m,
                           std::optional<double> gamma_hint = std::nullopt,
                           unsigned seed = 0);

}  // namespace robustdp
