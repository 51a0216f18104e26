#include "robustdp/utility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "robustdp/errors.hpp"

namespace robustdp {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- scalars

ScalarUtility ScalarUtility::linear_power(double a, double offset) {
  if (!(a > 0.0 && a <= 1.0)) throw ParameterError("linear_power requires 0 < a <= 1");
  ScalarUtility u;
  u.kind_ = Builtin::linear_power;
  u.a_ = a;
  u.offset_ = offset;
  return u;
}

ScalarUtility ScalarUtility::exp_cara(double offset) {
  ScalarUtility u;
  u.kind_ = Builtin::exp_cara;
  u.offset_ = offset;
  return u;
}

ScalarUtility ScalarUtility::linear(double offset) {
  ScalarUtility u;
  u.kind_ = Builtin::linear;
  u.offset_ = offset;
  return u;
}

ScalarUtility ScalarUtility::piecewise_linear_unchecked(Vec knots, Vec slopes, double offset) {
  if (slopes.size() != knots.size() + 1)
    throw ParameterError("piecewise_linear needs one more slope than knots");
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (!(knots[i] > knots[i - 1])) throw ParameterError("piecewise_linear knots must increase");
  ScalarUtility u;
  u.kind_ = Builtin::piecewise_linear;
  u.offset_ = offset;
  u.knots_ = std::move(knots);
  u.slopes_ = std::move(slopes);
  u.prepare_table();
  return u;
}

ScalarUtility ScalarUtility::piecewise_linear(Vec knots, Vec slopes, double offset) {
  for (std::size_t i = 0; i < slopes.size(); ++i) {
    if (!(slopes[i] >= 0.0) || !std::isfinite(slopes[i]))
      throw ParameterError("piecewise_linear slopes must be finite and nonnegative");
    if (i > 0 && slopes[i] > slopes[i - 1])
      throw ParameterError("piecewise_linear slopes must be nonincreasing");
  }
  return piecewise_linear_unchecked(std::move(knots), std::move(slopes), offset);
}

void ScalarUtility::prepare_table() {
  // G is an antiderivative of the slope function with G(knot_0) = 0.
  knot_values_.assign(knots_.size(), 0.0);
  for (std::size_t j = 1; j < knots_.size(); ++j)
    knot_values_[j] = knot_values_[j - 1] + slopes_[j] * (knots_[j] - knots_[j - 1]);
}

std::string ScalarUtility::name() const {
  switch (kind_) {
    case Builtin::linear_power: return "linear_power";
    case Builtin::exp_cara: return "exp_cara";
    case Builtin::linear: return "linear";
    case Builtin::piecewise_linear: return "piecewise_linear";
  }
  return "?";
}

bool ScalarUtility::is_constant() const {
  if (kind_ != Builtin::piecewise_linear) return false;
  return std::all_of(slopes_.begin(), slopes_.end(), [](double s) { return s == 0.0; });
}

ScalarUtility ScalarUtility::with_floor(double floor) const {
  if (std::isnan(floor)) throw ParameterError("utility floor must not be NaN");
  ScalarUtility u = *this;
  u.floor_ = floor;
  return u;
}

ScalarUtility ScalarUtility::from_json(const json& j) {
  try {
    std::string name = j.at("name").get<std::string>();
    json params = j.value("params", json::object());
    double offset = params.value("offset", 0.0);
    auto floored = [&](ScalarUtility u) {
      return params.contains("floor") ? u.with_floor(params["floor"].get<double>()) : u;
    };
    if (name == "linear_power") return floored(linear_power(params.at("a").get<double>(), offset));
    if (name == "exp_cara") return floored(exp_cara(offset));
    if (name == "linear") return floored(linear(offset));
    if (name == "piecewise_linear")
      return floored(piecewise_linear(params.value("knots", Vec{}), params.at("slopes").get<Vec>(), offset));
    throw ParseError("unknown utility builtin '" + name + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("utility schema: ") + e.what());
  }
}

json ScalarUtility::to_json() const {
  json params = json::object();
  if (kind_ == Builtin::linear_power) params["a"] = a_;
  if (kind_ == Builtin::piecewise_linear) {
    params["knots"] = knots_;
    params["slopes"] = slopes_;
  }
  if (offset_ != 0.0) params["offset"] = offset_;
  if (std::isfinite(floor_)) params["floor"] = floor_;
  return json{{"name", name()}, {"params", params}};
}

namespace {

// Index of the segment containing x; ties at a knot go right.
std::size_t segment_right(const Vec& knots, double x) {
  return static_cast<std::size_t>(std::upper_bound(knots.begin(), knots.end(), x) - knots.begin());
}
std::size_t segment_left(const Vec& knots, double x) {
  return static_cast<std::size_t>(std::lower_bound(knots.begin(), knots.end(), x) - knots.begin());
}

}  // namespace

ExtReal ScalarUtility::operator()(double x) const {
  if (x < floor_) return ExtReal::neg_inf();
  switch (kind_) {
    case Builtin::linear_power:
      return x <= 0.0 ? ExtReal(a_ * x + offset_) : ExtReal(std::expm1(a_ * std::log1p(x)) + offset_);
    case Builtin::exp_cara:
      return ExtReal(-std::expm1(-x) + offset_);
    case Builtin::linear:
      return ExtReal(x + offset_);
    case Builtin::piecewise_linear: {
      auto G = [&](double y) {
        if (knots_.empty()) return slopes_[0] * y;
        std::size_t j = segment_right(knots_, y);
        if (j == 0) return slopes_[0] * (y - knots_[0]);
        return knot_values_[j - 1] + slopes_[j] * (y - knots_[j - 1]);
      };
      return ExtReal(offset_ + G(x) - G(0.0));
    }
  }
  return ExtReal(0.0);
}

double ScalarUtility::derivative(double x) const {
  if (x < floor_) return kNaN;
  switch (kind_) {
    case Builtin::linear_power:
      return x < 0.0 ? a_ : a_ * std::exp((a_ - 1.0) * std::log1p(x));
    case Builtin::exp_cara:
      return std::exp(-x);
    case Builtin::linear:
      return 1.0;
    case Builtin::piecewise_linear:
      return slopes_[x >= 0.0 ? segment_right(knots_, x) : segment_left(knots_, x)];
  }
  return 0.0;
}

double ScalarUtility::elasticity(double x) const {
  if (x < floor_) return kNaN;
  switch (kind_) {
    case Builtin::linear_power: {
      if (x <= 0.0) {
        double den = a_ * x + offset_;
        return den == 0.0 ? kNaN : a_ * x / den;
      }
      // P/(P - 1 + o) written as 1 / (1 + (o - 1)/P).
      double lp = a_ * std::log1p(x);
      double ratio;
      if (offset_ == 0.0) ratio = -1.0 / std::expm1(-lp);
      else ratio = 1.0 / (1.0 + (offset_ - 1.0) * std::exp(-lp));
      return a_ * (x / (1.0 + x)) * ratio;
    }
    case Builtin::exp_cara: {
      double den = offset_ == 0.0 ? std::expm1(x) : std::exp(x) * (1.0 + offset_) - 1.0;
      if (den == 0.0) return kNaN;
      if (std::isinf(den)) return 0.0;
      return x / den;
    }
    case Builtin::linear: {
      double den = x + offset_;
      return den == 0.0 ? kNaN : x / den;
    }
    case Builtin::piecewise_linear: {
      double u = (*this)(x).value();
      return u == 0.0 ? kNaN : x * derivative(x) / u;
    }
  }
  return kNaN;
}

double Section::elasticity(double x) const {
  double y = x - shift;
  if (shift == 0.0) return spec.elasticity(x);
  double u = spec(y).value();
  if (u == 0.0) return kNaN;
  if (y != 0.0) {
    double e = spec.elasticity(y);
    if (!std::isnan(e)) return e * (x / y);
  }
  return x * spec.derivative(y) / u;
}

// ---------------------------------------------------------------- random

RandomUtility RandomUtility::deterministic(ScalarUtility base) {
  RandomUtility u;
  u.kind_ = UtilityKind::deterministic;
  u.base_ = std::move(base);
  return u;
}

RandomUtility RandomUtility::benchmark(ScalarUtility base, std::map<std::string, double> Z) {
  for (const auto& [leaf, z] : Z)
    if (!std::isfinite(z)) throw ParameterError("benchmark shift for '" + leaf + "' is not finite");
  RandomUtility u;
  u.kind_ = UtilityKind::benchmark;
  u.base_ = std::move(base);
  u.Z_ = std::move(Z);
  return u;
}

RandomUtility RandomUtility::table(std::map<std::string, ScalarUtility> table) {
  RandomUtility u;
  u.kind_ = UtilityKind::table;
  u.table_ = std::move(table);
  return u;
}

const ScalarUtility& RandomUtility::base() const {
  if (!base_) throw ParameterError("table utilities have no base");
  return *base_;
}

RandomUtility RandomUtility::from_json(const json& j) {
  try {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "deterministic") return deterministic(ScalarUtility::from_json(j.at("base")));
    if (kind == "benchmark")
      return benchmark(ScalarUtility::from_json(j.at("base")),
                       j.at("Z").get<std::map<std::string, double>>());
    if (kind == "table") {
      std::map<std::string, ScalarUtility> t;
      for (auto it = j.at("table").begin(); it != j.at("table").end(); ++it)
        t.emplace(it.key(), ScalarUtility::from_json(it.value()));
      return table(std::move(t));
    }
    throw ParseError("unknown utility kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("utility schema: ") + e.what());
  }
}

json RandomUtility::to_json() const {
  json j;
  switch (kind_) {
    case UtilityKind::deterministic:
      j["kind"] = "deterministic";
      j["base"] = base_->to_json();
      break;
    case UtilityKind::benchmark:
      j["kind"] = "benchmark";
      j["base"] = base_->to_json();
      j["Z"] = Z_;
      break;
    case UtilityKind::table: {
      j["kind"] = "table";
      json t = json::object();
      for (const auto& [leaf, s] : table_) t[leaf] = s.to_json();
      j["table"] = t;
      break;
    }
  }
  return j;
}

Section RandomUtility::section(std::string_view leaf) const {
  switch (kind_) {
    case UtilityKind::deterministic:
      return Section{*base_, 0.0};
    case UtilityKind::benchmark: {
      auto it = Z_.find(std::string(leaf));
      if (it == Z_.end()) throw UnknownLeaf("no reference point Z for leaf '" + std::string(leaf) + "'");
      return Section{*base_, it->second};
    }
    case UtilityKind::table: {
      auto it = table_.find(std::string(leaf));
      if (it == table_.end()) throw UnknownLeaf("no utility entry for leaf '" + std::string(leaf) + "'");
      return Section{it->second, 0.0};
    }
  }
  throw UnknownLeaf(std::string(leaf));
}

RandomUtility load_utility(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return RandomUtility::from_json(j);
}

RandomUtility load_utility_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open utility file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_utility(ss.str());
}

std::vector<Section> bind_sections(const RandomUtility& u, const ScenarioTree& tree) {
  std::vector<Section> out(tree.size());
  for (NodeIndex i : tree.leaves()) out[i] = u.section(tree.node(i).id);
  return out;
}

std::string to_string(Side s) { return s == Side::plus_infinity ? "plus_infinity" : "minus_infinity"; }

// ---------------------------------------------------------------- elasticity

AEResult asymptotic_elasticity(const Section& s, Side side) {
  AEResult r;
  const double sign = side == Side::plus_infinity ? 1.0 : -1.0;
  std::vector<double> valid;
  for (int j = 10; j <= 60; ++j) {
    double e = s.elasticity(sign * std::ldexp(1.0, j));
    r.scan.push_back(e);
    if (!std::isnan(e)) valid.push_back(e);
  }
  if (valid.empty()) throw DomainError("utility vanishes on the whole tail; elasticity undefined");
  const std::size_t n = valid.size();
  const std::size_t w = std::min<std::size_t>(5, n);
  bool up = true, down = true;
  for (std::size_t i = n - w + 1; i < n; ++i) {
    up = up && valid[i] > valid[i - 1];
    down = down && valid[i] < valid[i - 1];
  }
  if (valid.back() > 1e12 && up) {
    r.value = ExtReal::pos_inf();
    return r;
  }
  if (valid.back() < -1e12 && down) {
    r.value = ExtReal::neg_inf();
    return r;
  }
  double lo = *std::min_element(valid.end() - w, valid.end());
  double hi = *std::max_element(valid.end() - w, valid.end());
  if (hi - lo <= 1e-6) {
    r.converged = true;
    r.value = valid.back();
    return r;
  }
  std::size_t k = std::min<std::size_t>(10, n);
  r.value = side == Side::plus_infinity ? *std::max_element(valid.end() - k, valid.end())
                                        : *std::min_element(valid.end() - k, valid.end());
  return r;
}

AEResult asymptotic_elasticity(const ScalarUtility& spec, Side side) {
  return asymptotic_elasticity(Section{spec, 0.0}, side);
}

// ---------------------------------------------------------------- certificates

namespace {

template <class F>
SweepResult sweep(const Section& s, const F& rhs_of) {
  SweepResult r;
  for (int i = 0; i < 100; ++i) {
    double lam = std::pow(10.0, 4.0 * i / 99.0);
    for (int k = 0; k < 100; ++k) {
      double x = -1e3 + 2e3 * k / 99.0;
      ExtReal lhs = s(lam * x);
      if (lhs.is_neg_inf()) continue;
      ExtReal u = s(x);
      double rhs = rhs_of(lam, u);
      double excess = lhs.value() - rhs;
      if (std::isnan(excess)) excess = kInf;
      if (excess > r.worst_excess) {
        r.worst_excess = excess;
        r.lambda = lam;
        r.x = x;
      }
      if (excess > 0.0) r.ok = false;
    }
  }
  return r;
}

double pos(ExtReal v) { return v.positive_part().value(); }
double neg(ExtReal v) { return v.negative_part().value(); }

// 200 log-spaced points from |from| out to 2^60 in the direction of `from`.
bool ratio_holds(const Section& s, double from, double gamma, bool above) {
  const double end = std::ldexp(1.0, 60);
  const double a = std::fabs(from);
  if (a >= end) return false;
  for (int i = 0; i < 200; ++i) {
    double m = a * std::pow(end / a, i / 199.0);
    double x = from < 0 ? -m : m;
    double e = s.elasticity(x);
    if (std::isnan(e)) return false;
    if (above ? !(e < gamma) : !(e > gamma)) return false;
  }
  return true;
}

}  // namespace

SweepResult certificate_sweep(const Section& s, double gamma, double C) {
  return sweep(s, [&](double lam, ExtReal u) {
    double base = ext_add(u, ExtReal(C)).value();
    return std::pow(lam, gamma) * base + 1e-9 * (1.0 + std::fabs(u.value()));
  });
}

ScalarCertificate construct_gamma_C(const Section& s, double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0) throw RAEViolation("gamma must be positive and different from 1");
  ScalarCertificate c;
  c.gamma = gamma;
  const double cap = std::ldexp(1.0, 60);
  if (gamma > 1.0) {
    AEResult ae = asymptotic_elasticity(s, Side::minus_infinity);
    if (!(ae.value > ExtReal(gamma)))
      throw RAEViolation("no certificate on the minus side: AE_-inf = " + ae.value.to_string() +
                         " is not above gamma = " + fmt(gamma));
    c.side = Side::minus_infinity;
    for (double xl = -1.0; xl >= -cap; xl *= 2.0) {
      if (!(s(xl) < ExtReal(0.0)) || !ratio_holds(s, xl, gamma, false)) continue;
      double C = pos(s(0.0)) + neg(s(0.0)) + neg(s(xl));
      if (!std::isfinite(C) || !certificate_sweep(s, gamma, C).ok) continue;
      c.x_lower = xl;
      c.C = C;
      return c;
    }
    throw SearchExhausted("no minus-side anchor above -2^60");
  }
  AEResult ae = asymptotic_elasticity(s, Side::plus_infinity);
  if (!(ae.value < ExtReal(gamma)))
    throw RAEViolation("no certificate on the plus side: AE_+inf = " + ae.value.to_string() +
                       " is not below gamma = " + fmt(gamma));
  if (!(s(cap) > ExtReal(0.0))) throw RAEViolation("plus side needs a positive limit at +inf");
  c.side = Side::plus_infinity;
  double xp = -1.0;
  while (!(s(xp) < ExtReal(0.0))) {
    xp *= 2.0;
    if (xp < -cap) throw SearchExhausted("no negative value of U above -2^60");
  }
  c.x_prime = xp;
  for (double xb = 1.0; xb <= cap; xb *= 2.0) {
    if (!(s(xb) > ExtReal(0.0)) || !ratio_holds(s, xb, gamma, true)) continue;
    double C = pos(s(xb)) + neg(s(xp)) + neg(s(0.0));
    if (!std::isfinite(C) || !certificate_sweep(s, gamma, C).ok) continue;
    c.x_bar = xb;
    c.C = C;
    return c;
  }
  throw SearchExhausted("no plus-side anchor below 2^60");
}

ScalarCertificate construct_gamma_C(const ScalarUtility& spec, double gamma) {
  return construct_gamma_C(Section{spec, 0.0}, gamma);
}

bool gamma1_bound_check(const ScalarUtility& spec) {
  Section s{spec, 0.0};
  double neg0 = neg(s(0.0));
  return sweep(s, [&](double lam, ExtReal u) {
           return lam * ext_add(u, ExtReal(neg0)).value() + 1e-9 * (1.0 + std::fabs(u.value()));
         }).ok;
}

GammaChoice choose_gamma(const std::vector<Section>& sections) {
  double min_minus = kInf;
  double max_plus = -kInf;
  bool minus_ok = true, plus_ok = true, any = false;
  for (const Section& s : sections) {
    if (s.is_constant()) continue;
    any = true;
    ExtReal am = asymptotic_elasticity(s, Side::minus_infinity).value;
    ExtReal ap = asymptotic_elasticity(s, Side::plus_infinity).value;
    if (!(am > ExtReal(1.0 + 1e-9))) minus_ok = false;
    min_minus = std::min(min_minus, am.value());
    if (!(ap < ExtReal(1.0 - 1e-9)) || !(s(std::ldexp(1.0, 60)) > ExtReal(0.0))) plus_ok = false;
    max_plus = std::max(max_plus, ap.value());
  }
  if (!any) throw RAEViolation("every section is constant");
  if (minus_ok) return {Side::minus_infinity, std::isinf(min_minus) ? 2.0 : std::min(2.0, 0.5 * (1.0 + min_minus))};
  if (plus_ok) return {Side::plus_infinity, 0.5 * (std::max(max_plus, 0.0) + 1.0)};
  throw RAEViolation("asymptotic elasticity is 1 on both sides for some section");
}

AECertificate certify_growth(const RandomUtility& u, const ScenarioTree& tree, std::optional<double> gamma) {
  std::vector<Section> sections;
  std::vector<NodeIndex> leaves = tree.leaves();
  for (NodeIndex i : leaves) sections.push_back(u.section(tree.node(i).id));
  GammaChoice g = gamma ? GammaChoice{*gamma > 1.0 ? Side::minus_infinity : Side::plus_infinity, *gamma}
                        : choose_gamma(sections);
  if (g.gamma == 1.0 || !(g.gamma > 0.0)) throw RAEViolation("gamma must be positive and different from 1");
  AECertificate cert;
  cert.gamma = g.gamma;
  cert.side = g.side;

  if (u.kind() == UtilityKind::deterministic) {
    ScalarCertificate c = construct_gamma_C(u.base(), g.gamma);
    for (NodeIndex i : leaves) {
      cert.C_of_leaf[tree.node(i).id] = c.C;
      cert.anchors[tree.node(i).id] = {c.x_lower, c.x_prime, c.x_bar};
    }
  } else if (u.kind() == UtilityKind::benchmark) {
    Section base{u.base(), 0.0};
    if (g.side == Side::minus_infinity) {
      ExtReal ae = asymptotic_elasticity(base, Side::minus_infinity).value;
      if (!(ae > ExtReal(g.gamma))) throw RAEViolation("AE_-inf of the base utility is not above gamma");
      double gt = ae.is_pos_inf() ? 2.0 * g.gamma : 0.5 * (g.gamma + ae.value());
      ScalarCertificate c = construct_gamma_C(base, gt);
      double eta = g.gamma / gt;
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        const Section& s = sections[k];
        double Z = s.shift;
        double X = std::min({c.x_lower, c.x_lower + Z, -eta / (1.0 - eta) * Z});
        const std::string& id = tree.node(leaves[k]).id;
        cert.C_of_leaf[id] = pos(s(0.0)) + neg(s(0.0)) + neg(s(X));
        cert.anchors[id] = {X, 0.0, 0.0};
      }
    } else {
      ExtReal ae = asymptotic_elasticity(base, Side::plus_infinity).value;
      if (!(ae < ExtReal(g.gamma))) throw RAEViolation("AE_+inf of the base utility is not below gamma");
      double gt = 0.5 * (g.gamma + std::max(ae.value(), 0.0));
      ScalarCertificate c = construct_gamma_C(base, gt);
      double eta = g.gamma / gt;
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        const Section& s = sections[k];
        double Z = s.shift;
        double Xbar = std::max({c.x_bar, c.x_bar + Z, -eta / (1.0 - eta) * Z});
        double Xp = std::min(c.x_prime, c.x_prime + Z);
        const std::string& id = tree.node(leaves[k]).id;
        cert.C_of_leaf[id] = pos(s(Xbar)) + neg(s(Xp)) + neg(s(0.0));
        cert.anchors[id] = {0.0, Xp, Xbar};
      }
    }
  } else {
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      const Section& s = sections[k];
      const std::string& id = tree.node(leaves[k]).id;
      if (s.is_constant()) {
        cert.C_of_leaf[id] = neg(s(0.0));
        cert.anchors[id] = {};
        continue;
      }
      ScalarCertificate c = construct_gamma_C(s, g.gamma);
      cert.C_of_leaf[id] = c.C;
      cert.anchors[id] = {c.x_lower, c.x_prime, c.x_bar};
    }
  }

  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const std::string& id = tree.node(leaves[k]).id;
    SweepResult r = certificate_sweep(sections[k], cert.gamma, cert.C_of_leaf.at(id));
    if (!r.ok)
      throw CertificationFailure("ae_certificate",
                                 "leaf=" + id + " x=" + fmt(r.x) + " lambda=" + fmt(r.lambda),
                                 "growth inequality fails by " + fmt(r.worst_excess));
  }
  return cert;
}

namespace {

// Smallest magnitude x < 0 with s(x) <= target, by doubling then bisection.
std::optional<double> first_below(const Section& s, double target) {
  const double cap = std::ldexp(1.0, 60);
  double hi = 0.0;  // fails (or is the origin)
  double lo = -1.0;
  while (!(s(lo) <= ExtReal(target))) {
    hi = lo;
    lo *= 2.0;
    if (lo < -cap) return std::nullopt;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::fabs(lo); ++it) {
    double mid = 0.5 * (lo + hi);
    if (s(mid) <= ExtReal(target)) lo = mid;
    else hi = mid;
  }
  return lo;
}

}  // namespace

std::map<std::string, double> assumption5_lowerbar(const RandomUtility& u, const ScenarioTree& tree,
                                                   const AECertificate& cert) {
  std::map<std::string, double> out;
  for (NodeIndex i : tree.leaves()) {
    const std::string& id = tree.node(i).id;
    Section s = u.section(id);
    double C = cert.C_of_leaf.at(id);
    auto x = first_below(s, -C - 1.0);
    if (!x)
      throw AssumptionFailure("lowerbar", id,
                              "U(" + id + ", x) >= -C - 1 for every x above -2^60");
    out[id] = *x;
  }
  return out;
}

// ---------------------------------------------------------------- type (A)

const ClauseReport* TypeAReport::first_failure() const {
  for (const ClauseReport& c : clauses)
    if (!c.ok) return &c;
  return nullptr;
}

json TypeAReport::to_json() const {
  json j;
  j["verdict"] = verdict;
  json cl = json::object();
  for (const ClauseReport& c : clauses)
    cl[c.name] = json{{"ok", c.ok}, {"detail", c.detail}, {"evidence", c.evidence}};
  j["clauses"] = cl;
  if (certificate) {
    j["gamma"] = certificate->gamma;
    j["side"] = to_string(certificate->side);
    j["C"] = certificate->C_of_leaf;
  }
  if (!x_lower.empty()) j["x_lower"] = x_lower;
  if (!C1.empty()) {
    j["C1"] = C1;
    j["p"] = p;
  }
  return j;
}

namespace {

constexpr int kOrders[] = {1, 2, 4, 8};

// sup over sampled product priors of E_P |X|^r for each order r.
struct MomentSampler {
  const Market& m;
  std::vector<Vec> dists;

  MomentSampler(const Market& mk, unsigned seed) : m(mk) {
    ExtremeProducts prods(m);
    if (prods.count() <= 4096) {
      for (const ProductPriorSpec& p : prods) dists.push_back(leaf_distribution(m.tree, p));
      return;
    }
    std::mt19937_64 rng(seed);
    const auto& inner = prods.interior();
    for (int k = 0; k < 64; ++k) {
      std::vector<std::size_t> digits(inner.size());
      for (std::size_t i = 0; i < inner.size(); ++i)
        digits[i] = std::uniform_int_distribution<std::size_t>(0, m.extremes(inner[i]).size() - 1)(rng);
      dists.push_back(leaf_distribution(m.tree, prods.at(digits)));
    }
  }

  json moments(const Vec& x, bool& finite) const {
    json arr = json::array();
    for (int r : kOrders) {
      double sup = 0.0;
      for (const Vec& d : dists) {
        double e = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i)
          if (d[i] > 0.0) e += d[i] * std::pow(std::fabs(x[i]), r);
        sup = std::max(sup, e);
      }
      if (!std::isfinite(sup)) finite = false;
      arr.push_back(std::isfinite(sup) ? json(sup) : json("inf"));
    }
    return arr;
  }
};

// U(x) >= -C1 (1 + |x|^p): on the sweep plus a geometric tail whose ratio
// must settle rather than grow.
std::optional<double> fit_lower_bound(const Section& s, int p) {
  double c1 = 0.0;
  auto ratio = [&](double x) { return neg(s(x)) / (1.0 + std::pow(std::fabs(x), p)); };
  for (int k = 0; k <= 2000; ++k) c1 = std::max(c1, ratio(-1e3 + k));
  double r50 = 0.0, r60 = 0.0;
  for (int j = 10; j <= 60; ++j) {
    double r = ratio(-std::ldexp(1.0, j));
    c1 = std::max(c1, r);
    if (j == 50) r50 = r;
    if (j == 60) r60 = r;
  }
  if (!std::isfinite(c1) || !std::isfinite(r60)) return std::nullopt;
  if (r60 > r50 * (1.0 + 1e-6) + 1e-12) return std::nullopt;
  return c1;
}

}  // namespace

TypeAReport assess_type_A(const RandomUtility& u, const Market& m, std::optional<double> gamma_hint,
                          unsigned seed) {
  TypeAReport rep;
  const ScenarioTree& tree = m.tree;
  std::vector<NodeIndex> leaves = tree.leaves();
  std::vector<Section> sections;
  for (NodeIndex i : leaves) sections.push_back(u.section(tree.node(i).id));
  MomentSampler sampler(m, seed);

  {
    ClauseReport c{"positive_moments", true, "", {}};
    Vec x;
    for (const Section& s : sections) x.push_back(pos(s(1.0)));
    bool finite = true;
    c.evidence = json{{"orders", kOrders}, {"sup", sampler.moments(x, finite)},
                      {"priors_sampled", sampler.dists.size()}};
    c.ok = finite;
    if (!finite) c.detail = "U+(., 1) has an infinite moment";
    rep.clauses.push_back(std::move(c));
  }

  {
    ClauseReport c{"ae_certificate", false, "", {}};
    try {
      rep.certificate = certify_growth(u, tree, gamma_hint);
      Vec x;
      bool finite = true;
      for (NodeIndex i : leaves) {
        double v = rep.certificate->C_of_leaf.at(tree.node(i).id);
        finite = finite && std::isfinite(v);
        x.push_back(v);
      }
      c.evidence = json{{"gamma", rep.certificate->gamma}, {"side", to_string(rep.certificate->side)},
                        {"sup", sampler.moments(x, finite)}};
      c.ok = finite;
      if (!finite) c.detail = "C has an infinite moment";
    } catch (const CertificationFailure& e) {
      c.detail = std::string(e.what()) + " (" + e.witness() + ")";
    } catch (const RAEViolation& e) {
      c.detail = e.what();
    } catch (const SearchExhausted& e) {
      c.detail = e.what();
    }
    rep.clauses.push_back(std::move(c));
  }

  {
    ClauseReport c{"lowerbar_gap", false, "", {}};
    if (!rep.certificate) {
      c.detail = "requires ae_certificate";
    } else {
      try {
        const AECertificate& cert = *rep.certificate;
        if (u.kind() == UtilityKind::table) {
          rep.x_lower = assumption5_lowerbar(u, tree, cert);
        } else {
          Section base{u.base(), 0.0};
          auto xl = first_below(base, -neg(base(0.0)) - 1.0);
          if (!xl) throw AssumptionFailure("lowerbar", "", "base utility bounded below");
          for (std::size_t k = 0; k < leaves.size(); ++k) {
            const std::string& id = tree.node(leaves[k]).id;
            double Y = *xl * (cert.C_of_leaf.at(id) + 1.0);
            rep.x_lower[id] = std::min(Y + sections[k].shift, -1.0);
          }
        }
        Vec gaps, recip;
        bool ok = true;
        std::string worst;
        for (std::size_t k = 0; k < leaves.size(); ++k) {
          const std::string& id = tree.node(leaves[k]).id;
          double C = cert.C_of_leaf.at(id);
          double gap = ext_add(sections[k](rep.x_lower.at(id)), ExtReal(C)).value();
          if (!(gap <= -1.0 + 1e-9 * (1.0 + C))) {
            ok = false;
            worst = "leaf=" + id + " x=" + fmt(rep.x_lower.at(id));
          }
          gaps.push_back(rep.x_lower.at(id));
          recip.push_back(1.0 / std::fabs(gap));
        }
        bool finite = true;
        c.evidence = json{{"x_lower_sup", sampler.moments(gaps, finite)},
                          {"reciprocal_gap_sup", sampler.moments(recip, finite)}};
        c.ok = ok && finite;
        if (!ok) c.detail = "gap U(X) + C <= -1 fails at " + worst;
      } catch (const AssumptionFailure& e) {
        c.detail = e.what();
      }
    }
    rep.clauses.push_back(std::move(c));
  }

  {
    ClauseReport c{"polynomial_lower_bound", false, "", {}};
    for (int p : kOrders) {
      std::map<std::string, double> c1;
      bool all = true;
      for (std::size_t k = 0; k < leaves.size() && all; ++k) {
        auto v = fit_lower_bound(sections[k], p);
        if (!v) all = false;
        else c1[tree.node(leaves[k]).id] = *v;
      }
      if (!all) continue;
      rep.C1 = c1;
      rep.p = p;
      Vec x;
      for (NodeIndex i : leaves) x.push_back(c1.at(tree.node(i).id));
      bool finite = true;
      c.evidence = json{{"p", p}, {"C1_sup", sampler.moments(x, finite)}};
      c.ok = finite;
      break;
    }
    if (!c.ok) c.detail = "no polynomial lower bound with p in {1,2,4,8}";
    rep.clauses.push_back(std::move(c));
  }

  rep.verdict = std::all_of(rep.clauses.begin(), rep.clauses.end(), [](const ClauseReport& c) { return c.ok; });
  return rep;
}

TypeAReport certify_type_A(const RandomUtility& u, const Market& m, std::optional<double> gamma_hint,
                           unsigned seed) {
  TypeAReport rep = assess_type_A(u, m, gamma_hint, seed);
  if (const ClauseReport* f = rep.first_failure()) throw CertificationFailure(f->name, f->detail, "type (A) clause '" + f->name + "' fails: " + f->detail);
  return rep;
}

}  // namespace robustdp
