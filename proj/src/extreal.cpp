#include "robustdp/extreal.hpp"

#include <cmath>
#include <cstdio>

#include "robustdp/errors.hpp"

namespace robustdp {

ExtReal::ExtReal(double v) : v_(v) {
  if (std::isnan(v)) throw NaNError("NaN is not an extended real");
}

double ExtReal::finite() const {
  if (!is_finite()) throw DomainError("expected a finite value, got " + to_string());
  return v_;
}

std::string ExtReal::to_string() const {
  if (is_pos_inf()) return "+inf";
  if (is_neg_inf()) return "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v_);
  return buf;
}

ExtReal ext_add(ExtReal a, ExtReal b) noexcept {
  if (a.is_neg_inf() || b.is_neg_inf()) return ExtReal::neg_inf();
  if (a.is_pos_inf() || b.is_pos_inf()) return ExtReal::pos_inf();
  double s = a.value() + b.value();
  // Finite operands can overflow; the sign survives, NaN cannot arise.
  return ExtReal(s);
}

ExtReal scale(double w, ExtReal v) {
  if (!(w >= 0) || std::isinf(w)) throw WeightError("scale factor must be finite and nonnegative");
  if (w == 0.0) return ExtReal(0.0);
  return ExtReal(w * v.value());
}

void validate_weights(std::span<const double> weights, double tol) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || std::isinf(w)) throw WeightError("negative or non-finite weight");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > tol) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "weights sum to %.17g", sum);
    throw WeightError(buf);
  }
}

namespace {

struct Parts {
  double pos = 0.0;
  double neg = 0.0;
};

Parts split(std::span<const ExtReal> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw WeightError("values and weights differ in length");
  validate_weights(weights);
  Parts p;
  for (std::size_t i = 0; i < values.size(); ++i) {
    double w = weights[i];
    if (w == 0.0) continue;
    double v = values[i].value();
    if (v > 0) p.pos += w * v;
    else if (v < 0) p.neg -= w * v;
  }
  return p;
}

}  // namespace

ExtReal minus_integral(std::span<const ExtReal> values,
                       std::span<const double> weights) {
  Parts p = split(values, weights);
  if (std::isinf(p.neg)) return ExtReal::neg_inf();
  if (std::isinf(p.pos)) return ExtReal::pos_inf();
  return ExtReal(p.pos - p.neg);
}

ExtReal plus_integral(std::span<const ExtReal> values,
                      std::span<const double> weights) {
  Parts p = split(values, weights);
  if (std::isinf(p.pos)) return ExtReal::pos_inf();
  if (std::isinf(p.neg)) return ExtReal::neg_inf();
  return ExtReal(p.pos - p.neg);
}

}  // namespace robustdp
