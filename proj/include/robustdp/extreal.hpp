#pragma once

#include <compare>
#include <limits>
#include <span>
#include <string>

namespace robustdp {

/**
 * A real number extended by +inf and -inf.  NaN is unrepresentable: the
 * constructor throws, so every ExtReal is totally ordered.
 *
 * Addition follows the absorbing -inf rule: (+inf) + (-inf) = -inf.
 */
class ExtReal {
 public:
  constexpr ExtReal() noexcept : v_(0.0) {}
  ExtReal(double v);  // NOLINT: implicit by design, throws NaNError on NaN

  static constexpr ExtReal pos_inf() noexcept {
    return ExtReal(std::numeric_limits<double>::infinity(), Raw{});
  }
  static constexpr ExtReal neg_inf() noexcept {
    return ExtReal(-std::numeric_limits<double>::infinity(), Raw{});
  }

  bool is_finite() const noexcept { return v_ - v_ == 0.0; }
  bool is_pos_inf() const noexcept { return v_ == pos_inf().v_; }
  bool is_neg_inf() const noexcept { return v_ == neg_inf().v_; }

  /// Payload as a double; infinities map to IEEE infinities.
  double value() const noexcept { return v_; }
  /// Payload, throwing DomainError when infinite.
  double finite() const;

  ExtReal positive_part() const noexcept {
    return ExtReal(v_ > 0 ? v_ : 0.0, Raw{});
  }
  ExtReal negative_part() const noexcept {
    return ExtReal(v_ < 0 ? -v_ : 0.0, Raw{});
  }

  ExtReal operator-() const noexcept { return ExtReal(-v_, Raw{}); }

  friend bool operator==(ExtReal a, ExtReal b) noexcept { return a.v_ == b.v_; }
  friend std::partial_ordering operator<=>(ExtReal a, ExtReal b) noexcept {
    return a.v_ <=> b.v_;
  }

  std::string to_string() const;

 private:
  struct Raw {};
  constexpr ExtReal(double v, Raw) noexcept : v_(v) {}
  double v_;
};

ExtReal ext_add(ExtReal a, ExtReal b) noexcept;
inline ExtReal operator+(ExtReal a, ExtReal b) noexcept { return ext_add(a, b); }
inline ExtReal operator-(ExtReal a, ExtReal b) noexcept { return ext_add(a, -b); }

/// Product of a finite nonnegative scale and an extended real; 0 * inf = 0.
ExtReal scale(double w, ExtReal v);

/// Throws WeightError unless weights are nonnegative and sum to 1 within tol.
void validate_weights(std::span<const double> weights, double tol = 1e-12);

/// Integral under the -inf convention: sum w v+ - sum w v-, or -inf when
/// both parts diverge.  Zero-weight atoms are skipped.
ExtReal minus_integral(std::span<const ExtReal> values,
                       std::span<const double> weights);

/// Dual convention, +inf when both parts diverge.
ExtReal plus_integral(std::span<const ExtReal> values,
                      std::span<const double> weights);

}  // namespace robustdp
