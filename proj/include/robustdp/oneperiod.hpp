#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "robustdp/extreal.hpp"
#include "robustdp/geometry.hpp"

namespace robustdp {

/// Wealth -> utility for one outcome; nondecreasing and concave.
using ValueSection = std::function<ExtReal(double)>;

/// Growth exponents derived from a certificate exponent gamma != 1.
struct Exponents {
  double gamma_lo = 1.0;  // min(1, gamma)
  double gamma_hi = 1.0;  // max(1, gamma)
  double eta = 0.5;       // strictly between gamma_lo/gamma_hi and 1
};
Exponents exponents_for(double gamma);

struct OnePeriodInstance {
  std::string node;  // label for error provenance
  std::vector<Vec> increments;  // per outcome
  std::vector<Vec> extremes;    // kernels over outcomes
  Vec p_star;
  std::vector<ValueSection> V;
  Vec C;  // per outcome, nonnegative
  AffineFrame frame;
  double alpha = 1.0;
  bool alpha_approximate = false;
  Exponents exps;
};

struct OnePeriodSetup {
  std::string node;
  std::vector<Vec> increments;
  std::vector<Vec> extremes;
  std::optional<Vec> p_star;  // defaults to the uniform mixture
  std::vector<ValueSection> V;
  Vec C;
  double gamma = 2.0;
  double alpha_safety = 0.9;
};

/// Validates the reference prior against the support geometry and fixes
/// alpha.  NAFailure when 0 is not in ri(conv(D)) or the reference prior's
/// support spans a smaller hull.
OnePeriodInstance make_instance(OnePeriodSetup setup);

/// E_prior V(., x + h.Y) under the -inf convention.
ExtReal psi_p(const OnePeriodInstance& inst, const Vec& prior, double x, const Vec& h);
/// Minimum of psi_p over the extremes.
ExtReal psi_robust(const OnePeriodInstance& inst, double x, const Vec& h);

struct BoundPack {
  double c_star = 0.0;
  double l_star = 0.0;
  double n0_star = 1.0;
  double Kbar = 1.0;
  std::function<double(double)> K0_of_x;
  std::function<double(double)> K1_of_x;
  std::function<double(int)> N_of_m;  // real-valued; n_m is its ceiling
};

/// Bound constants of the instance.  NtUnbounded (pb_inequality) when no
/// integer below 2^40 makes V(., -k) negative enough with enough mass.
BoundPack compute_bounds(const OnePeriodInstance& inst);

/// Smallest k >= 1 with mass{V(., -k) <= -level} >= 1 - alpha/2 under
/// `kernel`; nullopt above the cap.
std::optional<double> threshold_wealth(const std::vector<ValueSection>& V, const Vec& kernel,
                                       double level, double alpha, double cap = 1099511627776.0);

struct MaxResult {
  Vec h;  // ambient coordinates
  ExtReal value;
  bool boundary_flag = false;
  double K1 = 0.0;
};

/// Concave maximization of h -> psi_robust(x, h) over the frame, |h| <= K1(x).
MaxResult maximize(const OnePeriodInstance& inst, double x, const BoundPack& bounds, double tol = 1e-9);
/// Same search with an explicit radius.
MaxResult maximize_within(const OnePeriodInstance& inst, double x, double radius, double tol = 1e-9);

enum class CheckStatus { pass, fail, untested };
std::string to_string(CheckStatus s);

/// v(-n_m) <= -m + tol, untested when n_m is not a finite double.
CheckStatus verify_nm(const OnePeriodInstance& inst, const BoundPack& bounds, int m, double tol = 1e-9);

/// Argmax of a concave extended-real function of one variable on [-cap, cap].
/// Brackets outward from 0 by doubling from `scale`, then golden-section.
/// Ties move toward the origin.
struct LineMax {
  double s = 0.0;
  ExtReal value;
};
LineMax line_maximize(const std::function<ExtReal(double)>& f, double scale, double cap, double tol);

}  // namespace robustdp
