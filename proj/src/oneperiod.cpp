#include "robustdp/oneperiod.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robustdp/errors.hpp"

namespace robustdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCap = 1e300;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vec& v) { return std::sqrt(dot(v, v)); }

// a^(1/p) with the conventions 0^q = 0 and inf^q = inf.
double root(double a, double p) {
  if (a <= 0.0) return 0.0;
  return std::pow(a, 1.0 / p);
}

double neg(ExtReal v) { return v.negative_part().value(); }

}  // namespace

Exponents exponents_for(double gamma) {
  Exponents e;
  e.gamma_lo = std::min(1.0, gamma);
  e.gamma_hi = std::max(1.0, gamma);
  e.eta = std::min(0.99, 0.5 * (e.gamma_lo / e.gamma_hi + 1.0));
  return e;
}

OnePeriodInstance make_instance(OnePeriodSetup s) {
  const std::size_t n = s.increments.size();
  if (s.V.size() != n || s.C.size() != n) throw StructureError("one-period instance: outcome count mismatch");
  if (s.extremes.empty()) throw StructureError("one-period instance needs at least one prior");
  for (const Vec& e : s.extremes) {
    if (e.size() != n) throw StructureError("one-period instance: prior length mismatch");
    validate_weights(e);
  }
  OnePeriodInstance inst;
  inst.node = s.node;
  inst.p_star = s.p_star ? *s.p_star : uniform_mixture(s.extremes);
  validate_weights(inst.p_star);

  SupportSet full = support(s.increments, s.extremes);
  inst.frame = affine_hull(full);
  RiTest ri = zero_in_relative_interior(full);
  if (!ri.inside)
    throw NAFailure(s.node, ri.witness.value_or(Vec{}),
                    "0 is not in the relative interior of the support hull at '" + s.node + "'");
  SupportSet ref = support(s.increments, {inst.p_star});
  if (ref.points.size() != full.points.size() && affine_hull(ref).dim() != inst.frame.dim())
    throw NAFailure(s.node, {}, "reference prior support spans a smaller hull at '" + s.node + "'");
  if (!zero_in_relative_interior(ref).inside)
    throw NAFailure(s.node, {}, "0 is not in ri of the reference prior's support at '" + s.node + "'");

  AlphaEstimate a = quantitative_alpha(inst.p_star, s.increments, inst.frame);
  inst.alpha = a.approximate ? a.alpha * s.alpha_safety : a.alpha;
  inst.alpha_approximate = a.approximate;
  inst.exps = exponents_for(s.gamma);
  inst.increments = std::move(s.increments);
  inst.extremes = std::move(s.extremes);
  inst.V = std::move(s.V);
  inst.C = std::move(s.C);
  return inst;
}

namespace {

// V at each outcome, only for outcomes charged by some prior in `priors`.
std::vector<ExtReal> outcome_values(const OnePeriodInstance& inst, const std::vector<const Vec*>& priors,
                                    double x, const Vec& h) {
  std::vector<ExtReal> vals(inst.increments.size(), ExtReal(0.0));
  for (std::size_t i = 0; i < vals.size(); ++i) {
    bool charged = false;
    for (const Vec* p : priors) charged = charged || (*p)[i] > 0.0;
    if (charged) vals[i] = inst.V[i](x + dot(h, inst.increments[i]));
  }
  return vals;
}

}  // namespace

ExtReal psi_p(const OnePeriodInstance& inst, const Vec& prior, double x, const Vec& h) {
  auto vals = outcome_values(inst, {&prior}, x, h);
  return minus_integral(vals, prior);
}

ExtReal psi_robust(const OnePeriodInstance& inst, double x, const Vec& h) {
  std::vector<const Vec*> ps;
  for (const Vec& e : inst.extremes) ps.push_back(&e);
  auto vals = outcome_values(inst, ps, x, h);
  ExtReal best = ExtReal::pos_inf();
  for (const Vec& e : inst.extremes) best = std::min(best, minus_integral(vals, e));
  return best;
}

std::optional<double> threshold_wealth(const std::vector<ValueSection>& V, const Vec& kernel, double level,
                                       double alpha, double cap) {
  auto ok = [&](double k) {
    double mass = 0.0;
    for (std::size_t i = 0; i < V.size(); ++i)
      if (kernel[i] > 0.0 && V[i](-k) <= ExtReal(-level)) mass += kernel[i];
    return mass >= 1.0 - alpha / 2.0 - 1e-12;
  };
  if (ok(1.0)) return 1.0;
  double lo = 1.0, hi = 2.0;
  while (!ok(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) return std::nullopt;
  }
  // ok(lo) fails, ok(hi) holds; integers only.
  while (hi - lo > 1.0) {
    double mid = std::floor(0.5 * (lo + hi));
    if (ok(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

BoundPack compute_bounds(const OnePeriodInstance& inst) {
  BoundPack b;
  const Vec& p = inst.p_star;
  const std::size_t n = inst.increments.size();
  const std::size_t d = inst.frame.ambient;
  const double alpha = inst.alpha;
  const double eta = inst.exps.eta, glo = inst.exps.gamma_lo, ghi = inst.exps.gamma_hi;

  for (std::size_t i = 0; i < n; ++i)
    if (p[i] > 0.0) b.c_star += p[i] * inst.C[i];

  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    for (std::size_t i = 0; i < n; ++i) {
      if (p[i] <= 0.0) continue;
      double w = 1.0;
      for (std::size_t k = 0; k < d; ++k) w += ((mask >> k) & 1 ? 1.0 : -1.0) * inst.increments[i][k];
      b.l_star += p[i] * inst.V[i](w).positive_part().value();
    }
  }

  auto n0 = threshold_wealth(inst.V, p, 1.0 + 2.0 * b.c_star / alpha, alpha);
  if (!n0)
    throw NtUnbounded(inst.node, "no wealth level below 2^40 makes the value negative enough with mass " +
                                     std::to_string(1.0 - alpha / 2.0));
  b.n0_star = *n0;

  const double n0v = b.n0_star, c = b.c_star, l = b.l_star;
  const double gap = eta * ghi - glo;
  auto K0 = [=](double x) {
    double xp = std::max(x, 0.0);
    double r = (xp + n0v) / alpha;
    return std::max({1.0, xp, r, root(r, 1.0 - eta)});
  };
  std::vector<Vec> extremes = inst.extremes;
  std::vector<ValueSection> V = inst.V;
  auto sup_neg = [extremes, V](double x) {
    double xm = -std::max(-x, 0.0);
    double best = 0.0;
    for (const Vec& e : extremes) {
      double s = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i)
        if (e[i] > 0.0) s += e[i] * neg(V[i](xm));
      best = std::max(best, s);
    }
    return best;
  };
  b.K0_of_x = K0;
  b.K1_of_x = [=](double x) {
    return std::max({K0(x), root(6.0 * l / alpha, gap), root(6.0 * c / alpha, gap),
                     root(6.0 / alpha * sup_neg(x), eta * ghi)});
  };
  b.Kbar = std::max({1.0, n0v / alpha, root(n0v / alpha, 1.0 - eta), root(8.0 * c / alpha, gap),
                     root(8.0 * l / alpha, gap)});
  const double Kbar = b.Kbar;
  b.N_of_m = [=](int m) {
    return n0v * root(4.0 / alpha * (m + (std::pow(Kbar, glo) + 1.0) * (l + c)), glo);
  };
  return b;
}

LineMax line_maximize(const std::function<ExtReal(double)>& f, double scale, double cap, double tol) {
  cap = std::min(cap, kCap);
  if (!(cap > 0.0)) return {0.0, f(0.0)};
  const double s0 = std::min(scale, cap);
  const ExtReal f0 = f(0.0);

  // Orient: walk toward the side that improves on f(0).
  double sign = 0.0;
  ExtReal fs = f(s0);
  if (fs > f0) sign = 1.0;
  else if (f(-s0) > f0) sign = -1.0;

  double lo, hi;
  if (sign == 0.0) {
    lo = -s0;
    hi = s0;
  } else {
    double a = 0.0, mid = s0;
    ExtReal fmid = sign > 0 ? fs : f(-s0);
    double b = std::min(2.0 * s0, cap);
    while (mid < cap) {
      ExtReal fb = f(sign * b);
      if (!(fb > fmid)) break;
      a = mid;
      mid = b;
      fmid = fb;
      b = std::min(2.0 * b, cap);
    }
    if (mid >= cap) b = cap;
    lo = sign > 0 ? a : -b;
    hi = sign > 0 ? b : -a;
  }

  // Golden section; on ties keep the half nearer the origin.
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
  ExtReal fc = f(c), fd = f(d);
  for (int it = 0; it < 600; ++it) {
    if (hi - lo <= tol * std::max({1.0, std::fabs(lo), std::fabs(hi)})) break;
    bool keep_left = fc > fd || (fc == fd && std::fabs(c) <= std::fabs(d));
    if (keep_left) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - r * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + r * (hi - lo);
      fd = f(d);
    }
  }
  LineMax best{0.5 * (lo + hi), ExtReal::neg_inf()};
  best.value = f(best.s);
  for (auto [s, v] : {std::pair{c, fc}, std::pair{d, fd}, std::pair{0.0, f0}})
    if (v > best.value) best = {s, v};
  return best;
}

namespace {

using Coords = std::vector<double>;

struct NMPoint {
  Coords c;
  ExtReal v;
};

bool better(const ExtReal& a, const ExtReal& b) { return a > b; }

// Nelder-Mead maximization over coordinates constrained to |c| <= radius.
NMPoint nelder_mead(const std::function<ExtReal(const Coords&)>& f, Coords start, double step, double tol) {
  const std::size_t k = start.size();
  std::vector<NMPoint> s;
  s.push_back({start, f(start)});
  for (std::size_t j = 0; j < k; ++j) {
    Coords c = start;
    c[j] += step;
    s.push_back({c, f(c)});
  }
  auto combine = [&](const Coords& a, const Coords& b, double t) {
    Coords out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = a[j] + t * (b[j] - a[j]);
    return out;
  };
  for (int it = 0; it < 4000 * static_cast<int>(k); ++it) {
    std::sort(s.begin(), s.end(), [](const NMPoint& a, const NMPoint& b) { return better(a.v, b.v); });
    double diam = 0.0, scale = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
      Coords dlt = combine(s[0].c, s[i].c, 1.0);
      for (std::size_t j = 0; j < k; ++j) dlt[j] -= s[0].c[j];
      diam = std::max(diam, norm(dlt));
    }
    scale = std::max(1.0, norm(s[0].c));
    if (diam <= tol * scale) break;
    Coords centroid(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) centroid[j] += s[i].c[j] / k;
    NMPoint& worst = s[k];
    Coords xr = combine(centroid, worst.c, -1.0);
    ExtReal fr = f(xr);
    if (better(fr, s[0].v)) {
      Coords xe = combine(centroid, worst.c, -2.0);
      ExtReal fe = f(xe);
      worst = better(fe, fr) ? NMPoint{xe, fe} : NMPoint{xr, fr};
    } else if (better(fr, s[k - 1].v)) {
      worst = {xr, fr};
    } else {
      bool outside = better(fr, worst.v);
      Coords xc = combine(centroid, outside ? xr : worst.c, 0.5);
      ExtReal fc = f(xc);
      if (better(fc, outside ? fr : worst.v) || fc == (outside ? fr : worst.v)) {
        worst = {xc, fc};
      } else {
        for (std::size_t i = 1; i <= k; ++i) {
          s[i].c = combine(s[0].c, s[i].c, 0.5);
          s[i].v = f(s[i].c);
        }
      }
    }
  }
  std::sort(s.begin(), s.end(), [](const NMPoint& a, const NMPoint& b) { return better(a.v, b.v); });
  return s[0];
}

}  // namespace

MaxResult maximize_within(const OnePeriodInstance& inst, double x, double radius, double tol) {
  MaxResult res;
  res.K1 = radius;
  const std::size_t ambient = inst.frame.ambient;
  const std::size_t k = inst.frame.dim();
  const Vec zero(ambient, 0.0);
  const ExtReal at_zero = psi_robust(inst, x, zero);
  if (k == 0) {
    res.h = zero;
    res.value = at_zero;
    return res;
  }
  const double cap = std::min(radius, kCap);
  const double scale = 1e-3 * std::max(1.0, std::fabs(x));
  auto eval = [&](const Coords& c) {
    if (norm(c) > cap) return ExtReal::neg_inf();
    return psi_robust(inst, x, from_frame(c, inst.frame));
  };

  Coords best(k, 0.0);
  ExtReal best_v = at_zero;
  if (k == 1) {
    LineMax lm = line_maximize([&](double s) { return eval(Coords{s}); }, scale, cap, tol);
    best = {lm.s};
    best_v = lm.value;
  } else {
    const double step = std::min(0.5 * cap, 1.0 + std::fabs(x));
    std::vector<Coords> starts{Coords(k, 0.0)};
    for (std::size_t j = 0; j < k; ++j)
      for (double sg : {1.0, -1.0}) {
        Coords c(k, 0.0);
        c[j] = sg * step;
        starts.push_back(c);
      }
    for (const Coords& st : starts) {
      NMPoint p = nelder_mead(eval, st, step, 1e-10);
      if (better(p.v, best_v)) {
        best = p.c;
        best_v = p.v;
      }
    }
    for (int sweep = 0; sweep < 3; ++sweep) {
      for (std::size_t j = 0; j < k; ++j) {
        Coords base = best;
        LineMax lm = line_maximize(
            [&](double s) {
              Coords c = base;
              c[j] += s;
              return eval(c);
            },
            scale, 2.0 * cap, tol);
        if (better(lm.value, best_v)) {
          best[j] += lm.s;
          best_v = lm.value;
        }
      }
    }
  }
  res.h = from_frame(best, inst.frame);
  for (double& v : res.h)
    if (v == 0.0) v = 0.0;  // fold -0
  res.value = best_v;
  res.boundary_flag = norm(best) >= radius * (1.0 - 1e-6) && best_v > ext_add(at_zero, ExtReal(tol));
  return res;
}

MaxResult maximize(const OnePeriodInstance& inst, double x, const BoundPack& bounds, double tol) {
  if (!(tol > 0.0)) throw ParameterError("tol must be positive");
  return maximize_within(inst, x, bounds.K1_of_x(x), tol);
}

std::string to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    case CheckStatus::untested: return "untested";
  }
  return "?";
}

CheckStatus verify_nm(const OnePeriodInstance& inst, const BoundPack& bounds, int m, double tol) {
  double n = std::ceil(bounds.N_of_m(m));
  if (!std::isfinite(n) || n > kCap) return CheckStatus::untested;
  MaxResult r = maximize(inst, -n, bounds, tol);
  return r.value <= ExtReal(-m + tol) ? CheckStatus::pass : CheckStatus::fail;
}

}  // namespace robustdp
