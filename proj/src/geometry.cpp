#include "robustdp/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>

#include <Eigen/SVD>

#include "robustdp/errors.hpp"
#include "robustdp/lp.hpp"

namespace robustdp {

namespace {

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Bitwise key with -0 folded onto +0.
std::vector<std::uint64_t> key_of(const Vec& v) {
  std::vector<std::uint64_t> k(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) k[i] = std::bit_cast<std::uint64_t>(v[i] == 0.0 ? 0.0 : v[i]);
  return k;
}

}  // namespace

std::vector<Vec> SupportSet::charged_by(std::size_t e) const {
  std::vector<Vec> out;
  for (std::size_t p = 0; p < points.size(); ++p)
    if (charged[p][e]) out.push_back(points[p]);
  return out;
}

SupportSet support(const std::vector<Vec>& increments, const std::vector<Vec>& kernels) {
  SupportSet s;
  std::map<std::vector<std::uint64_t>, std::size_t> seen;
  for (std::size_t c = 0; c < increments.size(); ++c) {
    bool any = false;
    for (const Vec& q : kernels) any = any || q.at(c) > 0.0;
    if (!any) continue;
    auto key = key_of(increments[c]);
    auto [it, fresh] = seen.emplace(key, s.points.size());
    if (fresh) {
      Vec p = increments[c];
      for (double& x : p) x = (x == 0.0 ? 0.0 : x);
      s.points.push_back(std::move(p));
      s.charged.emplace_back(kernels.size(), 0);
      s.children.emplace_back();
    }
    std::size_t idx = it->second;
    s.children[idx].push_back(c);
    for (std::size_t e = 0; e < kernels.size(); ++e)
      if (kernels[e][c] > 0.0) s.charged[idx][e] = 1;
  }
  return s;
}

SupportSet support(const Market& m, NodeIndex node) {
  const Node& n = m.tree.node(node);
  std::vector<Vec> inc;
  for (NodeIndex c : n.children) inc.push_back(increment(m.tree, c));
  return support(inc, m.extremes(node));
}

AffineFrame affine_hull(const std::vector<Vec>& points, std::size_t ambient) {
  AffineFrame f;
  f.ambient = ambient;
  if (points.empty()) throw DegenerateError("affine hull of an empty set");
  f.origin = points.front();
  if (points.size() == 1) return f;
  Eigen::MatrixXd M(points.size() - 1, ambient);
  for (std::size_t i = 1; i < points.size(); ++i)
    for (std::size_t k = 0; k < ambient; ++k) M(i - 1, k) = points[i][k] - points[0][k];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return f;
  double thr = 1e-9 * sv(0);
  for (Eigen::Index j = 0; j < sv.size(); ++j) {
    if (sv(j) <= thr) break;
    Vec b(ambient);
    for (std::size_t k = 0; k < ambient; ++k) b[k] = svd.matrixV()(k, j);
    // Canonical orientation: first significant coordinate positive.
    for (double x : b) {
      if (std::fabs(x) > 1e-12) {
        if (x < 0)
          for (double& y : b) y = -y;
        break;
      }
    }
    f.basis.push_back(std::move(b));
  }
  return f;
}

AffineFrame affine_hull(const SupportSet& s) {
  std::size_t d = s.points.empty() ? 0 : s.points.front().size();
  return affine_hull(s.points, d);
}

RiTest zero_in_relative_interior(const std::vector<Vec>& points) {
  if (points.empty()) throw DegenerateError("empty support");
  const std::size_t n = points.size();
  const std::size_t d = points.front().size();
  for (const Vec& p : points)
    for (double x : p)
      if (!std::isfinite(x)) throw DegenerateError("support point is not a finite vector");

  // Variables: lambda (n), t, slack (n).  Rows: lambda_i - t - s_i = 0,
  // sum lambda = 1, sum lambda_i p_i = 0.
  const std::size_t nv = 2 * n + 1;
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(nv, 0.0);
    row[i] = 1.0;
    row[n] = -1.0;
    row[n + 1 + i] = -1.0;
    A.push_back(std::move(row));
    b.push_back(0.0);
  }
  {
    std::vector<double> row(nv, 0.0);
    for (std::size_t i = 0; i < n; ++i) row[i] = 1.0;
    A.push_back(std::move(row));
    b.push_back(1.0);
  }
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> row(nv, 0.0);
    for (std::size_t i = 0; i < n; ++i) row[i] = points[i][k];
    A.push_back(std::move(row));
    b.push_back(0.0);
  }
  std::vector<double> c(nv, 0.0);
  c[n] = 1.0;
  LpResult r = solve_lp(A, b, c);

  RiTest out;
  if (r.status == LpResult::Status::optimal) out.margin = r.x[n];
  out.inside = r.status == LpResult::Status::optimal && out.margin > 1e-10;
  if (out.inside) return out;

  // Separating direction: u.y_i >= 0 for all i and sum_i u.y_i = 1, with
  // u = u+ - u-; minimizing |u|_1 keeps the program bounded.
  const std::size_t nw = 2 * d + n;
  std::vector<std::vector<double>> W;
  std::vector<double> wb;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(nw, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      row[k] = points[i][k];
      row[d + k] = -points[i][k];
    }
    row[2 * d + i] = -1.0;
    W.push_back(std::move(row));
    wb.push_back(0.0);
  }
  {
    std::vector<double> row(nw, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) {
        row[k] += points[i][k];
        row[d + k] -= points[i][k];
      }
    W.push_back(std::move(row));
    wb.push_back(1.0);
  }
  std::vector<double> wc(nw, 0.0);
  for (std::size_t k = 0; k < 2 * d; ++k) wc[k] = -1.0;
  LpResult w = solve_lp(W, wb, wc);
  if (w.status == LpResult::Status::optimal) {
    Vec u(d);
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      u[k] = w.x[k] - w.x[d + k];
      norm += u[k] * u[k];
    }
    norm = std::sqrt(norm);
    if (norm > 0)
      for (double& x : u) x /= norm;
    out.witness = std::move(u);
  }
  return out;
}

RiTest zero_in_relative_interior(const SupportSet& s) { return zero_in_relative_interior(s.points); }

double largest_loss_level(const std::vector<double>& s, const std::vector<double>& mass) {
  std::vector<std::pair<double, double>> losses;  // (|s|, mass) for s < 0
  for (std::size_t i = 0; i < s.size(); ++i)
    if (mass[i] > 0.0 && s[i] < 0.0) losses.emplace_back(-s[i], mass[i]);
  if (losses.empty()) return 0.0;
  std::sort(losses.begin(), losses.end());
  // Distinct breakpoints b_1 < ... < b_K with mass m_k.
  std::vector<double> b{0.0}, m{0.0};
  for (auto [v, w] : losses) {
    if (v == b.back()) m.back() += w;
    else {
      b.push_back(v);
      m.push_back(w);
    }
  }
  const std::size_t K = b.size() - 1;
  // tail[k] = mass of losses with magnitude >= b_k.
  std::vector<double> tail(K + 2, 0.0);
  for (std::size_t k = K; k >= 1; --k) tail[k] = tail[k + 1] + m[k];
  // On [b_k, b_{k+1}) the loss probability equals tail[k+1].
  for (std::size_t k = K; k-- > 0;) {
    double F = tail[k + 1];
    if (F <= 0.0 || F < b[k]) continue;
    double a = F < b[k + 1] ? F : std::nextafter(b[k + 1], 0.0);
    return std::min(a, 1.0);
  }
  return 0.0;
}

namespace {

// Unit directions on the k-sphere from a hyperspherical angle grid.
void for_each_direction(std::size_t k, int grid, const auto& fn) {
  if (k == 2) {
    for (int j = 0; j < grid; ++j) {
      double th = 2.0 * std::numbers::pi * j / grid;
      fn(Vec{std::cos(th), std::sin(th)});
    }
    return;
  }
  // Keep the total count near grid * grid / 2 in higher dimension.
  int per = grid;
  double budget = 0.5 * grid * static_cast<double>(grid);
  while (per > 8 && std::pow(per, static_cast<double>(k - 1)) / std::pow(2.0, k - 2.0) > budget) per /= 2;
  std::vector<int> idx(k - 1, 0);
  const int half = std::max(2, per / 2);
  while (true) {
    Vec u(k, 1.0);
    double sinprod = 1.0;
    for (std::size_t a = 0; a + 1 < k; ++a) {
      bool last = a + 2 == k;
      double ang = last ? 2.0 * std::numbers::pi * idx[a] / per
                        : std::numbers::pi * (idx[a] + 0.5) / half;
      u[a] = sinprod * std::cos(ang);
      sinprod *= std::sin(ang);
    }
    u[k - 1] = sinprod;
    fn(u);
    std::size_t a = 0;
    for (; a + 1 < k; ++a) {
      int lim = a + 2 == k ? per : half;
      if (++idx[a] < lim) break;
      idx[a] = 0;
    }
    if (a + 1 == k) break;
  }
}

}  // namespace

AlphaEstimate quantitative_alpha(const Vec& kernel, const std::vector<Vec>& increments,
                                 const AffineFrame& frame, int grid) {
  AlphaEstimate out;
  const std::size_t k = frame.dim();
  if (k == 0) return out;
  std::vector<Vec> coords;
  std::vector<double> mass;
  for (std::size_t i = 0; i < increments.size(); ++i) {
    if (kernel.at(i) <= 0.0) continue;
    coords.push_back(project_to_aff(increments[i], frame));
    mass.push_back(kernel[i]);
  }
  auto along = [&](const Vec& u) {
    std::vector<double> s(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) s[i] = dot(u, coords[i]);
    double a = largest_loss_level(s, mass);
    if (a <= 0.0) throw NoArbitrageViolation("a direction in the frame has no charged loss");
    return a;
  };
  if (k == 1) {
    out.alpha = std::min(along(Vec{1.0}), along(Vec{-1.0}));
    return out;
  }
  out.approximate = true;
  double best = 1.0;
  for_each_direction(k, grid, [&](const Vec& u) { best = std::min(best, along(u)); });
  out.alpha = best;
  return out;
}

Vec project_to_aff(const Vec& h, const AffineFrame& frame) {
  Vec c(frame.dim());
  for (std::size_t j = 0; j < frame.dim(); ++j) c[j] = dot(frame.basis[j], h);
  return c;
}

Vec from_frame(const Vec& coords, const AffineFrame& frame) {
  Vec h(frame.ambient, 0.0);
  for (std::size_t j = 0; j < frame.dim(); ++j)
    for (std::size_t k = 0; k < frame.ambient; ++k) h[k] += coords[j] * frame.basis[j][k];
  return h;
}

Vec uniform_mixture(const std::vector<Vec>& extremes) {
  Vec out(extremes.front().size(), 0.0);
  const double w = 1.0 / static_cast<double>(extremes.size());
  for (const Vec& q : extremes)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w * q[c];
  if (extremes.size() == 1) out = extremes.front();
  return out;
}

NodeGeometry node_geometry(const Market& m, NodeIndex node, const Vec* kernel,
                           double alpha_safety) {
  NodeGeometry g;
  g.node = node;
  g.support = support(m, node);
  g.frame = affine_hull(g.support);
  g.kernel = kernel ? *kernel : uniform_mixture(m.extremes(node));
  RiTest ri = zero_in_relative_interior(g.support);
  g.verdict.zero_in_ri = ri.inside;
  g.verdict.lp_margin = ri.margin;
  g.verdict.witness = ri.witness;
  if (!ri.inside) return g;
  std::vector<Vec> inc;
  for (NodeIndex c : m.tree.node(node).children) inc.push_back(increment(m.tree, c));
  AlphaEstimate a = quantitative_alpha(g.kernel, inc, g.frame);
  g.verdict.alpha = a.approximate ? a.alpha * alpha_safety : a.alpha;
  g.verdict.alpha_approximate = a.approximate;
  return g;
}

std::vector<NodeGeometry> market_geometry(const Market& m, double alpha_safety) {
  std::vector<NodeGeometry> out;
  for (NodeIndex i : m.tree.interior()) out.push_back(node_geometry(m, i, nullptr, alpha_safety));
  return out;
}

}  // namespace robustdp
