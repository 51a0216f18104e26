#include "robustdp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "robustdp/errors.hpp"

namespace robustdp {

namespace {

constexpr double kPivotEps = 1e-12;

struct Tableau {
  std::size_t m = 0;      // rows
  std::size_t ncols = 0;  // structural + artificial columns
  std::vector<std::vector<double>> a;  // m rows of ncols + 1 (last = rhs)
  std::vector<std::size_t> basis;

  void pivot(std::size_t r, std::size_t col) {
    double p = a[r][col];
    for (double& v : a[r]) v /= p;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == r) continue;
      double f = a[i][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j <= ncols; ++j) a[i][j] -= f * a[r][j];
    }
    basis[r] = col;
  }
};

enum class Outcome { optimal, unbounded };

// Maximizes cost over columns marked allowed, starting from a feasible basis.
Outcome run(Tableau& tab, const std::vector<double>& cost, const std::vector<char>& allowed) {
  const std::size_t max_iter = 50000;
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::size_t enter = tab.ncols;
    for (std::size_t j = 0; j < tab.ncols; ++j) {
      if (!allowed[j]) continue;
      double r = cost[j];
      for (std::size_t i = 0; i < tab.m; ++i) r -= cost[tab.basis[i]] * tab.a[i][j];
      if (r > 1e-11) {
        enter = j;
        break;
      }
    }
    if (enter == tab.ncols) return Outcome::optimal;
    std::size_t leave = tab.m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < tab.m; ++i) {
      double col = tab.a[i][enter];
      if (col <= kPivotEps) continue;
      double ratio = tab.a[i][tab.ncols] / col;
      if (ratio < best - 1e-15 ||
          (std::fabs(ratio - best) <= 1e-15 && leave < tab.m && tab.basis[i] < tab.basis[leave])) {
        best = ratio;
        leave = i;
      }
    }
    if (leave == tab.m) return Outcome::unbounded;
    tab.pivot(leave, enter);
  }
  throw SearchExhausted("simplex iteration limit reached");
}

}  // namespace

LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<double>& c) {
  const std::size_t m = A.size();
  const std::size_t n = c.size();
  if (b.size() != m) throw DegenerateError("lp: rhs length mismatch");
  for (const auto& row : A)
    if (row.size() != n) throw DegenerateError("lp: row length mismatch");

  Tableau tab;
  tab.m = m;
  tab.ncols = n + m;
  tab.a.assign(m, std::vector<double>(tab.ncols + 1, 0.0));
  tab.basis.resize(m);
  double scale = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    double sign = b[i] < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n; ++j) tab.a[i][j] = sign * A[i][j];
    tab.a[i][n + i] = 1.0;
    tab.a[i][tab.ncols] = sign * b[i];
    tab.basis[i] = n + i;
    scale = std::max(scale, std::fabs(b[i]));
  }

  std::vector<double> cost1(tab.ncols, 0.0);
  for (std::size_t i = 0; i < m; ++i) cost1[n + i] = -1.0;
  std::vector<char> all(tab.ncols, 1);
  run(tab, cost1, all);
  double infeas = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis[i] >= n) infeas += tab.a[i][tab.ncols];
  LpResult res;
  if (infeas > 1e-9 * scale) {
    res.status = LpResult::Status::infeasible;
    return res;
  }

  // Drive zero-level artificials out of the basis where possible.
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis[i] < n) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(tab.a[i][j]) > 1e-9) {
        tab.pivot(i, j);
        break;
      }
    }
  }

  std::vector<double> cost2(tab.ncols, 0.0);
  for (std::size_t j = 0; j < n; ++j) cost2[j] = c[j];
  std::vector<char> structural(tab.ncols, 0);
  for (std::size_t j = 0; j < n; ++j) structural[j] = 1;
  if (run(tab, cost2, structural) == Outcome::unbounded) {
    res.status = LpResult::Status::unbounded;
    return res;
  }
  res.status = LpResult::Status::optimal;
  res.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (tab.basis[i] < n) res.x[tab.basis[i]] = std::max(0.0, tab.a[i][tab.ncols]);
  res.objective = 0.0;
  for (std::size_t j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
  return res;
}

}  // namespace robustdp
