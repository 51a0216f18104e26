#pragma once

#include <vector>

namespace robustdp {

struct LpResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  double objective = 0.0;
  std::vector<double> x;
};

/**
 * Dense two-phase simplex with Bland's rule for
 *   maximize c.x  subject to  A x = b,  x >= 0.
 * Intended for small problems (tens of rows and columns).
 */
LpResult solve_lp(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                  const std::vector<double>& c);

}  // namespace robustdp
