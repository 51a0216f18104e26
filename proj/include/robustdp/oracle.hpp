#pragma once

#include <map>
#include <optional>
#include <string>

#include "robustdp/market.hpp"
#include "robustdp/utility.hpp"

namespace robustdp {

struct OracleResult {
  double combinations = 0.0;  // strategy-grid size, possibly astronomically large
  bool refused = false;
  std::optional<ExtReal> value;
  std::map<std::string, Vec> strategy;
};

/// Literal maxmin: every strategy on the grid {-R, -R + step, ..., R}^d per
/// interior node, scored by the robust expectation of terminal utility.
/// Refuses (no evaluation) above `max_combinations`.
OracleResult brute_force_oracle(const Market& m, const RandomUtility& u, double x0, double step = 0.05,
                                double radius = 5.0, double max_combinations = 1e5);

}  // namespace robustdp
