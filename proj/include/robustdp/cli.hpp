#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "robustdp/dp.hpp"

namespace robustdp {

inline constexpr const char* kVersion = "0.1.0";

struct CliConfig {
  std::string command;  // solve, check-na, diagnose, oracle, demo
  std::string market_path;
  std::string utility_path;
  std::string recipe;
  std::optional<double> x0;  // recipe default for demo, 0 elsewhere
  Mode mode = Mode::exact;
  double tol = 1e-9;
  std::string output = "json";  // json or table
  unsigned seed = 0;
  double alpha_safety = 0.9;
  double grid_lo = -1e3;
  double grid_hi = 1e3;
  double grid_step = 1.0 / 64.0;
  int u0_samples = 3;
  double oracle_step = 0.05;
  double oracle_radius = 5.0;
};

/// Exit codes: 0 success, 1 input or I/O error, 2 assumption failure,
/// 3 oracle refusal.  The report always goes to `out`.
int run(const CliConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv into a CliConfig and runs it.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

/// "path = value" lines, one per scalar leaf of the report.
std::string render_table(const nlohmann::json& report);

}  // namespace robustdp
