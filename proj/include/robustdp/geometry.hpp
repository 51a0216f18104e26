#pragma once

#include <optional>
#include <vector>

#include "robustdp/market.hpp"

namespace robustdp {

/// Distinct one-step increments charged by at least one prior.
struct SupportSet {
  std::vector<Vec> points;
  /// charged[p][e]: extreme e puts positive mass on point p.
  std::vector<std::vector<char>> charged;
  /// Children of the owning node whose increment equals point p.
  std::vector<std::vector<std::size_t>> children;

  /// Points charged by extreme e alone.
  std::vector<Vec> charged_by(std::size_t e) const;
};

/// origin + span(basis), basis orthonormal.
struct AffineFrame {
  Vec origin;
  std::vector<Vec> basis;
  std::size_t ambient = 0;
  std::size_t dim() const noexcept { return basis.size(); }
};

struct NAVerdict {
  bool zero_in_ri = false;
  std::optional<double> alpha;
  bool alpha_approximate = false;
  /// Set when zero_in_ri is false: u.y >= 0 on the support, > 0 somewhere.
  std::optional<Vec> witness;
  double lp_margin = 0.0;
};

struct RiTest {
  bool inside = false;
  double margin = 0.0;  // optimal t of the positive-weights program
  std::optional<Vec> witness;
};

struct AlphaEstimate {
  double alpha = 1.0;
  bool approximate = false;
};

/// Union over the kernels of the increments they charge.
SupportSet support(const std::vector<Vec>& increments, const std::vector<Vec>& kernels);
SupportSet support(const Market& m, NodeIndex node);

AffineFrame affine_hull(const std::vector<Vec>& points, std::size_t ambient);
AffineFrame affine_hull(const SupportSet& s);

/// 0 in ri(conv(points)), decided by the positive-weights LP (t > 1e-10).
RiTest zero_in_relative_interior(const std::vector<Vec>& points);
RiTest zero_in_relative_interior(const SupportSet& s);

/// Largest a in (0,1] with mass{s < -a} >= a for scalar outcomes s.
/// Returns 0 when no negative outcome carries mass.
double largest_loss_level(const std::vector<double>& s, const std::vector<double>& mass);

/// Largest admissible alpha for the kernel; exact when the frame has
/// dimension <= 1, otherwise a minimum over `grid` angles per coordinate.
/// NoArbitrageViolation if some direction has no charged loss.
AlphaEstimate quantitative_alpha(const Vec& kernel, const std::vector<Vec>& increments,
                                 const AffineFrame& frame, int grid = 720);

Vec project_to_aff(const Vec& h, const AffineFrame& frame);
Vec from_frame(const Vec& coords, const AffineFrame& frame);

/// Geometry of one interior node under a kernel (default: uniform mixture).
struct NodeGeometry {
  NodeIndex node = 0;
  SupportSet support;          // over all extremes
  AffineFrame frame;           // of the full support
  Vec kernel;                  // reference kernel used for alpha
  NAVerdict verdict;
};

Vec uniform_mixture(const std::vector<Vec>& extremes);
NodeGeometry node_geometry(const Market& m, NodeIndex node, const Vec* kernel = nullptr,
                           double alpha_safety = 0.9);
std::vector<NodeGeometry> market_geometry(const Market& m, double alpha_safety = 0.9);

}  // namespace robustdp
