#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robustdp/errors.hpp"
#include "robustdp/market.hpp"
#include "robustdp/oneperiod.hpp"
#include "robustdp/utility.hpp"

namespace robustdp {

enum class Mode { exact, grid };

struct DpParams {
  Mode mode = Mode::exact;
  double tol = 1e-9;
  double grid_lo = -1e3;
  double grid_hi = 1e3;
  double grid_step = 1.0 / 64.0;
  double alpha_safety = 0.9;
  unsigned seed = 0;
  int u0_samples = 3;
  /// Growth certificate to reuse; computed from the utility when absent.
  std::optional<AECertificate> certificate;
};

/// Uniform mixture of the extremes at every node, certified in H^T.
/// NAFailure at the first node where 0 is not in ri(conv(D)).
ProductPriorSpec build_p_star(const Market& m);

/// Per node lambda p* + (1 - lambda) q.  LambdaError unless every lambda of
/// an interior node lies in (0, 1].
ProductPriorSpec build_H_prior(const Market& m, const ProductPriorSpec& q, const Vec& lambdas);

/// Backward envelopes.  C and J0 are robust (max over extremes); c_P and
/// i_P refer to the supplied kernel spec.  l and N are filled from a handle.
struct AuxProcesses {
  Vec C;
  Vec J0;
  Vec c_P;
  Vec i_P;
  Vec alpha_P;
  Vec l;
  Vec N;
};

AuxProcesses propagate_CJ(const Market& m, const RandomUtility& u, const AECertificate& cert,
                          const ProductPriorSpec* P = nullptr, double alpha_safety = 0.9);

/// J_t(node, x): J_T = U^-, J_t = max over extremes of the child expectation.
ExtReal J_value(const Market& m, const std::vector<Section>& sections, NodeIndex node, double x);

/// Memoized U_t (robust) or U_t^P (single prior) over the whole tree.
/// Copies share one memo; evaluation is thread-safe.
class ValueFunction {
 public:
  ExtReal operator()(NodeIndex node, double x) const;
  ExtReal at(std::string_view id, double x) const;
  /// One-period maximizer at an interior node.
  MaxResult argmax(NodeIndex node, double x) const;

  const OnePeriodInstance& instance(NodeIndex node) const;
  /// Computed on first use.  NtUnbounded naming the node on failure.
  const BoundPack& bounds(NodeIndex node) const;
  ExtReal J(NodeIndex node, double x) const;

  const Market& market() const;
  const RandomUtility& utility() const;
  const AECertificate& certificate() const;
  const AuxProcesses& aux() const;
  const ProductPriorSpec& reference() const;
  bool robust() const;
  Mode mode() const;
  const DpParams& params() const;

  /// Nodes where some maximization ended on the K1 sphere with a gain.
  std::vector<NodeIndex> boundary_nodes() const;
  /// Largest sampled (exact - interpolated) gap between grid knots; 0 in exact mode.
  double knot_gap_error(int samples = 64, unsigned seed = 0) const;

  struct State;

 private:
  std::shared_ptr<State> s_;
  friend ValueFunction make_value_function(const Market&, const RandomUtility&, const ProductPriorSpec*,
                                           const DpParams&);
};

ValueFunction value_function(const Market& m, const RandomUtility& u, const DpParams& params = {});
ValueFunction value_function_P(const Market& m, const RandomUtility& u, const ProductPriorSpec& prior,
                               const DpParams& params = {});

/// N_t per interior node (n0 of each node's one-period context).
std::map<std::string, double> compute_N_t(const ValueFunction& vf);

struct U0Report {
  ExtReal max_value = ExtReal::neg_inf();
  bool divergent = false;
  unsigned seed = 0;
  std::vector<std::pair<std::string, ExtReal>> values;  // label -> U_0^P(1)
  std::vector<std::string> errors;
  nlohmann::json to_json() const;
};

/// U_0^P(1) for p* and `samples` random H^T mixtures.  Values above 1e12
/// count as divergent.
U0Report check_assumption_U0(const Market& m, const RandomUtility& u, int samples, unsigned seed,
                             const DpParams& params = {});

struct GluedStrategy {
  double x0 = 0.0;
  std::vector<Vec> h;         // per node; empty at leaves
  std::vector<double> wealth;  // per node
  double identity_residual = 0.0;  // max relative one-step DP identity gap
};

GluedStrategy glue_strategy(const ValueFunction& vf, double x0);

/// Backward min over extremes of child expectations.
ExtReal robust_expectation(const Market& m, const std::vector<ExtReal>& leaf_values_by_node);
ExtReal robust_expectation(const Market& m, const std::map<std::string, ExtReal>& leaf_values);

struct Admissibility {
  bool admissible = true;
  ExtReal max_negative = ExtReal(0.0);
  std::string worst_leaf;
  std::optional<std::string> witness_leaf;
};

/// Leaves reachable under some extreme product.
std::vector<char> reachable_nodes(const Market& m);
Admissibility check_admissibility(const Market& m, const RandomUtility& u, const GluedStrategy& s);

struct Failure {
  std::string code;
  std::string assumption;
  std::string node;
  std::string message;
  ErrorClass error_class = ErrorClass::numeric;
  nlohmann::json to_json() const;
};
Failure failure_from(const Error& e);

struct SolveReport {
  std::optional<ExtReal> value;
  std::map<std::string, Vec> strategy;
  std::map<std::string, double> wealth;
  bool admissible = false;
  nlohmann::json diagnostics = nlohmann::json::object();
  std::vector<Failure> failures;

  bool ok() const { return failures.empty(); }
  nlohmann::json to_json() const;
};

SolveReport solve(const Market& m, const RandomUtility& u, double x0, const DpParams& params = {});

}  // namespace robustdp
