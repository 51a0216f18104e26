#include "robustdp/dp.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <random>
#include <unordered_map>

#include "robustdp/geometry.hpp"
#include "robustdp/parallel.hpp"
#include "robustdp/report.hpp"

namespace robustdp {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<Vec> child_increments(const ScenarioTree& tree, NodeIndex node) {
  std::vector<Vec> out;
  for (NodeIndex c : tree.node(node).children) out.push_back(increment(tree, c));
  return out;
}

double weighted(const Vec& w, const std::vector<double>& vals, const std::vector<NodeIndex>& children) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] > 0.0) s += w[i] * vals[children[i]];
  return s;
}

std::uint64_t key_of(double x) { return std::bit_cast<std::uint64_t>(x == 0.0 ? 0.0 : x); }

}  // namespace

// ---------------------------------------------------------------- priors

ProductPriorSpec build_p_star(const Market& m) {
  const ScenarioTree& tree = m.tree;
  ProductPriorSpec p;
  p.kernel.assign(tree.size(), Vec{});
  p.extreme_choice.assign(tree.size(), -1);
  for (NodeIndex i : tree.interior()) {
    p.kernel[i] = uniform_mixture(m.extremes(i));
    if (m.extremes(i).size() == 1) p.extreme_choice[i] = 0;
    std::vector<Vec> inc = child_increments(tree, i);
    SupportSet full = support(inc, m.extremes(i));
    RiTest ri = zero_in_relative_interior(full);
    if (!ri.inside)
      throw NAFailure(tree.node(i).id, ri.witness.value_or(Vec{}),
                      "0 is not in ri(conv(D)) at node '" + tree.node(i).id + "'");
    SupportSet mixed = support(inc, {p.kernel[i]});
    if (mixed.points.size() != full.points.size())
      throw NAFailure(tree.node(i).id, {}, "mixture support differs from D at '" + tree.node(i).id + "'");
  }
  return p;
}

ProductPriorSpec build_H_prior(const Market& m, const ProductPriorSpec& q, const Vec& lambdas) {
  const ScenarioTree& tree = m.tree;
  if (lambdas.size() != tree.size()) throw LambdaError("one lambda per node is required");
  ProductPriorSpec star = build_p_star(m);
  ProductPriorSpec out = star;
  for (NodeIndex i : tree.interior()) {
    double l = lambdas[i];
    if (!(l > 0.0 && l <= 1.0))
      throw LambdaError("lambda at '" + tree.node(i).id + "' must lie in (0, 1]");
    const Vec& a = star.kernel[i];
    const Vec& b = q.kernel.at(i);
    if (b.size() != a.size()) throw StructureError("kernel length mismatch at '" + tree.node(i).id + "'");
    for (std::size_t k = 0; k < a.size(); ++k) out.kernel[i][k] = l * a[k] + (1.0 - l) * b[k];
    out.extreme_choice[i] = l == 1.0 ? star.extreme_choice[i] : -1;
  }
  return out;
}

// ---------------------------------------------------------------- envelopes

ExtReal J_value(const Market& m, const std::vector<Section>& sections, NodeIndex node, double x) {
  const ScenarioTree& tree = m.tree;
  if (tree.is_leaf(node)) return sections[node](x).negative_part();
  const auto& children = tree.node(node).children;
  std::vector<ExtReal> vals;
  for (NodeIndex c : children) vals.push_back(J_value(m, sections, c, x));
  ExtReal best(0.0);
  for (const Vec& e : m.extremes(node)) best = std::max(best, minus_integral(vals, e));
  return best;
}

AuxProcesses propagate_CJ(const Market& m, const RandomUtility& u, const AECertificate& cert,
                          const ProductPriorSpec* P, double alpha_safety) {
  const ScenarioTree& tree = m.tree;
  AuxProcesses a;
  a.C.assign(tree.size(), 0.0);
  a.J0.assign(tree.size(), 0.0);
  a.c_P.assign(tree.size(), 0.0);
  a.i_P.assign(tree.size(), 0.0);
  a.alpha_P.assign(tree.size(), 0.0);
  a.l.assign(tree.size(), 0.0);
  a.N.assign(tree.size(), 0.0);
  for (NodeIndex i : tree.leaves()) {
    const std::string& id = tree.node(i).id;
    a.C[i] = cert.C_of_leaf.at(id);
    a.J0[i] = u.section(id)(0.0).negative_part().value();
  }
  for (int t = tree.horizon() - 1; t >= 0; --t) {
    auto [b, e] = tree.level(t);
    for (NodeIndex i = b; i < e; ++i) {
      const auto& ch = tree.node(i).children;
      for (const Vec& ext : m.extremes(i)) {
        a.C[i] = std::max(a.C[i], weighted(ext, a.C, ch));
        a.J0[i] = std::max(a.J0[i], weighted(ext, a.J0, ch));
      }
      Vec q = P ? P->kernel.at(i) : uniform_mixture(m.extremes(i));
      a.c_P[i] = weighted(q, a.C, ch) + weighted(q, a.J0, ch);
      std::vector<Vec> inc = child_increments(tree, i);
      try {
        AffineFrame f = affine_hull(support(inc, {q}));
        AlphaEstimate al = quantitative_alpha(q, inc, f);
        a.alpha_P[i] = al.approximate ? al.alpha * alpha_safety : al.alpha;
      } catch (const NoArbitrageViolation&) {
        a.alpha_P[i] = 0.0;
      }
      a.i_P[i] = a.alpha_P[i] > 0.0 ? 1.0 + 2.0 * a.c_P[i] / a.alpha_P[i] : kInf;
    }
  }
  return a;
}

// ---------------------------------------------------------------- handle

struct ValueFunction::State {
  Market m;
  RandomUtility u;
  DpParams params;
  AECertificate cert;
  bool robust = true;
  ProductPriorSpec ref;
  std::vector<Section> sections;
  AuxProcesses aux;

  struct Ctx {
    std::optional<OnePeriodInstance> inst;
    std::mutex memo_mu;
    std::unordered_map<std::uint64_t, MaxResult> memo;
    std::mutex bounds_mu;
    std::optional<BoundPack> bounds;
    std::atomic<bool> boundary{false};
    std::once_flag grid_once;
    std::vector<ExtReal> grid;
  };
  std::vector<std::unique_ptr<Ctx>> ctx;
  std::size_t knots = 0;

  ExtReal value(NodeIndex node, double x) {
    if (m.tree.is_leaf(node)) return sections[node](x);
    if (params.mode == Mode::grid && x >= params.grid_lo && x <= params.grid_hi) return interpolate(node, x);
    return solve_at(node, x).value;
  }

  const BoundPack& bounds(NodeIndex node) {
    Ctx& c = *ctx[node];
    std::lock_guard lock(c.bounds_mu);
    if (!c.bounds) {
      try {
        c.bounds = compute_bounds(*c.inst);
      } catch (const NtUnbounded& e) {
        throw NtUnbounded(m.tree.node(node).id, e.what());
      }
    }
    return *c.bounds;
  }

  MaxResult solve_at(NodeIndex node, double x) {
    Ctx& c = *ctx[node];
    const std::uint64_t key = key_of(x);
    {
      std::lock_guard lock(c.memo_mu);
      auto it = c.memo.find(key);
      if (it != c.memo.end()) return it->second;
    }
    MaxResult r = c.inst->frame.dim() == 0 ? maximize_within(*c.inst, x, 0.0, params.tol)
                                           : maximize(*c.inst, x, bounds(node), params.tol);
    if (r.boundary_flag) c.boundary = true;
    std::lock_guard lock(c.memo_mu);
    return c.memo.emplace(key, std::move(r)).first->second;
  }

  const std::vector<ExtReal>& grid(NodeIndex node) {
    Ctx& c = *ctx[node];
    std::call_once(c.grid_once, [&] {
      std::vector<ExtReal> g(knots);
      for (std::size_t k = 0; k < knots; ++k) g[k] = solve_at(node, params.grid_lo + k * params.grid_step).value;
      c.grid = std::move(g);
    });
    return c.grid;
  }

  ExtReal interpolate(NodeIndex node, double x) {
    const auto& g = grid(node);
    double pos = (x - params.grid_lo) / params.grid_step;
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(pos), knots - 2);
    double w = pos - static_cast<double>(k);
    if (w <= 0.0) return g[k];
    if (w >= 1.0) return g[k + 1];
    if (!g[k].is_finite() || !g[k + 1].is_finite()) return std::min(g[k], g[k + 1]);
    return ExtReal((1.0 - w) * g[k].value() + w * g[k + 1].value());
  }
};

ValueFunction make_value_function(const Market& m, const RandomUtility& u, const ProductPriorSpec* P,
                                  const DpParams& params) {
  if (!(params.tol > 0.0)) throw ParameterError("tol must be positive");
  ValueFunction vf;
  auto s = std::make_shared<ValueFunction::State>();
  s->m = m;
  s->u = u;
  s->params = params;
  s->robust = P == nullptr;
  s->ref = P ? *P : build_p_star(m);
  s->cert = params.certificate ? *params.certificate : certify_growth(u, m.tree);
  s->sections = bind_sections(u, m.tree);
  s->aux = propagate_CJ(m, u, s->cert, &s->ref, params.alpha_safety);
  if (params.mode == Mode::grid) {
    if (!(params.grid_step > 0.0) || !(params.grid_hi > params.grid_lo))
      throw ParameterError("grid needs lo < hi and a positive step");
    s->knots = static_cast<std::size_t>(std::llround((params.grid_hi - params.grid_lo) / params.grid_step)) + 1;
    s->params.grid_hi = params.grid_lo + (s->knots - 1) * params.grid_step;
  }
  const ScenarioTree& tree = s->m.tree;
  s->ctx.resize(tree.size());
  ValueFunction::State* raw = s.get();
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    s->ctx[i] = std::make_unique<ValueFunction::State::Ctx>();
    if (tree.is_leaf(i)) continue;
    OnePeriodSetup st;
    st.node = tree.node(i).id;
    st.increments = child_increments(tree, i);
    st.extremes = s->robust ? s->m.extremes(i) : std::vector<Vec>{s->ref.kernel[i]};
    st.p_star = s->ref.kernel[i];
    for (NodeIndex c : tree.node(i).children) {
      st.V.push_back([raw, c](double x) { return raw->value(c, x); });
      st.C.push_back(s->aux.C[c] + s->aux.J0[c]);
    }
    st.gamma = s->cert.gamma;
    st.alpha_safety = params.alpha_safety;
    s->ctx[i]->inst = make_instance(std::move(st));
  }
  vf.s_ = std::move(s);
  return vf;
}

ExtReal ValueFunction::operator()(NodeIndex node, double x) const { return s_->value(node, x); }
ExtReal ValueFunction::at(std::string_view id, double x) const { return s_->value(s_->m.tree.index_of(id), x); }

MaxResult ValueFunction::argmax(NodeIndex node, double x) const {
  if (s_->m.tree.is_leaf(node)) throw ParameterError("no strategy at a leaf");
  return s_->solve_at(node, x);
}

const OnePeriodInstance& ValueFunction::instance(NodeIndex node) const {
  if (!s_->ctx.at(node)->inst) throw ParameterError("leaves have no one-period instance");
  return *s_->ctx[node]->inst;
}
const BoundPack& ValueFunction::bounds(NodeIndex node) const { return s_->bounds(node); }
ExtReal ValueFunction::J(NodeIndex node, double x) const { return J_value(s_->m, s_->sections, node, x); }
const Market& ValueFunction::market() const { return s_->m; }
const RandomUtility& ValueFunction::utility() const { return s_->u; }
const AECertificate& ValueFunction::certificate() const { return s_->cert; }
const AuxProcesses& ValueFunction::aux() const { return s_->aux; }
const ProductPriorSpec& ValueFunction::reference() const { return s_->ref; }
bool ValueFunction::robust() const { return s_->robust; }
Mode ValueFunction::mode() const { return s_->params.mode; }
const DpParams& ValueFunction::params() const { return s_->params; }

std::vector<NodeIndex> ValueFunction::boundary_nodes() const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < s_->ctx.size(); ++i)
    if (s_->ctx[i]->boundary) out.push_back(i);
  return out;
}

double ValueFunction::knot_gap_error(int samples, unsigned seed) const {
  if (s_->params.mode != Mode::grid) return 0.0;
  std::vector<NodeIndex> inner = s_->m.tree.interior();
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    NodeIndex n = inner[std::uniform_int_distribution<std::size_t>(0, inner.size() - 1)(rng)];
    std::size_t j = std::uniform_int_distribution<std::size_t>(0, s_->knots - 2)(rng);
    double x = s_->params.grid_lo + (j + 0.5) * s_->params.grid_step;
    ExtReal exact = s_->solve_at(n, x).value;
    ExtReal interp = s_->interpolate(n, x);
    if (exact.is_finite() && interp.is_finite()) worst = std::max(worst, exact.value() - interp.value());
    else if (exact > interp) worst = kInf;
  }
  return worst;
}

ValueFunction value_function(const Market& m, const RandomUtility& u, const DpParams& params) {
  return make_value_function(m, u, nullptr, params);
}

ValueFunction value_function_P(const Market& m, const RandomUtility& u, const ProductPriorSpec& prior,
                               const DpParams& params) {
  return make_value_function(m, u, &prior, params);
}

std::map<std::string, double> compute_N_t(const ValueFunction& vf) {
  std::map<std::string, double> out;
  const ScenarioTree& tree = vf.market().tree;
  for (NodeIndex i : tree.interior()) out[tree.node(i).id] = vf.bounds(i).n0_star;
  return out;
}

// ---------------------------------------------------------------- U0 sample

json U0Report::to_json() const {
  json vals = json::object();
  for (const auto& [k, v] : values) vals[k] = robustdp::to_json(v);
  return json{{"max_value", robustdp::to_json(max_value)}, {"divergent", divergent}, {"seed", seed},
              {"values", vals}, {"errors", errors}};
}

U0Report check_assumption_U0(const Market& m, const RandomUtility& u, int samples, unsigned seed,
                             const DpParams& params) {
  U0Report rep;
  rep.seed = seed;
  DpParams p = params;
  if (!p.certificate) p.certificate = certify_growth(u, m.tree);
  std::mt19937_64 rng(seed);
  const ScenarioTree& tree = m.tree;
  std::vector<std::pair<std::string, ProductPriorSpec>> priors;
  priors.emplace_back("p_star", build_p_star(m));
  for (int k = 0; k < samples; ++k) {
    ProductPriorSpec q;
    q.kernel.assign(tree.size(), Vec{});
    q.extreme_choice.assign(tree.size(), -1);
    Vec lam(tree.size(), 1.0);
    for (NodeIndex i : tree.interior()) {
      std::size_t e = std::uniform_int_distribution<std::size_t>(0, m.extremes(i).size() - 1)(rng);
      q.kernel[i] = m.extremes(i)[e];
      q.extreme_choice[i] = static_cast<int>(e);
      lam[i] = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    }
    priors.emplace_back("sample_" + std::to_string(k), build_H_prior(m, q, lam));
  }
  std::vector<std::optional<ExtReal>> vals(priors.size());
  std::vector<std::string> errs(priors.size());
  parallel_for(priors.size(), [&](std::size_t k) {
    try {
      vals[k] = value_function_P(m, u, priors[k].second, p)(tree.root(), 1.0);
    } catch (const Error& e) {
      errs[k] = priors[k].first + ": " + e.what();
    }
  });
  for (std::size_t k = 0; k < priors.size(); ++k) {
    if (!vals[k]) {
      rep.errors.push_back(errs[k]);
      continue;
    }
    rep.values.emplace_back(priors[k].first, *vals[k]);
    rep.max_value = std::max(rep.max_value, *vals[k]);
    if (*vals[k] > ExtReal(1e12)) rep.divergent = true;
  }
  return rep;
}

// ---------------------------------------------------------------- gluing

GluedStrategy glue_strategy(const ValueFunction& vf, double x0) {
  const ScenarioTree& tree = vf.market().tree;
  GluedStrategy g;
  g.x0 = x0;
  g.h.assign(tree.size(), Vec{});
  g.wealth.assign(tree.size(), 0.0);
  g.wealth[tree.root()] = x0;
  // Level order guarantees parents are visited first.
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    if (tree.is_leaf(i)) continue;
    const double w = g.wealth[i];
    MaxResult r = vf.argmax(i, w);
    g.h[i] = r.h;
    const auto& ch = tree.node(i).children;
    std::vector<ExtReal> vals;
    for (NodeIndex c : ch) {
      g.wealth[c] = w + dot(r.h, increment(tree, c));
      vals.push_back(vf(c, g.wealth[c]));
    }
    ExtReal rhs = ExtReal::pos_inf();
    for (const Vec& e : vf.instance(i).extremes) rhs = std::min(rhs, minus_integral(vals, e));
    ExtReal lhs = vf(i, w);
    double resid = 0.0;
    if (lhs.is_finite() && rhs.is_finite()) resid = std::fabs(lhs.value() - rhs.value()) / (1.0 + std::fabs(lhs.value()));
    else if (!(lhs == rhs)) resid = kInf;
    g.identity_residual = std::max(g.identity_residual, resid);
  }
  return g;
}

ExtReal robust_expectation(const Market& m, const std::vector<ExtReal>& leaf_values) {
  const ScenarioTree& tree = m.tree;
  std::vector<ExtReal> v = leaf_values;
  v.resize(tree.size());
  for (NodeIndex i = tree.size(); i-- > 0;) {
    if (tree.is_leaf(i)) continue;
    std::vector<ExtReal> vals;
    for (NodeIndex c : tree.node(i).children) vals.push_back(v[c]);
    ExtReal best = ExtReal::pos_inf();
    for (const Vec& e : m.extremes(i)) best = std::min(best, minus_integral(vals, e));
    v[i] = best;
  }
  return v[tree.root()];
}

ExtReal robust_expectation(const Market& m, const std::map<std::string, ExtReal>& leaf_values) {
  std::vector<ExtReal> v(m.tree.size());
  for (NodeIndex i : m.tree.leaves()) {
    auto it = leaf_values.find(m.tree.node(i).id);
    if (it == leaf_values.end()) throw UnknownLeaf("no value for leaf '" + m.tree.node(i).id + "'");
    v[i] = it->second;
  }
  return robust_expectation(m, v);
}

std::vector<char> reachable_nodes(const Market& m) {
  const ScenarioTree& tree = m.tree;
  std::vector<char> r(tree.size(), 0);
  r[tree.root()] = 1;
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    if (!r[i] || tree.is_leaf(i)) continue;
    const auto& ch = tree.node(i).children;
    for (const Vec& e : m.extremes(i))
      for (std::size_t k = 0; k < ch.size(); ++k)
        if (e[k] > 0.0) r[ch[k]] = 1;
  }
  return r;
}

Admissibility check_admissibility(const Market& m, const RandomUtility& u, const GluedStrategy& s) {
  Admissibility a;
  std::vector<char> reach = reachable_nodes(m);
  for (NodeIndex i : m.tree.leaves()) {
    if (!reach[i]) continue;
    const std::string& id = m.tree.node(i).id;
    ExtReal neg = u.eval(id, s.wealth.at(i)).negative_part();
    if (a.worst_leaf.empty() || neg > a.max_negative) {
      a.max_negative = neg;
      a.worst_leaf = id;
    }
    if (!neg.is_finite() && !a.witness_leaf) {
      a.admissible = false;
      a.witness_leaf = id;
    }
  }
  return a;
}

// ---------------------------------------------------------------- solve

json Failure::to_json() const {
  const char* cls = error_class == ErrorClass::assumption ? "assumption"
                    : error_class == ErrorClass::input    ? "input"
                                                          : "numeric";
  return json{{"code", code}, {"assumption", assumption}, {"node", node}, {"message", message}, {"class", cls}};
}

Failure failure_from(const Error& e) {
  Failure f;
  f.code = e.code();
  f.message = e.what();
  f.error_class = e.error_class();
  if (auto* a = dynamic_cast<const AssumptionFailure*>(&e)) {
    f.assumption = a->assumption();
    f.node = a->node();
  } else if (dynamic_cast<const RAEViolation*>(&e)) {
    f.assumption = "asymptotic_elasticity";
  } else if (dynamic_cast<const NoArbitrageViolation*>(&e)) {
    f.assumption = "no_arbitrage";
  }
  return f;
}

json SolveReport::to_json() const {
  json strat = json::object();
  for (const auto& [k, h] : strategy) {
    json arr = json::array();
    for (double v : h) arr.push_back(number_json(v));
    strat[k] = arr;
  }
  json w = json::object();
  for (const auto& [k, v] : wealth) w[k] = number_json(v);
  json fails = json::array();
  for (const Failure& f : failures) fails.push_back(f.to_json());
  return json{{"value", value ? robustdp::to_json(*value) : json(nullptr)},
              {"strategy", strat},
              {"wealth", w},
              {"diagnostics", diagnostics},
              {"admissible", admissible},
              {"failures", fails}};
}

namespace {

json certificate_json(const AECertificate& c) {
  json C = json::object();
  for (const auto& [k, v] : c.C_of_leaf) C[k] = number_json(v);
  return json{{"gamma", c.gamma}, {"side", to_string(c.side)}, {"C", C}};
}

}  // namespace

SolveReport solve(const Market& m, const RandomUtility& u, double x0, const DpParams& params_in) {
  SolveReport rep;
  const ScenarioTree& tree = m.tree;
  json& diag = rep.diagnostics;
  json assumptions = json::object();
  diag["seed"] = params_in.seed;
  auto record = [&](const Error& e) { rep.failures.push_back(failure_from(e)); };
  auto finish = [&]() -> SolveReport& {
    diag["assumptions"] = assumptions;
    return rep;
  };

  try {
    build_p_star(m);
  } catch (const Error& e) {
    record(e);
    return finish();
  }

  DpParams params = params_in;
  try {
    if (!params.certificate) params.certificate = certify_growth(u, tree);
    assumptions["ae"] = certificate_json(*params.certificate);
  } catch (const Error& e) {
    record(e);
    return finish();
  }

  try {
    assumptions["type_A"] = assess_type_A(u, m, params.certificate->gamma, params.seed).to_json();
  } catch (const Error& e) {
    assumptions["type_A"] = json{{"verdict", false}, {"error", e.what()}};
  }

  std::optional<ValueFunction> vf;
  try {
    vf = value_function(m, u, params);
  } catch (const Error& e) {
    record(e);
    return finish();
  }

  json alpha = json::object();
  json approx = json::array();
  json C = json::object(), J0 = json::object(), cP = json::object();
  for (NodeIndex i : tree.interior()) {
    const std::string& id = tree.node(i).id;
    alpha[id] = vf->instance(i).alpha;
    if (vf->instance(i).alpha_approximate) approx.push_back(id);
  }
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const std::string& id = tree.node(i).id;
    C[id] = number_json(vf->aux().C[i]);
    J0[id] = number_json(vf->aux().J0[i]);
    if (!tree.is_leaf(i)) cP[id] = number_json(vf->aux().c_P[i]);
  }
  diag["alpha"] = alpha;
  diag["alpha_approximate"] = approx;
  diag["C_t"] = C;
  diag["J_t0"] = J0;
  diag["c_t_P"] = cP;

  try {
    rep.value = (*vf)(tree.root(), x0);
  } catch (const Error& e) {
    record(e);
    return finish();
  }

  // Bounds at every interior node, level by level.
  json n0 = json::object(), lstar = json::object();
  std::vector<NodeIndex> inner = tree.interior();
  std::vector<std::optional<std::string>> bound_err(tree.size());
  parallel_for(inner.size(), [&](std::size_t k) {
    try {
      vf->bounds(inner[k]);
    } catch (const NtUnbounded& e) {
      bound_err[inner[k]] = e.what();
    }
  });
  for (NodeIndex i : inner) {
    const std::string& id = tree.node(i).id;
    if (bound_err[i]) {
      n0[id] = "unbounded";
      rep.failures.push_back(failure_from(NtUnbounded(id, *bound_err[i])));
      continue;
    }
    n0[id] = vf->bounds(i).n0_star;
    lstar[id] = number_json(vf->bounds(i).l_star);
  }
  diag["n0"] = n0;
  diag["l_t_star"] = lstar;

  json NtP = json::object();
  try {
    bool single = std::all_of(inner.begin(), inner.end(), [&](NodeIndex i) { return m.extremes(i).size() == 1; });
    if (single) {
      NtP = n0;
    } else {
      ValueFunction vp = value_function_P(m, u, vf->reference(), params);
      for (const auto& [k, v] : compute_N_t(vp)) NtP[k] = v;
    }
  } catch (const Error& e) {
    NtP["error"] = e.what();
  }
  diag["N_t"] = json{{"star", n0}, {"P_star", NtP}};

  GluedStrategy g;
  try {
    g = glue_strategy(*vf, x0);
  } catch (const Error& e) {
    record(e);
    return finish();
  }
  json K1 = json::object();
  for (NodeIndex i : inner) {
    const std::string& id = tree.node(i).id;
    rep.strategy[id] = g.h[i];
    if (!bound_err[i]) K1[id] = number_json(vf->bounds(i).K1_of_x(g.wealth[i]));
  }
  for (NodeIndex i = 0; i < tree.size(); ++i) rep.wealth[tree.node(i).id] = g.wealth[i];
  diag["K1_visited"] = K1;
  assumptions["dp_identity"] = json{{"max_relative_residual", number_json(g.identity_residual)},
                                    {"ok", g.identity_residual <= 1e-6}};

  Admissibility adm = check_admissibility(m, u, g);
  rep.admissible = adm.admissible;
  diag["admissibility"] = json{{"max_leaf_negative", to_json(adm.max_negative)},
                               {"worst_leaf", adm.worst_leaf},
                               {"witness_leaf", adm.witness_leaf ? json(*adm.witness_leaf) : json(nullptr)}};

  std::vector<ExtReal> terminal(tree.size());
  for (NodeIndex i : tree.leaves()) terminal[i] = u.eval(tree.node(i).id, g.wealth[i]);
  ExtReal re = robust_expectation(m, terminal);
  double resid = 0.0;
  if (re.is_finite() && rep.value->is_finite())
    resid = std::fabs(re.value() - rep.value->value()) / (1.0 + std::fabs(rep.value->value()));
  else if (!(re == *rep.value))
    resid = kInf;
  bool consistent = !rep.admissible || resid <= 1e-5;
  assumptions["consistency"] = json{{"robust_expectation", to_json(re)},
                                    {"relative_residual", number_json(resid)},
                                    {"ok", consistent}};
  if (!consistent)
    rep.failures.push_back(Failure{"ConsistencyFailure", "dp_identity", tree.node(tree.root()).id,
                                   "U_0(x0) differs from the robust expectation along the glued strategy",
                                   ErrorClass::numeric});

  // Right-continuity at the visited wealths.
  double worst = 0.0;
  std::string worst_node;
  for (NodeIndex i : inner) {
    ExtReal base = (*vf)(i, g.wealth[i]);
    for (double d : {1e-4, 1e-6, 1e-8}) {
      ExtReal r = (*vf)(i, g.wealth[i] + d);
      double gap = base.is_finite() && r.is_finite()
                       ? std::fabs(r.value() - base.value()) / (1.0 + std::fabs(base.value()))
                       : (base == r ? 0.0 : kInf);
      if (gap > worst) {
        worst = gap;
        worst_node = tree.node(i).id;
      }
    }
  }
  assumptions["closure"] = json{{"worst_relative_gap", number_json(worst)}, {"node", worst_node},
                                {"ok", worst <= 1e-4}};
  if (worst > 1e-4)
    rep.failures.push_back(Failure{"ClosureFailure", "closure", worst_node,
                                   "value function is not right-continuous at a visited wealth",
                                   ErrorClass::numeric});

  json flags = json::array();
  for (NodeIndex i : vf->boundary_nodes()) flags.push_back(tree.node(i).id);
  assumptions["boundary_flags"] = flags;

  try {
    assumptions["U0"] = check_assumption_U0(m, u, params.u0_samples, params.seed, params).to_json();
  } catch (const Error& e) {
    assumptions["U0"] = json{{"error", e.what()}};
  }
  if (params.mode == Mode::grid) diag["grid"] = json{{"knot_gap_error", number_json(vf->knot_gap_error(64, params.seed))}};
  return finish();
}

}  // namespace robustdp
