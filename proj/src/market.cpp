#include "robustdp/market.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "robustdp/errors.hpp"

namespace robustdp {

using nlohmann::json;

ScenarioTree ScenarioTree::build(int horizon, int dim, const std::vector<NodeSpec>& specs) {
  if (horizon < 1) throw StructureError("horizon T must be >= 1");
  if (dim < 1) throw StructureError("dimension d must be >= 1");
  if (specs.empty()) throw StructureError("market has no nodes");

  std::unordered_map<std::string, std::size_t> pos;
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const NodeSpec& s = specs[i];
    if (s.id.empty()) throw StructureError("empty node id");
    if (!pos.emplace(s.id, i).second) throw StructureError("duplicate node id '" + s.id + "'");
    if (static_cast<int>(s.price.size()) != dim)
      throw StructureError("node '" + s.id + "' price has wrong dimension");
    for (double p : s.price)
      if (!std::isfinite(p)) throw StructureError("node '" + s.id + "' has a non-finite price");
    if (!s.parent) {
      if (root) throw StructureError("more than one root node");
      root = i;
    }
  }
  if (!root) throw StructureError("no root node");
  if (specs[*root].t != 0) throw StructureError("root must have t = 0");

  std::vector<std::vector<std::size_t>> kids(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const NodeSpec& s = specs[i];
    if (!s.parent) continue;
    auto it = pos.find(*s.parent);
    if (it == pos.end()) throw StructureError("orphan node '" + s.id + "': parent '" + *s.parent + "' missing");
    if (s.t != specs[it->second].t + 1)
      throw StructureError("node '" + s.id + "' depth is not parent depth + 1");
    if (s.t > horizon) throw StructureError("node '" + s.id + "' lies beyond the horizon");
    kids[it->second].push_back(i);
  }

  ScenarioTree tree;
  tree.T_ = horizon;
  tree.d_ = dim;
  std::vector<std::size_t> order{*root};
  std::vector<NodeIndex> new_index(specs.size(), static_cast<NodeIndex>(-1));
  tree.level_begin_.push_back(0);
  std::size_t head = 0;
  int depth = 0;
  while (head < order.size()) {
    std::size_t level_end = order.size();
    for (; head < level_end; ++head)
      for (std::size_t c : kids[order[head]]) order.push_back(c);
    ++depth;
    tree.level_begin_.push_back(level_end);
  }
  if (order.size() != specs.size()) throw StructureError("nodes unreachable from the root");

  for (std::size_t k = 0; k < order.size(); ++k) new_index[order[k]] = k;
  tree.nodes_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const NodeSpec& s = specs[order[k]];
    Node& n = tree.nodes_[k];
    n.id = s.id;
    n.t = s.t;
    n.price = s.price;
    if (s.parent) n.parent = new_index[pos.at(*s.parent)];
    for (std::size_t c : kids[order[k]]) n.children.push_back(new_index[c]);
    if (n.children.empty() && n.t != horizon)
      throw StructureError("leaf '" + n.id + "' at depth " + std::to_string(n.t) + " != T");
    tree.by_id_.emplace(n.id, k);
  }
  // level_begin_ has one entry per depth plus a trailing sentinel.
  while (static_cast<int>(tree.level_begin_.size()) < horizon + 2)
    tree.level_begin_.push_back(order.size());
  return tree;
}

NodeIndex ScenarioTree::index_of(std::string_view id) const {
  auto f = find(id);
  if (!f) throw UnknownNode("unknown node '" + std::string(id) + "'");
  return *f;
}

std::optional<NodeIndex> ScenarioTree::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::pair<NodeIndex, NodeIndex> ScenarioTree::level(int t) const {
  if (t < 0 || t > T_) throw UnknownNode("no level " + std::to_string(t));
  return {level_begin_[t], level_begin_[t + 1]};
}

std::vector<NodeIndex> ScenarioTree::leaves() const {
  auto [b, e] = level(T_);
  std::vector<NodeIndex> out;
  for (NodeIndex i = b; i < e; ++i) out.push_back(i);
  return out;
}

std::vector<NodeIndex> ScenarioTree::interior() const {
  auto [b, e] = level(T_);
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < b; ++i) out.push_back(i);
  return out;
}

namespace {

void check_probability(const Vec& p, const std::string& owner) {
  double s = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0)
      throw ProbabilityError("prior of node '" + owner + "' has a negative or non-finite entry");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-12)
    throw ProbabilityError("prior of node '" + owner + "' does not sum to 1");
}

}  // namespace

Market make_market(int horizon, int dim, const std::vector<NodeSpec>& nodes,
                   const std::unordered_map<std::string, std::vector<Vec>>& priors) {
  Market m{ScenarioTree::build(horizon, dim, nodes), {}};
  const ScenarioTree& tree = m.tree;
  m.ambiguity.resize(tree.size());
  for (const auto& [id, ext] : priors) {
    auto idx = tree.find(id);
    if (!idx) throw StructureError("prior set for unknown node '" + id + "'");
    if (tree.is_leaf(*idx)) throw StructureError("prior set given for leaf '" + id + "'");
  }
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    m.ambiguity[i].owner = i;
    if (tree.is_leaf(i)) continue;
    const Node& n = tree.node(i);
    auto it = priors.find(n.id);
    if (it == priors.end() || it->second.empty())
      throw StructureError("missing prior set for node '" + n.id + "'");
    for (const Vec& p : it->second) {
      if (p.size() != n.children.size())
        throw StructureError("prior of node '" + n.id + "' has wrong length");
      check_probability(p, n.id);
    }
    m.ambiguity[i].extremes = it->second;
  }
  return m;
}

Market load_market(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  int T = 0, d = 0;
  std::vector<NodeSpec> nodes;
  std::unordered_map<std::string, std::vector<Vec>> priors;
  try {
    if (!j.is_object()) throw ParseError("market must be a JSON object");
    if (!j.at("T").is_number_integer() || !j.at("d").is_number_integer())
      throw ParseError("T and d must be integers");
    T = j.at("T").get<int>();
    d = j.at("d").get<int>();
    for (const json& n : j.at("nodes")) {
      NodeSpec s;
      s.id = n.at("id").get<std::string>();
      if (!n.at("t").is_number_integer()) throw ParseError("node t must be an integer");
      s.t = n.at("t").get<int>();
      const json& par = n.at("parent");
      if (!par.is_null()) s.parent = par.get<std::string>();
      s.price = n.at("price").get<Vec>();
      nodes.push_back(std::move(s));
    }
    if (j.contains("priors")) {
      for (auto it = j.at("priors").begin(); it != j.at("priors").end(); ++it)
        priors[it.key()] = it.value().get<std::vector<Vec>>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("market schema: ") + e.what());
  }
  return make_market(T, d, nodes, priors);
}

Market load_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open market file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_market(ss.str());
}

std::string serialize_market(const Market& m) {
  json j;
  j["T"] = m.tree.horizon();
  j["d"] = m.tree.dim();
  json nodes = json::array();
  for (const Node& n : m.tree.nodes()) {
    json o;
    o["id"] = n.id;
    o["t"] = n.t;
    o["parent"] = n.parent ? json(m.tree.node(*n.parent).id) : json(nullptr);
    o["price"] = n.price;
    nodes.push_back(std::move(o));
  }
  j["nodes"] = std::move(nodes);
  json priors = json::object();
  for (NodeIndex i : m.tree.interior()) priors[m.tree.node(i).id] = m.extremes(i);
  j["priors"] = std::move(priors);
  return j.dump(2);
}

Vec increment(const ScenarioTree& tree, NodeIndex child) {
  if (child >= tree.size()) throw UnknownNode("node index out of range");
  const Node& c = tree.node(child);
  if (!c.parent) throw UnknownNode("the root has no increment");
  const Vec& p = tree.node(*c.parent).price;
  Vec out(c.price.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = c.price[k] - p[k];
  return out;
}

Vec increment(const ScenarioTree& tree, std::string_view child) {
  return increment(tree, tree.index_of(child));
}

Vec mix_extremes(const std::vector<Vec>& extremes, const Vec& weights) {
  if (weights.size() != extremes.size()) throw ProbabilityError("mixing weights have wrong length");
  check_probability(weights, "mixture");
  Vec out(extremes.front().size(), 0.0);
  for (std::size_t e = 0; e < extremes.size(); ++e)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += weights[e] * extremes[e][c];
  return out;
}

ExtremeProducts::ExtremeProducts(const Market& m) : m_(&m), interior_(m.tree.interior()) {
  for (NodeIndex i : interior_) {
    std::uint64_t k = m.extremes(i).size();
    log10_count_ += std::log10(static_cast<double>(k));
    if (count_ > std::numeric_limits<std::uint64_t>::max() / k)
      count_ = std::numeric_limits<std::uint64_t>::max();
    else
      count_ *= k;
  }
}

ProductPriorSpec ExtremeProducts::at(const std::vector<std::size_t>& digits) const {
  ProductPriorSpec spec;
  spec.kernel.assign(m_->tree.size(), Vec{});
  spec.extreme_choice.assign(m_->tree.size(), -1);
  for (std::size_t k = 0; k < interior_.size(); ++k) {
    NodeIndex i = interior_[k];
    spec.kernel[i] = m_->extremes(i).at(digits.at(k));
    spec.extreme_choice[i] = static_cast<int>(digits[k]);
  }
  return spec;
}

ExtremeProducts::iterator::iterator(const ExtremeProducts* owner, bool done)
    : owner_(owner), done_(done) {
  if (done_) return;
  digits_.assign(owner_->interior_.size(), 0);
  spec_ = owner_->at(digits_);
}

void ExtremeProducts::iterator::refresh(std::size_t from) {
  for (std::size_t k = from; k < digits_.size(); ++k) {
    NodeIndex i = owner_->interior_[k];
    spec_.kernel[i] = owner_->m_->extremes(i)[digits_[k]];
    spec_.extreme_choice[i] = static_cast<int>(digits_[k]);
  }
}

ExtremeProducts::iterator& ExtremeProducts::iterator::operator++() {
  if (done_) return *this;
  std::size_t k = digits_.size();
  while (k > 0) {
    --k;
    NodeIndex i = owner_->interior_[k];
    if (++digits_[k] < owner_->m_->extremes(i).size()) {
      refresh(k);
      return *this;
    }
    digits_[k] = 0;
  }
  done_ = true;
  return *this;
}

Vec node_probabilities(const ScenarioTree& tree, const ProductPriorSpec& spec) {
  Vec prob(tree.size(), 0.0);
  prob[tree.root()] = 1.0;
  // Level order guarantees parents are processed before children.
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const Node& n = tree.node(i);
    for (std::size_t c = 0; c < n.children.size(); ++c)
      prob[n.children[c]] = prob[i] * spec.kernel.at(i).at(c);
  }
  return prob;
}

Vec leaf_distribution(const ScenarioTree& tree, const ProductPriorSpec& spec) {
  Vec prob = node_probabilities(tree, spec);
  Vec out;
  for (NodeIndex i : tree.leaves()) out.push_back(prob[i]);
  return out;
}

}  // namespace robustdp
