#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace robustdp {

using Vec = std::vector<double>;
using NodeIndex = std::size_t;

struct Node {
  std::string id;
  int t = 0;
  std::optional<NodeIndex> parent;
  Vec price;
  std::vector<NodeIndex> children;  // order shared with prior vectors
};

/// Input form of a node, before indexing and validation.
struct NodeSpec {
  std::string id;
  int t = 0;
  std::optional<std::string> parent;
  Vec price;
};

/**
 * Immutable finite event tree.  Nodes are stored level by level (all of
 * depth 0, then depth 1, ...), siblings in their order of appearance.
 */
class ScenarioTree {
 public:
  /// Validates and indexes; throws StructureError on malformed shape.
  static ScenarioTree build(int horizon, int dim, const std::vector<NodeSpec>& specs);

  int horizon() const noexcept { return T_; }
  int dim() const noexcept { return d_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  NodeIndex root() const noexcept { return 0; }

  const Node& node(NodeIndex i) const { return nodes_.at(i); }
  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  bool is_leaf(NodeIndex i) const { return nodes_.at(i).children.empty(); }

  /// Throws UnknownNode.
  NodeIndex index_of(std::string_view id) const;
  std::optional<NodeIndex> find(std::string_view id) const;

  /// Contiguous index range of depth t.
  std::pair<NodeIndex, NodeIndex> level(int t) const;
  std::vector<NodeIndex> leaves() const;
  std::vector<NodeIndex> interior() const;

 private:
  int T_ = 0;
  int d_ = 0;
  std::vector<Node> nodes_;
  std::vector<NodeIndex> level_begin_;
  std::unordered_map<std::string, NodeIndex> by_id_;
};

/// Extreme one-step priors of one non-terminal node; the prior set is their hull.
struct AmbiguitySet {
  NodeIndex owner = 0;
  std::vector<Vec> extremes;
};

struct Market {
  ScenarioTree tree;
  std::vector<AmbiguitySet> ambiguity;  // indexed by node; empty extremes at leaves

  const std::vector<Vec>& extremes(NodeIndex i) const { return ambiguity.at(i).extremes; }
};

/// One kernel per non-terminal node (leaves hold empty vectors).
struct ProductPriorSpec {
  std::vector<Vec> kernel;
  /// Index of the extreme used per node, or -1 for mixed kernels.
  std::vector<int> extreme_choice;
};

/// Parses and validates the JSON market format.  ParseError, StructureError,
/// ProbabilityError.
Market load_market(std::string_view text);
Market load_market_file(const std::string& path);
std::string serialize_market(const Market& m);

/// Builds a market from already-parsed parts; same validation as load_market.
Market make_market(int horizon, int dim, const std::vector<NodeSpec>& nodes,
                   const std::unordered_map<std::string, std::vector<Vec>>& priors);

/// price(child) - price(parent).  UnknownNode if `child` is the root or absent.
Vec increment(const ScenarioTree& tree, NodeIndex child);
Vec increment(const ScenarioTree& tree, std::string_view child);

/// Kernel built from mixing weights over a node's extremes.
Vec mix_extremes(const std::vector<Vec>& extremes, const Vec& weights);

/**
 * Lazy odometer over one-extreme-per-node assignments.  Iteration order:
 * the last interior node varies fastest.
 */
class ExtremeProducts {
 public:
  explicit ExtremeProducts(const Market& m);

  /// Number of specs, saturating at UINT64_MAX.
  std::uint64_t count() const noexcept { return count_; }
  /// log10 of the exact count.
  double log10_count() const noexcept { return log10_count_; }

  class iterator {
   public:
    using value_type = ProductPriorSpec;
    using difference_type = std::ptrdiff_t;
    const ProductPriorSpec& operator*() const { return spec_; }
    const ProductPriorSpec* operator->() const { return &spec_; }
    iterator& operator++();
    bool operator==(const iterator& o) const { return done_ == o.done_ && (done_ || digits_ == o.digits_); }

   private:
    friend class ExtremeProducts;
    iterator(const ExtremeProducts* owner, bool done);
    void refresh(std::size_t from);
    const ExtremeProducts* owner_ = nullptr;
    bool done_ = true;
    std::vector<std::size_t> digits_;
    ProductPriorSpec spec_;
  };

  iterator begin() const { return iterator(this, false); }
  iterator end() const { return iterator(this, true); }

  /// The spec with the given mixed-radix digits (one per interior node).
  ProductPriorSpec at(const std::vector<std::size_t>& digits) const;
  const std::vector<NodeIndex>& interior() const noexcept { return interior_; }

 private:
  const Market* m_;
  std::vector<NodeIndex> interior_;
  std::uint64_t count_ = 1;
  double log10_count_ = 0.0;
};

/// Probability of each node under a product spec (forward push from the root).
Vec node_probabilities(const ScenarioTree& tree, const ProductPriorSpec& spec);

/// Leaf distribution in leaves() order.
Vec leaf_distribution(const ScenarioTree& tree, const ProductPriorSpec& spec);

}  // namespace robustdp
