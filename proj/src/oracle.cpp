#include "robustdp/oracle.hpp"

#include <cmath>

#include "robustdp/dp.hpp"
#include "robustdp/errors.hpp"

namespace robustdp {

OracleResult brute_force_oracle(const Market& m, const RandomUtility& u, double x0, double step, double radius,
                                double max_combinations) {
  if (!(step > 0.0) || !(radius >= 0.0)) throw ParameterError("oracle needs a positive step and radius");
  const ScenarioTree& tree = m.tree;
  const std::size_t d = static_cast<std::size_t>(tree.dim());
  const std::size_t g = static_cast<std::size_t>(std::llround(2.0 * radius / step)) + 1;
  std::vector<NodeIndex> inner = tree.interior();
  const std::size_t slots = inner.size() * d;

  OracleResult res;
  res.combinations = std::pow(static_cast<double>(g), static_cast<double>(slots));
  if (res.combinations > max_combinations) {
    res.refused = true;
    return res;
  }
  std::vector<Section> sections = bind_sections(u, tree);
  std::vector<std::size_t> digit(slots, 0);
  std::vector<double> wealth(tree.size());
  std::vector<ExtReal> terminal(tree.size());
  auto level = [&](std::size_t k) { return -radius + step * static_cast<double>(digit[k]); };
  std::vector<std::size_t> slot_of(tree.size(), 0);
  for (std::size_t k = 0; k < inner.size(); ++k) slot_of[inner[k]] = k * d;

  std::optional<std::vector<std::size_t>> best_digits;
  while (true) {
    wealth[tree.root()] = x0;
    for (NodeIndex i = 0; i < tree.size(); ++i) {
      if (tree.is_leaf(i)) {
        terminal[i] = sections[i](wealth[i]);
        continue;
      }
      for (NodeIndex c : tree.node(i).children) {
        Vec inc = increment(tree, c);
        double w = wealth[i];
        for (std::size_t j = 0; j < d; ++j) w += level(slot_of[i] + j) * inc[j];
        wealth[c] = w;
      }
    }
    ExtReal v = robust_expectation(m, terminal);
    if (!res.value || v > *res.value) {
      res.value = v;
      best_digits = digit;
    }
    std::size_t k = slots;
    while (k > 0 && ++digit[k - 1] == g) digit[--k] = 0;
    if (k == 0) break;
  }
  if (best_digits) {
    digit = *best_digits;
    for (NodeIndex i : inner) {
      Vec h(d);
      for (std::size_t j = 0; j < d; ++j) h[j] = level(slot_of[i] + j);
      res.strategy[tree.node(i).id] = h;
    }
  }
  return res;
}

}  // namespace robustdp
