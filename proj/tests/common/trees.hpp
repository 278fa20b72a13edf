#pragma once

// Random enumerable trees and exactly consistent flows for GFlowNet tests.

#include <cmath>
#include <vector>

#include "feedflow/gfn/decision_tree.hpp"
#include "feedflow/rng.hpp"

namespace feedflow::fixtures {

// Each node gets its own head (node id - 1), so log-flows are free per edge.
inline gfn::DecisionTree random_tree(Rng& rng, std::size_t max_terminals, int max_depth = 4) {
  gfn::DecisionTree tree;
  std::vector<std::pair<std::size_t, int>> open{{gfn::DecisionTree::kRoot, 0}};
  std::size_t leaves = 0;
  while (!open.empty()) {
    const auto [node, depth] = open.back();
    open.pop_back();
    // Children of a node become leaves once the budget or depth runs out.
    const std::size_t room = max_terminals - leaves - open.size();
    const std::size_t want = 1 + rng.below(6);
    const std::size_t kids = std::max<std::size_t>(1, std::min(want, room));
    for (std::size_t k = 0; k < kids; ++k) {
      const auto child = tree.add_child(node, tree.size() - 1);
      const bool expand = depth + 1 < max_depth && leaves + open.size() + kids < max_terminals &&
                          rng.bernoulli(0.35);
      if (expand) {
        open.emplace_back(child, depth + 1);
      } else {
        ++leaves;
      }
    }
  }
  return tree;
}

// Grows a tree to roughly `terminals` leaves by splitting random leaves
// into 2-6 children.
inline gfn::DecisionTree grown_tree(Rng& rng, std::size_t terminals) {
  gfn::DecisionTree tree;
  std::vector<std::size_t> leaves;
  const auto split = [&](std::size_t node, std::size_t kids) {
    for (std::size_t k = 0; k < kids; ++k) leaves.push_back(tree.add_child(node, tree.size() - 1));
  };
  split(gfn::DecisionTree::kRoot, std::min<std::size_t>(terminals, 2 + rng.below(5)));
  while (leaves.size() < terminals) {
    const std::size_t pick = rng.below(leaves.size());
    const std::size_t node = leaves[pick];
    leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
    split(node, std::min<std::size_t>(terminals - leaves.size(), 2 + rng.below(5)));
  }
  return tree;
}

// Rewards indexed by node id, positive at terminals, zero elsewhere.
inline std::vector<double> random_rewards(const gfn::DecisionTree& tree, Rng& rng) {
  std::vector<double> r(tree.size(), 0.0);
  for (auto t : tree.terminals()) r[t] = std::exp(rng.uniform(-2.0, 2.0));
  return r;
}

// Log edge flows where every edge carries the reward below it. Returns
// log Z through `log_z`.
inline std::vector<double> consistent_log_flows(const gfn::DecisionTree& tree,
                                                const std::vector<double>& rewards,
                                                double& log_z) {
  std::vector<double> subtotal(tree.size(), 0.0);
  // Children always have larger ids than their parent.
  for (std::size_t n = tree.size(); n-- > 1;) {
    if (tree.is_terminal(n)) subtotal[n] = rewards[n];
    subtotal[tree.parent(n)] += subtotal[n];
  }
  std::vector<double> lf(tree.head_count(), 0.0);
  for (std::size_t n = 1; n < tree.size(); ++n) lf[tree.head(n)] = std::log(subtotal[n]);
  log_z = std::log(subtotal[gfn::DecisionTree::kRoot]);
  return lf;
}

}  // namespace feedflow::fixtures
