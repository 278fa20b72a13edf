#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "feedflow/sim.hpp"

namespace feedflow::gfn {

// A rooted tree of construction states. Every edge parent -> child reads
// its log-flow from output unit `head(child)` of the flow model, so one
// model evaluation prices every edge. Leaves other than the root are the
// terminal states.
class DecisionTree {
 public:
  static constexpr std::size_t kRoot = 0;

  DecisionTree();

  // Returns the new node id.
  std::size_t add_child(std::size_t parent, std::size_t head);

  std::size_t size() const { return parents_.size(); }
  std::size_t parent(std::size_t node) const { return parents_.at(node); }
  std::span<const std::size_t> children(std::size_t node) const { return children_.at(node); }
  std::size_t head(std::size_t node) const { return heads_.at(node); }
  bool is_terminal(std::size_t node) const { return node != kRoot && children_.at(node).empty(); }

  std::vector<std::size_t> terminals() const;
  // Node ids from the root down to `node`, inclusive.
  std::vector<std::size_t> path_to(std::size_t node) const;
  // One more than the largest head index used.
  std::size_t head_count() const;

 private:
  std::vector<std::size_t> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> heads_;
};

// Output layout of the composite-action model: pause options, then one
// unit per lookahead slot (slot j = current video + j), then one unit per
// (slot, ladder level).
struct ActionLayout {
  std::size_t pauses = 3;
  std::size_t lookahead = 5;
  std::size_t levels = 4;

  std::size_t output_dim() const { return pauses + lookahead + lookahead * levels; }
  std::size_t pause_head(std::size_t i) const { return i; }
  std::size_t slot_head(std::size_t slot) const { return pauses + slot; }
  std::size_t level_head(std::size_t slot, std::size_t level) const {
    return pauses + lookahead + slot * levels + level;
  }
};

ActionLayout make_layout(const SimConfig& config, std::size_t ladder_levels);

// Per-decision tree: the root picks a pause duration (terminal) or a video
// with missing chunks inside the lookahead window; a video node picks a
// ladder level (terminal).
struct ActionTree {
  DecisionTree tree;
  // Indexed by node id; set for terminals only.
  std::vector<std::optional<CompositeAction>> actions;

  const CompositeAction& action(std::size_t node) const { return *actions.at(node); }
  // Terminal node holding `action`, if the tree has one.
  std::optional<std::size_t> find(const CompositeAction& action) const;
};

// With `allow_pause` false the root offers downloads only.
ActionTree build_action_tree(const SessionState& state, const RecommendationQueue& queue,
                             const SimConfig& config, std::size_t ladder_levels,
                             bool allow_pause = true);

}  // namespace feedflow::gfn
