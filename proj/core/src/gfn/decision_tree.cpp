#include "feedflow/gfn/decision_tree.hpp"

#include <algorithm>

#include "feedflow/errors.hpp"

namespace feedflow::gfn {

DecisionTree::DecisionTree() : parents_{kRoot}, children_(1), heads_{0} {}

std::size_t DecisionTree::add_child(std::size_t parent, std::size_t head) {
  if (parent >= size()) throw std::out_of_range("decision tree: unknown parent");
  const std::size_t id = size();
  parents_.push_back(parent);
  children_.emplace_back();
  heads_.push_back(head);
  children_[parent].push_back(id);
  return id;
}

std::vector<std::size_t> DecisionTree::terminals() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 1; n < size(); ++n) {
    if (children_[n].empty()) out.push_back(n);
  }
  return out;
}

std::vector<std::size_t> DecisionTree::path_to(std::size_t node) const {
  std::vector<std::size_t> path;
  for (std::size_t n = node; n != kRoot; n = parents_.at(n)) path.push_back(n);
  path.push_back(kRoot);
  std::reverse(path.begin(), path.end());
  return path;
}

std::size_t DecisionTree::head_count() const {
  std::size_t count = 0;
  for (std::size_t n = 1; n < size(); ++n) count = std::max(count, heads_[n] + 1);
  return count;
}

ActionLayout make_layout(const SimConfig& config, std::size_t ladder_levels) {
  return {config.pause_durations_s.size(), static_cast<std::size_t>(config.lookahead),
          ladder_levels};
}

std::optional<std::size_t> ActionTree::find(const CompositeAction& action) const {
  for (std::size_t n = 0; n < actions.size(); ++n) {
    if (actions[n] && *actions[n] == action) return n;
  }
  return std::nullopt;
}

ActionTree build_action_tree(const SessionState& state, const RecommendationQueue& queue,
                             const SimConfig& config, std::size_t ladder_levels,
                             bool allow_pause) {
  if (state.finished) throw StateError("no decisions in a finished session");
  const auto layout = make_layout(config, ladder_levels);
  ActionTree t;
  t.actions.emplace_back();
  for (std::size_t i = 0; allow_pause && i < layout.pauses; ++i) {
    t.tree.add_child(DecisionTree::kRoot, layout.pause_head(i));
    t.actions.emplace_back(Pause{config.pause_durations_s[i]});
  }
  for (std::size_t slot = 0; slot < layout.lookahead; ++slot) {
    const std::size_t v = state.current_video + slot;
    if (v >= queue.size()) break;
    if (state.buffers[v].size() >= queue[v].chunk_count()) continue;
    const auto video_node = t.tree.add_child(DecisionTree::kRoot, layout.slot_head(slot));
    t.actions.emplace_back();
    for (std::size_t l = 0; l < ladder_levels; ++l) {
      t.tree.add_child(video_node, layout.level_head(slot, l));
      t.actions.emplace_back(Download{v, l});
    }
  }
  return t;
}

}  // namespace feedflow::gfn
