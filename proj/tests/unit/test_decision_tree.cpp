#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "feedflow/errors.hpp"
#include "feedflow/gfn/decision_tree.hpp"
#include "fixtures.hpp"
#include "trees.hpp"

using namespace feedflow;
using namespace feedflow::gfn;

TEST(DecisionTree, BuildsParentsChildrenAndPaths) {
  DecisionTree t;
  const auto a = t.add_child(DecisionTree::kRoot, 0);
  const auto b = t.add_child(DecisionTree::kRoot, 1);
  const auto c = t.add_child(b, 4);
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.parent(c), b);
  EXPECT_EQ(t.children(DecisionTree::kRoot).size(), 2u);
  EXPECT_TRUE(t.is_terminal(a));
  EXPECT_FALSE(t.is_terminal(b));
  EXPECT_FALSE(t.is_terminal(DecisionTree::kRoot));
  EXPECT_EQ(t.terminals(), (std::vector<std::size_t>{a, c}));
  EXPECT_EQ(t.path_to(c), (std::vector<std::size_t>{0, b, c}));
  EXPECT_EQ(t.head_count(), 5u);
  EXPECT_THROW(t.add_child(17, 0), std::out_of_range);
}

TEST(DecisionTree, RandomTreesAreTreesWithBoundedLeaves) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const auto t = fixtures::random_tree(rng, 1 + rng.below(200));
    EXPECT_GE(t.terminals().size(), 1u);
    EXPECT_LE(t.terminals().size(), 200u);
    for (std::size_t n = 1; n < t.size(); ++n) {
      EXPECT_LT(t.parent(n), n);
      const auto kids = t.children(t.parent(n));
      EXPECT_EQ(std::count(kids.begin(), kids.end(), n), 1);
    }
  }
}

TEST(ActionLayout, HeadsAreDisjointAndDense) {
  const ActionLayout layout{3, 5, 4};
  std::set<std::size_t> heads;
  for (std::size_t i = 0; i < 3; ++i) heads.insert(layout.pause_head(i));
  for (std::size_t s = 0; s < 5; ++s) {
    heads.insert(layout.slot_head(s));
    for (std::size_t l = 0; l < 4; ++l) heads.insert(layout.level_head(s, l));
  }
  EXPECT_EQ(heads.size(), layout.output_dim());
  EXPECT_EQ(*heads.rbegin() + 1, layout.output_dim());
  EXPECT_EQ(layout.output_dim(), 28u);
}

TEST(ActionTree, TerminalsAreExactlyTheLegalActions) {
  Rng rng(9);
  const SimConfig config;
  const auto layout = make_layout(config, 4);
  for (int episode = 0; episode < 100; ++episode) {
    const auto w = fixtures::random_world(rng);
    const SessionEnv env{w.trace, w.queue, w.user, config};
    auto state = initial_state(env);
    while (!state.finished) {
      const auto legal = legal_actions(state, w.queue, config, 4);
      const auto at = build_action_tree(state, w.queue, config, 4);
      const auto terminals = at.tree.terminals();
      ASSERT_EQ(terminals.size(), legal.size());
      std::vector<CompositeAction> got;
      for (auto n : terminals) {
        got.push_back(at.action(n));
        EXPECT_LT(at.tree.head(n), layout.output_dim());
        // Pauses hang off the root; downloads sit two levels down.
        const auto depth = at.tree.path_to(n).size() - 1;
        EXPECT_EQ(depth, std::holds_alternative<Pause>(at.action(n)) ? 1u : 2u);
      }
      EXPECT_EQ(got, legal);
      for (const auto& a : legal) {
        const auto n = at.find(a);
        ASSERT_TRUE(n.has_value());
        EXPECT_EQ(at.action(*n), a);
      }
      step(state, fixtures::random_legal_action(state, w, config, rng), env);
    }
  }
}

TEST(ActionTree, WithoutPausesOnlyDownloadsRemain) {
  const SimConfig config;
  const NetworkTrace trace = NetworkTrace::constant(1.0);
  const RecommendationQueue queue{{fixtures::flat_video("a", 2, 1000)}};
  const UserTrace user{{4.0}};
  const auto state = initial_state({trace, queue, user, config});
  const auto at = build_action_tree(state, queue, config, 4, false);
  EXPECT_EQ(at.tree.terminals().size(), 4u);
  EXPECT_FALSE(at.find(Pause{1.0}).has_value());
  EXPECT_TRUE(at.find(Download{0, 3}).has_value());
}

TEST(ActionTree, FinishedSessionThrows) {
  SessionState state;
  state.finished = true;
  const RecommendationQueue queue{{fixtures::flat_video("a", 1, 1000)}};
  EXPECT_THROW(build_action_tree(state, queue, SimConfig{}, 4), StateError);
}
