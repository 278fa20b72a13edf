#pragma once

#include <span>
#include <vector>

#include "feedflow/gfn/decision_tree.hpp"
#include "feedflow/rng.hpp"

namespace feedflow::gfn {

// In every function below, `log_flows[tree.head(n)]` is log F(parent(n) -> n).

double log_sum_exp(std::span<const double> xs);

// log sum of the outgoing edge flows of `state`.
double log_out_flow(const DecisionTree& tree, std::span<const double> log_flows,
                    std::size_t state);

// P_F(child | state), aligned with tree.children(state). Throws StateError
// for terminal states.
std::vector<double> forward_policy(const DecisionTree& tree, std::span<const double> log_flows,
                                   std::size_t state);

struct ParentChoice {
  std::size_t parent = 0;
  double probability = 1.0;
};

// On a tree every state has one parent, so P_B is a point mass. Throws
// StateError at the root.
ParentChoice backward_policy(const DecisionTree& tree, std::size_t state);

struct Trajectory {
  // s0 ... sn; sn is terminal.
  std::vector<std::size_t> states;
  // log P_F(s_{t+1} | s_t), one per edge.
  std::vector<double> log_pf;

  std::size_t terminal() const { return states.back(); }
  double log_prob() const;
};

Trajectory trajectory_to(const DecisionTree& tree, std::span<const double> log_flows,
                         std::size_t terminal);

Trajectory sample_trajectory(const DecisionTree& tree, std::span<const double> log_flows,
                             Rng& rng);

// Up to `k` distinct terminals from repeated sampling (at most 5k draws),
// ordered by descending trajectory log-probability; ties keep draw order.
// Always returns at least one trajectory.
std::vector<Trajectory> sample_candidates(const DecisionTree& tree,
                                          std::span<const double> log_flows, std::size_t k,
                                          Rng& rng);

// Exact probability of reaching each terminal, indexed by node id (zero for
// non-terminals).
std::vector<double> terminal_distribution(const DecisionTree& tree,
                                          std::span<const double> log_flows);

}  // namespace feedflow::gfn
