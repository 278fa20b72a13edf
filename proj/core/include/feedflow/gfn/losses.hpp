#pragma once

#include <span>
#include <vector>

#include "feedflow/gfn/decision_tree.hpp"
#include "feedflow/gfn/flow_model.hpp"
#include "feedflow/gfn/policy.hpp"

namespace feedflow::gfn {

// ---- Losses on explicit log edge-flows -----------------------------------
//
// Rewards are strictly positive; the functions taking `reward` throw
// DomainError otherwise. P_B is a point mass on trees, so its log-sum in
// trajectory balance is identically zero.

// log Z + sum log P_F(tau) - log R(x).
double tb_residual(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                   const Trajectory& trajectory, double log_reward);

double tb_loss(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
               const Trajectory& trajectory, double reward);

// Adds weight * d(loss)/d(log_flows) and weight * d(loss)/d(log Z); returns
// the unweighted loss.
double tb_loss_grad(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                    const Trajectory& trajectory, double log_reward, std::span<double> d_log_flows,
                    double& d_log_z, double weight);

// In-flow minus out-flow (log space) at a non-root state; at terminals the
// out-flow is R(s). `rewards` is indexed by node id and read at terminals.
double fm_residual(const DecisionTree& tree, std::span<const double> log_flows,
                   std::size_t state, std::span<const double> rewards);

// Mean squared residual over `states` (non-root).
double fm_loss(const DecisionTree& tree, std::span<const double> log_flows,
               std::span<const std::size_t> states, std::span<const double> rewards);
// Over every non-root state.
double fm_loss(const DecisionTree& tree, std::span<const double> log_flows,
               std::span<const double> rewards);

double fm_loss_grad(const DecisionTree& tree, std::span<const double> log_flows,
                    std::span<const std::size_t> states, std::span<const double> rewards,
                    std::span<double> d_log_flows, double weight);

// State flows: F(s0) = Z, F(x) = in-flow for terminals, out-flow elsewhere.
double log_state_flow(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                      std::size_t state);

// log F(s) + log P_F(s'|s) - log F(s') - log P_B(s|s') for an edge s -> s'.
double db_residual(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                   std::size_t from, std::size_t to);

// log F(x) - log R(x).
double db_terminal_residual(const DecisionTree& tree, std::span<const double> log_flows,
                            std::size_t terminal, double reward);

// ---- Model-level batches --------------------------------------------------

// One observation, its decision tree, and trajectories with log rewards.
struct TbItem {
  std::vector<double> input;
  const DecisionTree* tree = nullptr;
  std::vector<Trajectory> trajectories;
  std::vector<double> log_rewards;
};

struct FmItem {
  std::vector<double> input;
  const DecisionTree* tree = nullptr;
  std::vector<std::size_t> states;
  std::vector<double> rewards;
};

struct LossAndGradient {
  double loss = 0.0;
  Gradient gradient;
};

// Means over every trajectory (TB) or every listed state (FM) in the batch.
double tb_loss(const FlowModel& model, std::span<const TbItem> batch);
LossAndGradient tb_gradient(const FlowModel& model, std::span<const TbItem> batch);
double fm_loss(const FlowModel& model, std::span<const FmItem> batch);
LossAndGradient fm_gradient(const FlowModel& model, std::span<const FmItem> batch);

}  // namespace feedflow::gfn
