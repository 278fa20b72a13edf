#include "feedflow/gfn/losses.hpp"

#include <fmt/format.h>

#include <cmath>

#include "feedflow/errors.hpp"

namespace feedflow::gfn {

namespace {

double checked_log(double reward) {
  if (!(reward > 0.0)) throw DomainError(fmt::format("reward {} must be > 0", reward));
  return std::log(reward);
}

}  // namespace

double tb_residual(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                   const Trajectory& trajectory, double log_reward) {
  double r = log_z - log_reward;
  const auto& s = trajectory.states;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) {
    r += log_flows[tree.head(s[t + 1])] - log_out_flow(tree, log_flows, s[t]);
  }
  return r;
}

double tb_loss(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
               const Trajectory& trajectory, double reward) {
  const double r = tb_residual(tree, log_flows, log_z, trajectory, checked_log(reward));
  return r * r;
}

double tb_loss_grad(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                    const Trajectory& trajectory, double log_reward, std::span<double> d_log_flows,
                    double& d_log_z, double weight) {
  const double r = tb_residual(tree, log_flows, log_z, trajectory, log_reward);
  const double g = 2.0 * r * weight;
  d_log_z += g;
  const auto& s = trajectory.states;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) {
    const auto kids = tree.children(s[t]);
    const auto p = forward_policy(tree, log_flows, s[t]);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const double indicator = kids[i] == s[t + 1] ? 1.0 : 0.0;
      d_log_flows[tree.head(kids[i])] += g * (indicator - p[i]);
    }
  }
  return r * r;
}

double fm_residual(const DecisionTree& tree, std::span<const double> log_flows,
                   std::size_t state, std::span<const double> rewards) {
  if (state == DecisionTree::kRoot) throw StateError("flow matching is undefined at the root");
  const double in = log_flows[tree.head(state)];
  const double out = tree.is_terminal(state) ? checked_log(rewards[state])
                                             : log_out_flow(tree, log_flows, state);
  return in - out;
}

double fm_loss(const DecisionTree& tree, std::span<const double> log_flows,
               std::span<const std::size_t> states, std::span<const double> rewards) {
  if (states.empty()) return 0.0;
  double total = 0.0;
  for (auto s : states) {
    const double r = fm_residual(tree, log_flows, s, rewards);
    total += r * r;
  }
  return total / static_cast<double>(states.size());
}

double fm_loss(const DecisionTree& tree, std::span<const double> log_flows,
               std::span<const double> rewards) {
  std::vector<std::size_t> states;
  for (std::size_t s = 1; s < tree.size(); ++s) states.push_back(s);
  return fm_loss(tree, log_flows, states, rewards);
}

double fm_loss_grad(const DecisionTree& tree, std::span<const double> log_flows,
                    std::span<const std::size_t> states, std::span<const double> rewards,
                    std::span<double> d_log_flows, double weight) {
  if (states.empty()) return 0.0;
  const double scale = weight / static_cast<double>(states.size());
  double total = 0.0;
  for (auto s : states) {
    const double r = fm_residual(tree, log_flows, s, rewards);
    total += r * r;
    const double g = 2.0 * r * scale;
    d_log_flows[tree.head(s)] += g;
    if (!tree.is_terminal(s)) {
      const auto kids = tree.children(s);
      const auto p = forward_policy(tree, log_flows, s);
      for (std::size_t i = 0; i < kids.size(); ++i) d_log_flows[tree.head(kids[i])] -= g * p[i];
    }
  }
  return total / static_cast<double>(states.size());
}

double log_state_flow(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                      std::size_t state) {
  if (state == DecisionTree::kRoot) return log_z;
  if (tree.is_terminal(state)) return log_flows[tree.head(state)];
  return log_out_flow(tree, log_flows, state);
}

double db_residual(const DecisionTree& tree, std::span<const double> log_flows, double log_z,
                   std::size_t from, std::size_t to) {
  if (to == DecisionTree::kRoot || tree.parent(to) != from) {
    throw InvalidActionError("db_residual: not an edge of the tree");
  }
  const double log_pf = log_flows[tree.head(to)] - log_out_flow(tree, log_flows, from);
  const double log_pb = std::log(backward_policy(tree, to).probability);
  return log_state_flow(tree, log_flows, log_z, from) + log_pf -
         log_state_flow(tree, log_flows, log_z, to) - log_pb;
}

double db_terminal_residual(const DecisionTree& tree, std::span<const double> log_flows,
                            std::size_t terminal, double reward) {
  if (!tree.is_terminal(terminal)) throw StateError("db_terminal_residual needs a terminal");
  return log_flows[tree.head(terminal)] - checked_log(reward);
}

double tb_loss(const FlowModel& model, std::span<const TbItem> batch) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& item : batch) {
    const auto lf = model.forward(item.input);
    for (std::size_t i = 0; i < item.trajectories.size(); ++i) {
      const double r =
          tb_residual(*item.tree, lf, model.log_z(), item.trajectories[i], item.log_rewards[i]);
      total += r * r;
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

LossAndGradient tb_gradient(const FlowModel& model, std::span<const TbItem> batch) {
  LossAndGradient out{0.0, model.zero_gradient()};
  std::size_t count = 0;
  for (const auto& item : batch) count += item.trajectories.size();
  if (count == 0) return out;
  const double weight = 1.0 / static_cast<double>(count);
  FlowModel::Cache cache;
  std::vector<double> d_lf;
  for (const auto& item : batch) {
    if (item.log_rewards.size() != item.trajectories.size()) {
      throw ValidationError("TB batch item: one log reward per trajectory required");
    }
    const auto lf = model.forward(item.input, &cache);
    d_lf.assign(lf.size(), 0.0);
    for (std::size_t i = 0; i < item.trajectories.size(); ++i) {
      out.loss += weight * tb_loss_grad(*item.tree, lf, model.log_z(), item.trajectories[i],
                                        item.log_rewards[i], d_lf, out.gradient.log_z, weight);
    }
    model.backward(cache, d_lf, out.gradient.params);
  }
  return out;
}

double fm_loss(const FlowModel& model, std::span<const FmItem> batch) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& item : batch) {
    const auto lf = model.forward(item.input);
    total += fm_loss(*item.tree, lf, item.states, item.rewards) *
             static_cast<double>(item.states.size());
    count += item.states.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

LossAndGradient fm_gradient(const FlowModel& model, std::span<const FmItem> batch) {
  LossAndGradient out{0.0, model.zero_gradient()};
  std::size_t count = 0;
  for (const auto& item : batch) count += item.states.size();
  if (count == 0) return out;
  FlowModel::Cache cache;
  std::vector<double> d_lf;
  for (const auto& item : batch) {
    const auto lf = model.forward(item.input, &cache);
    d_lf.assign(lf.size(), 0.0);
    // Per-item mean times the item's share of all states gives the batch mean.
    const double share = static_cast<double>(item.states.size()) / static_cast<double>(count);
    out.loss += share * fm_loss_grad(*item.tree, lf, item.states, item.rewards, d_lf, share);
    model.backward(cache, d_lf, out.gradient.params);
  }
  return out;
}

}  // namespace feedflow::gfn
