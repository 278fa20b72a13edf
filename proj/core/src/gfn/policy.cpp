#include "feedflow/gfn/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "feedflow/errors.hpp"

namespace feedflow::gfn {

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double log_out_flow(const DecisionTree& tree, std::span<const double> log_flows,
                    std::size_t state) {
  const auto kids = tree.children(state);
  double m = -std::numeric_limits<double>::infinity();
  for (auto c : kids) m = std::max(m, log_flows[tree.head(c)]);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (auto c : kids) s += std::exp(log_flows[tree.head(c)] - m);
  return m + std::log(s);
}

std::vector<double> forward_policy(const DecisionTree& tree, std::span<const double> log_flows,
                                   std::size_t state) {
  const auto kids = tree.children(state);
  if (kids.empty()) throw StateError("forward policy is undefined at a terminal state");
  const double lse = log_out_flow(tree, log_flows, state);
  std::vector<double> p(kids.size());
  for (std::size_t i = 0; i < kids.size(); ++i) p[i] = std::exp(log_flows[tree.head(kids[i])] - lse);
  return p;
}

ParentChoice backward_policy(const DecisionTree& tree, std::size_t state) {
  if (state == DecisionTree::kRoot) throw StateError("the root has no parent");
  return {tree.parent(state), 1.0};
}

double Trajectory::log_prob() const {
  double s = 0.0;
  for (double l : log_pf) s += l;
  return s;
}

Trajectory trajectory_to(const DecisionTree& tree, std::span<const double> log_flows,
                         std::size_t terminal) {
  Trajectory t;
  t.states = tree.path_to(terminal);
  for (std::size_t i = 1; i < t.states.size(); ++i) {
    t.log_pf.push_back(log_flows[tree.head(t.states[i])] -
                       log_out_flow(tree, log_flows, t.states[i - 1]));
  }
  return t;
}

Trajectory sample_trajectory(const DecisionTree& tree, std::span<const double> log_flows,
                             Rng& rng) {
  Trajectory t;
  std::size_t s = DecisionTree::kRoot;
  t.states.push_back(s);
  while (!tree.children(s).empty()) {
    const auto kids = tree.children(s);
    const auto p = forward_policy(tree, log_flows, s);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t pick = kids.size() - 1;
    for (std::size_t i = 0; i < kids.size(); ++i) {
      acc += p[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    t.log_pf.push_back(std::log(p[pick]));
    s = kids[pick];
    t.states.push_back(s);
  }
  return t;
}

std::vector<Trajectory> sample_candidates(const DecisionTree& tree,
                                          std::span<const double> log_flows, std::size_t k,
                                          Rng& rng) {
  if (k == 0) k = 1;
  std::vector<Trajectory> out;
  for (std::size_t attempt = 0; attempt < 5 * k && out.size() < k; ++attempt) {
    auto t = sample_trajectory(tree, log_flows, rng);
    const bool seen = std::any_of(out.begin(), out.end(),
                                  [&](const Trajectory& o) { return o.terminal() == t.terminal(); });
    if (!seen) out.push_back(std::move(t));
  }
  std::stable_sort(out.begin(), out.end(), [](const Trajectory& a, const Trajectory& b) {
    return a.log_prob() > b.log_prob();
  });
  return out;
}

std::vector<double> terminal_distribution(const DecisionTree& tree,
                                          std::span<const double> log_flows) {
  std::vector<double> reach(tree.size(), 0.0);
  reach[DecisionTree::kRoot] = 1.0;
  // Children always have larger ids than their parents.
  for (std::size_t s = 0; s < tree.size(); ++s) {
    const auto kids = tree.children(s);
    if (kids.empty()) continue;
    const auto p = forward_policy(tree, log_flows, s);
    for (std::size_t i = 0; i < kids.size(); ++i) reach[kids[i]] = reach[s] * p[i];
  }
  for (std::size_t s = 0; s < tree.size(); ++s) {
    if (!tree.is_terminal(s)) reach[s] = 0.0;
  }
  return reach;
}

}  // namespace feedflow::gfn
