#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "feedflow/gfn/flow_model.hpp"
#include "feedflow/gfn/optimizer.hpp"
#include "feedflow/media.hpp"
#include "feedflow/objective.hpp"
#include "feedflow/sim.hpp"
#include "feedflow/traces.hpp"

namespace feedflow {

struct RuleBasedParams {
  double buffer_target_s = 10.0;
  double next_target_s = 4.0;
  double safety_factor = 0.9;
  // The current video is refilled to this level before any prefetching.
  // Equal to buffer_target_s, prefetching waits for the full target.
  double reserve_s = 2.0;
};

// Multi-candidate pipeline: sample k candidates, execute the best-scoring.
struct GfnMulti {
  std::size_t k = 10;
};
// Execute the single sampled action.
struct GfnSingle {};
// Multi-candidate pipeline that sees and scores with fixed preferences
// instead of the user's own.
struct GfnFixedPref {
  PreferenceParams prefs;
  std::size_t k = 10;
};
struct RuleBased {
  RuleBasedParams params;
};

using PolicyKind = std::variant<GfnMulti, GfnSingle, GfnFixedPref, RuleBased>;

std::string policy_label(const PolicyKind& policy);
bool uses_model(const PolicyKind& policy);
// Throws ConfigError when GfnMulti has k < 2.
void validate_policy(const PolicyKind& policy);

struct ControllerConfig {
  SimConfig sim;
  BitrateLadder ladder{std::vector<double>{500.0, 1000.0, 1500.0, 2500.0}};
  QualityMap quality{QualityMode::kLinear, 500.0};
  // Reward temperature: R = exp(objective / tau).
  double tau = 1.0;
  // Train every candidate on its own value instead of the shared mean.
  bool per_candidate_reward = false;
  // Adds the change in buffer_value to each candidate's one-step objective
  // delta.
  bool buffer_value_scoring = true;
  gfn::AdamConfig adam;
  std::size_t max_steps = 200000;
};

struct Scenario {
  std::string id;
  BandwidthClass cls = BandwidthClass::kLow;
  NetworkTrace trace;
  RecommendationQueue queue;
  UserTrace user;
  PreferenceParams prefs;
};

// What candidate scoring is allowed to see: no trace, no user trace.
struct ScoringContext {
  const RecommendationQueue& queue;
  const ControllerConfig& config;
  PreferenceParams prefs;
  double throughput_mbps = 1.0;
};

// Expected worth of what is buffered but not yet played: for each such
// chunk, P(chunk plays) * (alpha * q - gamma * |q - q of the chunk before
// it|), minus beta * the stall the current video would still suffer if its
// next missing chunk were fetched now at the lowest level. Zero for a
// finished session.
double buffer_value(const SessionState& state, const ScoringContext& ctx,
                    const RetentionEstimate& retention);

// Scores candidates for one decision. Each candidate is applied to a copy
// of the state, with bandwidth fixed at the throughput estimate and the
// user assumed to keep watching; the score is the objective delta of that
// step plus (when enabled) the change in buffer_value, with retention
// estimated once from the history at decision time.
class CandidateScorer {
 public:
  CandidateScorer(const SessionState& state, const ScoringContext& ctx);

  // Throws InvalidActionError for actions not legal in the state.
  double score(const CompositeAction& action) const;

 private:
  const SessionState& state_;
  const ScoringContext& ctx_;
  NetworkTrace estimate_trace_;
  UserTrace full_watch_;
  RetentionEstimate retention_;
  SessionMetrics before_;
  double value_before_ = 0.0;
};

double evaluate_candidate(const SessionState& state, const CompositeAction& action,
                          const ScoringContext& ctx);

// Index of the highest value; ties go to the earliest (best-ranked)
// candidate. Throws ValidationError on empty or mismatched input.
std::size_t select_best_index(std::span<const double> values);
CompositeAction select_best(std::span<const CompositeAction> candidates,
                            std::span<const double> values);

// Buffer-threshold baseline. Current-video downloads use the highest level
// within safety * throughput, prefetches the lowest level. In order: refill
// the current video below its reserve; top up the next videos in the
// lookahead window to the prefetch target; fill the current video to the
// buffer target; otherwise pause for the shortest duration.
CompositeAction rule_based_decide(const SessionState& state, const RecommendationQueue& queue,
                                  const ControllerConfig& config, const RuleBasedParams& params,
                                  double throughput_mbps);

struct DecisionRecord {
  double clock_s = 0.0;
  CompositeAction action;
  // Score of the executed action (0 for the rule-based policy).
  double score = 0.0;
  std::size_t candidates = 0;
};

struct TrainingStats {
  double mean_tb_loss = 0.0;
  double mean_log_reward = 0.0;
  std::size_t updates = 0;
};

struct EpisodeResult {
  SessionMetrics metrics;
  std::size_t watched_chunks = 0;
  std::vector<DecisionRecord> decisions;
  std::optional<TrainingStats> training;
};

// Architecture for a config: observation -> hidden -> action layout.
gfn::Architecture controller_architecture(const ControllerConfig& config,
                                          std::span<const std::size_t> hidden);

// Plays one scenario to the end. Model-based policies need `model`; with
// `train` set they also need `optimizer` and apply one trajectory-balance
// update per decision. Pauses are not offered while the player waits on a
// chunk. Deterministic for a fixed seed.
EpisodeResult run_episode(const PolicyKind& policy, gfn::FlowModel* model,
                          gfn::AdamOptimizer* optimizer, const Scenario& scenario,
                          const ControllerConfig& config, bool train, std::uint64_t seed);

}  // namespace feedflow
