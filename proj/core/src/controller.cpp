#include "feedflow/controller.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "feedflow/errors.hpp"
#include "feedflow/gfn/decision_tree.hpp"
#include "feedflow/gfn/losses.hpp"
#include "feedflow/gfn/policy.hpp"
#include "feedflow/rng.hpp"

namespace feedflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

UserTrace full_watch_user(const RecommendationQueue& queue) {
  UserTrace u;
  u.watch_durations.reserve(queue.size());
  for (const auto& v : queue.videos) u.watch_durations.push_back(v.length_s());
  return u;
}

bool has_missing(const SessionState& state, const RecommendationQueue& queue, std::size_t v) {
  return state.buffers[v].size() < queue[v].chunk_count();
}

}  // namespace

std::string policy_label(const PolicyKind& policy) {
  return std::visit(Overloaded{
                        [](const GfnMulti& p) { return fmt::format("gfn-multi(k={})", p.k); },
                        [](const GfnSingle&) { return std::string("gfn-single"); },
                        [](const GfnFixedPref& p) { return fmt::format("gfn-fixed(k={})", p.k); },
                        [](const RuleBased&) { return std::string("rule-based"); },
                    },
                    policy);
}

bool uses_model(const PolicyKind& policy) { return !std::holds_alternative<RuleBased>(policy); }

void validate_policy(const PolicyKind& policy) {
  if (const auto* m = std::get_if<GfnMulti>(&policy); m && m->k < 2) {
    throw ConfigError("GfnMulti needs k >= 2; use GfnSingle for one candidate");
  }
  if (const auto* f = std::get_if<GfnFixedPref>(&policy)) {
    if (f->k < 1) throw ConfigError("GfnFixedPref needs k >= 1");
    f->prefs.validate();
  }
  if (const auto* r = std::get_if<RuleBased>(&policy)) {
    if (!(r->params.buffer_target_s > 0.0) || !(r->params.next_target_s >= 0.0) ||
        !(r->params.safety_factor > 0.0)) {
      throw ConfigError("rule-based targets and safety factor must be positive");
    }
    if (!(r->params.reserve_s >= 0.0) || r->params.reserve_s > r->params.buffer_target_s) {
      throw ConfigError("rule-based reserve must lie in [0, buffer_target_s]");
    }
  }
}

double buffer_value(const SessionState& state, const ScoringContext& ctx,
                    const RetentionEstimate& retention) {
  if (state.finished) return 0.0;
  const auto& ladder = ctx.config.ladder;
  const auto& prefs = ctx.prefs;
  const auto q = [&](std::size_t level) { return ctx.config.quality(ladder.kbps(level)); };

  std::optional<double> last_played;
  if (!state.watch_log.empty()) last_played = q(state.watch_log.back().level);

  double total = 0.0;
  for (std::size_t v = state.current_video; v < ctx.queue.size(); ++v) {
    const auto& buf = state.buffers[v];
    const std::size_t first = state.started_chunks[v];
    std::optional<double> prev = first > 0 ? std::optional(q(buf[first - 1].level)) : last_played;
    for (std::size_t c = first; c < buf.size(); ++c) {
      const double qc = q(buf[c].level);
      double worth = prefs.alpha * qc;
      if (prev) worth -= prefs.gamma * std::abs(qc - *prev);
      total += retention.chunk_start_probability(state, ctx.queue, v, c) * worth;
      prev = qc;
    }
  }

  const std::size_t cur = state.current_video;
  const std::size_t missing = state.buffers[cur].size();
  if (missing < ctx.queue[cur].chunk_count()) {
    const double megabits =
        static_cast<double>(ctx.queue[cur].chunk_size(missing, 0)) * 8.0 / 1e6;
    const double fetch_s = megabits / std::max(ctx.throughput_mbps, 1e-6);
    const double shortfall = fetch_s - buffer_ahead_s(state, ctx.queue, cur);
    if (shortfall > 0.0) {
      total -= prefs.beta * shortfall *
               retention.chunk_start_probability(state, ctx.queue, cur, missing);
    }
  }
  return total;
}

CandidateScorer::CandidateScorer(const SessionState& state, const ScoringContext& ctx)
    : state_(state),
      ctx_(ctx),
      estimate_trace_(NetworkTrace::constant(ctx.throughput_mbps)),
      full_watch_(full_watch_user(ctx.queue)),
      retention_(state, ctx.queue, ctx.config.sim.retention_prior_weight),
      before_(session_metrics(state, ctx.config.ladder, ctx.prefs, ctx.config.quality)) {
  if (ctx.config.buffer_value_scoring) value_before_ = buffer_value(state, ctx, retention_);
}

double CandidateScorer::score(const CompositeAction& action) const {
  SessionState clone = state_;
  const SessionEnv env{estimate_trace_, ctx_.queue, full_watch_, ctx_.config.sim};
  step(clone, action, env);
  const auto after = session_metrics(clone, ctx_.config.ladder, ctx_.prefs, ctx_.config.quality);
  double value = step_objective_delta(before_, after);
  if (ctx_.config.buffer_value_scoring) {
    value += buffer_value(clone, ctx_, retention_) - value_before_;
  }
  return value;
}

double evaluate_candidate(const SessionState& state, const CompositeAction& action,
                          const ScoringContext& ctx) {
  return CandidateScorer(state, ctx).score(action);
}

std::size_t select_best_index(std::span<const double> values) {
  if (values.empty()) throw ValidationError("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

CompositeAction select_best(std::span<const CompositeAction> candidates,
                            std::span<const double> values) {
  if (candidates.size() != values.size()) {
    throw ValidationError("select_best: candidates and values differ in length");
  }
  return candidates[select_best_index(values)];
}

CompositeAction rule_based_decide(const SessionState& state, const RecommendationQueue& queue,
                                  const ControllerConfig& config, const RuleBasedParams& params,
                                  double throughput_mbps) {
  if (state.finished) throw StateError("no decisions in a finished session");
  const std::size_t cur = state.current_video;
  const std::size_t window_end =
      std::min(queue.size(), cur + static_cast<std::size_t>(config.sim.lookahead));
  const std::size_t rate_level =
      config.ladder.highest_level_at_most(params.safety_factor * throughput_mbps);

  const bool cur_missing = has_missing(state, queue, cur);
  const double cur_ahead = buffer_ahead_s(state, queue, cur);
  if (cur_missing && cur_ahead < params.reserve_s) return Download{cur, rate_level};
  for (std::size_t v = cur + 1; v < window_end; ++v) {
    if (has_missing(state, queue, v) && buffer_ahead_s(state, queue, v) < params.next_target_s) {
      return Download{v, 0};
    }
  }
  if (cur_missing && cur_ahead < params.buffer_target_s) return Download{cur, rate_level};
  return Pause{*std::min_element(config.sim.pause_durations_s.begin(),
                                 config.sim.pause_durations_s.end())};
}

gfn::Architecture controller_architecture(const ControllerConfig& config,
                                          std::span<const std::size_t> hidden) {
  gfn::Architecture arch;
  arch.layers.push_back(static_cast<std::size_t>(observation_dim(config.sim)));
  arch.layers.insert(arch.layers.end(), hidden.begin(), hidden.end());
  arch.layers.push_back(gfn::make_layout(config.sim, config.ladder.size()).output_dim());
  return arch;
}

EpisodeResult run_episode(const PolicyKind& policy, gfn::FlowModel* model,
                          gfn::AdamOptimizer* optimizer, const Scenario& scenario,
                          const ControllerConfig& config, bool train, std::uint64_t seed) {
  validate_policy(policy);
  const bool model_based = uses_model(policy);
  if (model_based && model == nullptr) {
    throw ConfigError(policy_label(policy) + " needs a flow model");
  }
  if (train && model_based && optimizer == nullptr) {
    throw ConfigError("training needs an optimizer");
  }
  if (model_based && model->architecture().input_dim() !=
                         static_cast<std::size_t>(observation_dim(config.sim))) {
    throw ValidationError("flow model input does not match the observation size");
  }

  const SessionEnv env{scenario.trace, scenario.queue, scenario.user, config.sim};
  SessionState state = initial_state(env);
  const double prior = class_prior_mbps(scenario.cls);
  Rng rng(seed);

  std::size_t k = 1;
  PreferenceParams policy_prefs = scenario.prefs;
  if (const auto* m = std::get_if<GfnMulti>(&policy)) k = m->k;
  if (const auto* f = std::get_if<GfnFixedPref>(&policy)) {
    k = f->k;
    policy_prefs = f->prefs;
  }

  EpisodeResult result;
  TrainingStats stats;
  gfn::FlowModel::Cache cache;
  std::vector<double> d_log_flows;

  while (!state.finished) {
    if (result.decisions.size() >= config.max_steps) {
      throw Error(fmt::format("episode {} exceeded {} decisions", scenario.id, config.max_steps));
    }
    const double throughput =
        estimate_throughput_mbps(state, config.sim.throughput_history, prior);
    DecisionRecord record;
    record.clock_s = state.clock_s;

    if (const auto* rule = std::get_if<RuleBased>(&policy)) {
      record.action = rule_based_decide(state, scenario.queue, config, rule->params, throughput);
    } else {
      const auto obs =
          observe(state, scenario.queue, config.sim, config.ladder, prior, policy_prefs);
      const auto at = gfn::build_action_tree(state, scenario.queue, config.sim,
                                             config.ladder.size(),
                                             !player_waiting(state, scenario.queue));
      const auto log_flows = model->forward(obs, &cache);
      const auto candidates = gfn::sample_candidates(at.tree, log_flows, k, rng);

      const ScoringContext ctx{scenario.queue, config, policy_prefs, throughput};
      const CandidateScorer scorer(state, ctx);
      std::vector<double> values;
      values.reserve(candidates.size());
      for (const auto& c : candidates) values.push_back(scorer.score(at.action(c.terminal())));
      const std::size_t best = select_best_index(values);
      record.action = at.action(candidates[best].terminal());
      record.score = values[best];
      record.candidates = candidates.size();

      if (train) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        d_log_flows.assign(log_flows.size(), 0.0);
        auto grad = model->zero_gradient();
        const double weight = 1.0 / static_cast<double>(candidates.size());
        double loss = 0.0;
        for (std::size_t i = 0; i < candidates.size(); ++i) {
          const double log_reward = (config.per_candidate_reward ? values[i] : mean) / config.tau;
          loss += weight * gfn::tb_loss_grad(at.tree, log_flows, model->log_z(), candidates[i],
                                             log_reward, d_log_flows, grad.log_z, weight);
        }
        model->backward(cache, d_log_flows, grad.params);
        optimizer->step(*model, grad);
        stats.mean_tb_loss += loss;
        stats.mean_log_reward += mean / config.tau;
        ++stats.updates;
      }
    }

    step(state, record.action, env);
    result.decisions.push_back(std::move(record));
  }

  result.metrics = session_metrics(state, config.ladder, scenario.prefs, config.quality);
  result.watched_chunks = state.watch_log.size();
  if (train && model_based) {
    if (stats.updates > 0) {
      stats.mean_tb_loss /= static_cast<double>(stats.updates);
      stats.mean_log_reward /= static_cast<double>(stats.updates);
    }
    result.training = stats;
  }
  return result;
}

}  // namespace feedflow
