#include "feedflow/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <ostream>

#include "feedflow/errors.hpp"

namespace feedflow {

namespace {

// Tolerance for comparing playhead positions against chunk boundaries.
constexpr double kTimeEps = 1e-9;

struct Player {
  SessionState& s;
  const SessionEnv& env;
  StepOutcome& out;

  void swipe() {
    const std::size_t v = s.current_video;
    s.watched_s.push_back(s.playhead_s);
    if (v + 1 == env.queue.size()) {
      // End of session: whatever is left in the last buffer stays there.
      s.finished = true;
      return;
    }
    const auto unplayed = s.unplayed_bytes(v);
    s.wasted_bytes += unplayed;
    out.newly_wasted_bytes += unplayed;
    ++out.swipes;
    ++s.current_video;
    s.playhead_s = 0.0;
  }

  void start_chunk(std::size_t chunk) {
    const std::size_t v = s.current_video;
    const auto& entry = s.buffers[v][chunk];
    s.watch_log.push_back({v, chunk, entry.level, s.pending_stall_s});
    s.pending_stall_s = 0.0;
    s.started_chunks[v] = chunk + 1;
    s.played_bytes += entry.bytes;
    s.playback_started = true;
    ++out.chunks_played;
  }

  // Runs playback from s.clock_s up to `until`, with the buffers frozen.
  void advance(double until) {
    while (true) {
      if (s.finished) {
        s.clock_s = std::max(s.clock_s, until);
        return;
      }
      const std::size_t v = s.current_video;
      const Video& video = env.queue[v];
      const double watch = env.effective_watch_s(v);
      if (s.playhead_s >= watch - kTimeEps) {
        swipe();
        continue;
      }
      const double cd = video.chunk_duration_s;
      const auto chunk = std::min(
          video.chunk_count() - 1,
          static_cast<std::size_t>(std::floor((s.playhead_s + kTimeEps) / cd)));
      if (s.started_chunks[v] <= chunk) {
        if (s.buffers[v].size() > chunk) {
          start_chunk(chunk);
          continue;
        }
        const double dt = until - s.clock_s;
        if (dt <= 0.0) return;
        if (s.playback_started) {
          s.rebuffer_total_s += dt;
          s.pending_stall_s += dt;
          out.rebuffer_s += dt;
        }
        s.clock_s = until;
        return;
      }
      const double boundary = std::min(static_cast<double>(chunk + 1) * cd, watch);
      const double to_boundary = boundary - s.playhead_s;
      const double to_until = until - s.clock_s;
      if (to_until <= 0.0) return;
      if (to_boundary <= to_until) {
        s.playhead_s = boundary;
        s.clock_s += to_boundary;
      } else {
        s.playhead_s += to_until;
        s.clock_s = until;
      }
    }
  }
};

void check_action(const SessionState& state, const CompositeAction& action,
                  const RecommendationQueue& queue, const SimConfig& config,
                  std::size_t ladder_levels) {
  if (!is_legal(state, action, queue, config, ladder_levels)) {
    throw InvalidActionError("illegal action " + describe(action));
  }
}

}  // namespace

void SimConfig::validate() const {
  if (pause_durations_s.empty()) throw ConfigError("pause set must not be empty");
  for (double d : pause_durations_s) {
    if (!(d > 0.0)) throw ConfigError("pause durations must be > 0");
  }
  if (lookahead < 1) throw ConfigError("lookahead must be >= 1");
  if (throughput_history < 1) throw ConfigError("throughput history must be >= 1");
  if (!(throughput_scale_mbps > 0.0) || !(buffer_scale_s > 0.0) || !(watch_scale_s > 0.0)) {
    throw ConfigError("observation scales must be > 0");
  }
  if (!(retention_prior_weight >= 0.0)) throw ConfigError("retention prior weight must be >= 0");
}

std::string describe(const CompositeAction& action) {
  if (const auto* d = std::get_if<Download>(&action)) {
    return fmt::format("download:v{}:l{}", d->video, d->level);
  }
  return fmt::format("pause:{}", std::get<Pause>(action).duration_s);
}

double DownloadRecord::throughput_mbps() const {
  return static_cast<double>(bytes) * 8.0 / 1e6 / (end_s - start_s);
}

std::int64_t SessionState::unplayed_bytes(std::size_t video) const {
  std::int64_t total = 0;
  for (std::size_t i = started_chunks[video]; i < buffers[video].size(); ++i) {
    total += buffers[video][i].bytes;
  }
  return total;
}

double SessionEnv::effective_watch_s(std::size_t video) const {
  const double intended =
      video < user.watch_durations.size() ? user.watch_durations[video] : 0.0;
  return std::min(intended, queue[video].length_s());
}

SessionState initial_state(const SessionEnv& env) {
  if (env.queue.size() == 0) throw ValidationError("recommendation queue is empty");
  if (env.user.watch_durations.size() < env.queue.size()) {
    throw ValidationError(fmt::format("user trace has {} watch durations for a queue of {}",
                                      env.user.watch_durations.size(), env.queue.size()));
  }
  SessionState s;
  s.buffers.resize(env.queue.size());
  s.started_chunks.assign(env.queue.size(), 0);
  StepOutcome ignored;
  Player{s, env, ignored}.advance(0.0);
  return s;
}

bool is_legal(const SessionState& state, const CompositeAction& action,
              const RecommendationQueue& queue, const SimConfig& config,
              std::size_t ladder_levels) {
  if (const auto* p = std::get_if<Pause>(&action)) {
    return std::find(config.pause_durations_s.begin(), config.pause_durations_s.end(),
                     p->duration_s) != config.pause_durations_s.end();
  }
  const auto& d = std::get<Download>(action);
  const std::size_t window_end =
      std::min(queue.size(), state.current_video + static_cast<std::size_t>(config.lookahead));
  return d.video >= state.current_video && d.video < window_end && d.level < ladder_levels &&
         state.buffers[d.video].size() < queue[d.video].chunk_count();
}

StepOutcome step(SessionState& s, const CompositeAction& action, const SessionEnv& env) {
  if (s.finished) throw StateError("session already finished");
  const std::size_t levels = env.queue[0].chunk_sizes.front().size();
  check_action(s, action, env.queue, env.config, levels);

  StepOutcome out;
  Player player{s, env, out};
  const double start = s.clock_s;

  if (const auto* d = std::get_if<Download>(&action)) {
    const std::size_t chunk = s.buffers[d->video].size();
    const std::int64_t bytes = env.queue[d->video].chunk_size(chunk, d->level);
    const double finish = start + env.trace.transfer_time(start, static_cast<double>(bytes) * 8e-6);
    player.advance(finish);
    s.clock_s = finish;
    s.buffers[d->video].push_back({chunk, d->level, bytes});
    s.downloaded_bytes += bytes;
    s.download_log.push_back({d->video, chunk, d->level, bytes, start, finish});
    if (d->video < s.current_video) {
      // The user swiped past this video while the chunk was in flight.
      s.wasted_bytes += bytes;
      out.newly_wasted_bytes += bytes;
    }
    // The new chunk may unblock a stalled player right away.
    player.advance(finish);
  } else {
    player.advance(start + std::get<Pause>(action).duration_s);
  }

  out.elapsed_s = s.clock_s - start;
  out.terminal = s.finished;
  return out;
}

std::vector<CompositeAction> legal_actions(const SessionState& state,
                                           const RecommendationQueue& queue,
                                           const SimConfig& config, std::size_t ladder_levels) {
  std::vector<CompositeAction> actions;
  for (double d : config.pause_durations_s) actions.emplace_back(Pause{d});
  if (state.finished) return actions;
  const std::size_t window_end =
      std::min(queue.size(), state.current_video + static_cast<std::size_t>(config.lookahead));
  for (std::size_t v = state.current_video; v < window_end; ++v) {
    if (state.buffers[v].size() >= queue[v].chunk_count()) continue;
    for (std::size_t l = 0; l < ladder_levels; ++l) actions.emplace_back(Download{v, l});
  }
  return actions;
}

double buffer_ahead_s(const SessionState& state, const RecommendationQueue& queue,
                      std::size_t video) {
  const Video& v = queue[video];
  const double content =
      std::min(static_cast<double>(state.buffers[video].size()) * v.chunk_duration_s, v.length_s());
  if (video == state.current_video) return std::max(0.0, content - state.playhead_s);
  return video < state.current_video ? 0.0 : content;
}

bool player_waiting(const SessionState& state, const RecommendationQueue& queue) {
  if (state.finished) return false;
  const std::size_t v = state.current_video;
  return state.buffers[v].size() < queue[v].chunk_count() &&
         buffer_ahead_s(state, queue, v) <= kTimeEps;
}

UserTrace sample_watch_durations(const UserTrace& profile, const RecommendationQueue& queue,
                                 Rng& rng) {
  if (profile.watch_durations.size() < queue.size() || queue.size() == 0) {
    throw ValidationError("retention profile is shorter than the queue");
  }
  std::vector<double> fractions;
  fractions.reserve(queue.size());
  for (std::size_t v = 0; v < queue.size(); ++v) {
    fractions.push_back(std::min(1.0, profile.watch_durations[v] / queue[v].length_s()));
  }
  std::sort(fractions.begin(), fractions.end());
  UserTrace out;
  out.watch_durations.reserve(queue.size());
  const double last = static_cast<double>(fractions.size() - 1);
  for (std::size_t v = 0; v < queue.size(); ++v) {
    const double pos = rng.uniform() * last;
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, fractions.size() - 1);
    const double f = fractions[lo] + (pos - static_cast<double>(lo)) * (fractions[hi] - fractions[lo]);
    out.watch_durations.push_back(f * queue[v].length_s());
  }
  return out;
}

RetentionEstimate::RetentionEstimate(const SessionState& state, const RecommendationQueue& queue,
                                     double prior_weight)
    : prior_weight_(prior_weight) {
  fractions_.reserve(state.watched_s.size());
  for (std::size_t v = 0; v < state.watched_s.size(); ++v) {
    fractions_.push_back(state.watched_s[v] / queue[v].length_s());
  }
}

double RetentionEstimate::survival(double fraction) const {
  if (fraction <= 0.0) return 1.0;
  const double prior = std::max(0.0, 1.0 - fraction);
  const double denom = prior_weight_ + static_cast<double>(fractions_.size());
  if (denom <= 0.0) return prior;
  double hits = 0.0;
  for (double f : fractions_) {
    if (f > fraction - kTimeEps) hits += 1.0;
  }
  return (prior_weight_ * prior + hits) / denom;
}

double RetentionEstimate::chunk_start_probability(const SessionState& state,
                                                  const RecommendationQueue& queue,
                                                  std::size_t video, std::size_t chunk) const {
  const Video& v = queue[video];
  const double start = static_cast<double>(chunk) * v.chunk_duration_s;
  if (video < state.current_video) return 0.0;
  if (video > state.current_video) return survival(start / v.length_s());
  if (chunk < state.started_chunks[video] || start <= state.playhead_s + kTimeEps) return 1.0;
  const double watched = survival(state.playhead_s / v.length_s());
  if (watched <= 0.0) return 0.0;
  return std::min(1.0, survival(start / v.length_s()) / watched);
}

double RetentionEstimate::expected_remaining_s(const SessionState& state,
                                               const RecommendationQueue& queue) const {
  if (state.finished) return 0.0;
  const Video& v = queue[state.current_video];
  const double length = v.length_s();
  const double here = survival(state.playhead_s / length);
  if (here <= 0.0) return 0.0;
  // Midpoint rule over chunk-sized segments.
  double total = 0.0;
  double a = state.playhead_s;
  while (a < length - kTimeEps) {
    const double b = std::min(length, (std::floor(a / v.chunk_duration_s + kTimeEps) + 1.0) *
                                          v.chunk_duration_s);
    total += (b - a) * std::min(1.0, survival(0.5 * (a + b) / length) / here);
    a = b;
  }
  return total;
}

double estimate_throughput_mbps(const SessionState& state, int history, double prior_mbps) {
  const auto& log = state.download_log;
  if (log.empty()) return prior_mbps;
  const std::size_t n = std::min(log.size(), static_cast<std::size_t>(history));
  double inv = 0.0;
  for (std::size_t i = log.size() - n; i < log.size(); ++i) inv += 1.0 / log[i].throughput_mbps();
  return static_cast<double>(n) / inv;
}

int observation_dim(const SimConfig& config) {
  return config.throughput_history + config.lookahead + 3 + 4;
}

std::vector<double> observe(const SessionState& state, const RecommendationQueue& queue,
                            const SimConfig& config, const BitrateLadder& ladder,
                            double prior_mbps, const PreferenceParams& prefs) {
  std::vector<double> obs;
  obs.reserve(static_cast<std::size_t>(observation_dim(config)));

  const auto k = static_cast<std::size_t>(config.throughput_history);
  const auto& log = state.download_log;
  for (std::size_t i = 0; i < k; ++i) {
    // Most recent first; missing history filled with the prior.
    const double tp =
        i < log.size() ? log[log.size() - 1 - i].throughput_mbps() : prior_mbps;
    obs.push_back(tp / config.throughput_scale_mbps);
  }

  for (int j = 0; j < config.lookahead; ++j) {
    const std::size_t v = state.current_video + static_cast<std::size_t>(j);
    const double b = (!state.finished && v < queue.size()) ? buffer_ahead_s(state, queue, v) : 0.0;
    obs.push_back(b / config.buffer_scale_s);
  }

  const double last_level =
      state.watch_log.empty() ? 0.0
                              : static_cast<double>(state.watch_log.back().level) /
                                    static_cast<double>(ladder.size() - 1);
  obs.push_back(last_level);

  const RetentionEstimate retention(state, queue, config.retention_prior_weight);
  obs.push_back(retention.expected_remaining_s(state, queue) / config.watch_scale_s);

  bool stalled = false;
  if (!state.finished) {
    const auto v = state.current_video;
    const auto chunk = static_cast<std::size_t>(
        std::floor((state.playhead_s + kTimeEps) / queue[v].chunk_duration_s));
    stalled = state.buffers[v].size() <= chunk;
  }
  obs.push_back(stalled ? 1.0 : 0.0);

  obs.push_back(prefs.alpha);
  obs.push_back(prefs.beta);
  obs.push_back(prefs.gamma);
  // theta is per MB and two orders smaller than the others.
  obs.push_back(prefs.theta * 50.0);
  return obs;
}

void write_event_log_header(std::ostream& out) {
  out << "clock,action,elapsed,rebuffer,swipes,downloaded_bytes,wasted_bytes\n";
}

void write_event_log_row(std::ostream& out, const SessionState& after,
                         const CompositeAction& action, const StepOutcome& outcome) {
  out << fmt::format("{:.6f},{},{:.6f},{:.6f},{},{},{}\n", after.clock_s, describe(action),
                     outcome.elapsed_s, outcome.rebuffer_s, outcome.swipes, after.downloaded_bytes,
                     after.wasted_bytes);
}

}  // namespace feedflow
