#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "feedflow/media.hpp"
#include "feedflow/rng.hpp"
#include "feedflow/traces.hpp"

namespace feedflow {

struct SimConfig {
  std::vector<double> pause_durations_s{0.5, 1.0, 2.0};
  // Number of videos, starting at the current one, that may be prefetched.
  int lookahead = 5;
  // Past downloads feeding the throughput estimate.
  int throughput_history = 5;
  // Observation normalizers.
  double throughput_scale_mbps = 5.0;
  double buffer_scale_s = 10.0;
  double watch_scale_s = 20.0;
  // Pseudo-count of the prior in the retention estimate.
  double retention_prior_weight = 2.0;

  void validate() const;
};

struct Download {
  std::size_t video = 0;
  std::size_t level = 0;
  friend bool operator==(const Download&, const Download&) = default;
};

struct Pause {
  double duration_s = 0.0;
  friend bool operator==(const Pause&, const Pause&) = default;
};

using CompositeAction = std::variant<Download, Pause>;

std::string describe(const CompositeAction& action);

struct BufferedChunk {
  std::size_t chunk = 0;
  std::size_t level = 0;
  std::int64_t bytes = 0;
};

struct WatchedChunk {
  std::size_t video = 0;
  std::size_t chunk = 0;
  std::size_t level = 0;
  // Stall time spent waiting for this chunk.
  double rebuffer_s = 0.0;
};

struct DownloadRecord {
  std::size_t video = 0;
  std::size_t chunk = 0;
  std::size_t level = 0;
  std::int64_t bytes = 0;
  double start_s = 0.0;
  double end_s = 0.0;

  double throughput_mbps() const;
};

struct SessionState {
  double clock_s = 0.0;
  std::size_t current_video = 0;
  // Seconds watched of the current video.
  double playhead_s = 0.0;
  // False until the first chunk of the session starts; waiting before that
  // is startup delay, not rebuffering.
  bool playback_started = false;

  // Chunks are always fetched in order, so buffers[v][i].chunk == i.
  std::vector<std::vector<BufferedChunk>> buffers;
  // Number of chunks of each video whose playback has begun.
  std::vector<std::size_t> started_chunks;

  double rebuffer_total_s = 0.0;
  // Stall accrued for the chunk the player is waiting on right now.
  double pending_stall_s = 0.0;
  std::int64_t downloaded_bytes = 0;
  std::int64_t wasted_bytes = 0;
  std::int64_t played_bytes = 0;

  std::vector<WatchedChunk> watch_log;
  std::vector<DownloadRecord> download_log;
  // Seconds actually watched of each video left so far (observable history).
  std::vector<double> watched_s;
  bool finished = false;

  std::size_t buffered_count(std::size_t video) const { return buffers[video].size(); }
  // Downloaded bytes still in buffers that never started playing.
  std::int64_t unplayed_bytes(std::size_t video) const;
};

struct StepOutcome {
  double elapsed_s = 0.0;
  double rebuffer_s = 0.0;
  int chunks_played = 0;
  int swipes = 0;
  std::int64_t newly_wasted_bytes = 0;
  bool terminal = false;
};

// Everything a session reads but never changes.
struct SessionEnv {
  const NetworkTrace& trace;
  const RecommendationQueue& queue;
  const UserTrace& user;
  const SimConfig& config;

  // min(intended watch, video length).
  double effective_watch_s(std::size_t video) const;
};

// Fresh session at t=0. Videos with zero watch time at the head of the
// queue are skipped immediately.
SessionState initial_state(const SessionEnv& env);

// Applies one decision. Download fetches the next missing chunk of the
// target; Pause idles the downloader. Playback, stalls and swipes advance
// concurrently with either. Throws StateError on a finished session and
// InvalidActionError on an action outside legal_actions().
StepOutcome step(SessionState& state, const CompositeAction& action, const SessionEnv& env);

// Pauses first (config order), then downloads by video then level, limited
// to the lookahead window. Never empty for a live session.
std::vector<CompositeAction> legal_actions(const SessionState& state,
                                           const RecommendationQueue& queue,
                                           const SimConfig& config, std::size_t ladder_levels);

bool is_legal(const SessionState& state, const CompositeAction& action,
              const RecommendationQueue& queue, const SimConfig& config,
              std::size_t ladder_levels);

// Seconds of content buffered ahead of the playhead (current video) or
// from the start (other videos), capped at the video length.
double buffer_ahead_s(const SessionState& state, const RecommendationQueue& queue,
                      std::size_t video);

// True while playback of the current video waits on a chunk that has not
// been downloaded (startup or a stall).
bool player_waiting(const SessionState& state, const RecommendationQueue& queue);

// One watch duration per video, drawn by inverse-CDF sampling from the
// profile's own distribution of watch fractions (linear between order
// statistics). Throws ValidationError if the profile is shorter than the
// queue.
UserTrace sample_watch_durations(const UserTrace& profile, const RecommendationQueue& queue,
                                 Rng& rng);

// Estimate of P(a user watches more than `fraction` of a video), mixing a
// uniform-fraction prior with the watch fractions seen so far this session.
class RetentionEstimate {
 public:
  RetentionEstimate(const SessionState& state, const RecommendationQueue& queue,
                    double prior_weight);

  double survival(double fraction) const;
  // P(playback of `chunk` of `video` begins), conditioned on how far the
  // current video has already been watched.
  double chunk_start_probability(const SessionState& state, const RecommendationQueue& queue,
                                 std::size_t video, std::size_t chunk) const;
  // Expected further watch seconds of the current video.
  double expected_remaining_s(const SessionState& state, const RecommendationQueue& queue) const;

 private:
  std::vector<double> fractions_;
  double prior_weight_;
};

// Harmonic mean of the last `history` download throughputs; `prior_mbps`
// when nothing has been downloaded yet.
double estimate_throughput_mbps(const SessionState& state, int history, double prior_mbps);

int observation_dim(const SimConfig& config);

// Features, in order: last k throughputs (prior-filled), current buffer,
// next lookahead-1 buffers, last played level, expected remaining watch,
// stalled flag, alpha, beta, gamma, theta.
std::vector<double> observe(const SessionState& state, const RecommendationQueue& queue,
                            const SimConfig& config, const BitrateLadder& ladder,
                            double prior_mbps, const PreferenceParams& prefs);

// CSV event log: clock,action,elapsed,rebuffer,swipes,downloaded_bytes,wasted_bytes
void write_event_log_header(std::ostream& out);
void write_event_log_row(std::ostream& out, const SessionState& after,
                         const CompositeAction& action, const StepOutcome& outcome);

}  // namespace feedflow
