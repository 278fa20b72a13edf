#pragma once

// Small worlds shared by the unit and acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "feedflow/media.hpp"
#include "feedflow/objective.hpp"
#include "feedflow/rng.hpp"
#include "feedflow/sim.hpp"
#include "feedflow/traces.hpp"

namespace feedflow::fixtures {

inline const BitrateLadder& default_ladder() {
  static const BitrateLadder ladder(std::vector<double>{500.0, 1000.0, 1500.0, 2500.0});
  return ladder;
}

// Every chunk of every level sized exactly bitrate * duration / 8.
inline Video exact_video(std::string id, std::size_t chunks, double chunk_s = 2.0,
                         const BitrateLadder& ladder = default_ladder()) {
  Video v{std::move(id), chunk_s, {}};
  for (std::size_t c = 0; c < chunks; ++c) {
    std::vector<std::int64_t> sizes;
    for (double kbps : ladder.levels()) {
      sizes.push_back(static_cast<std::int64_t>(kbps * 1000.0 * chunk_s / 8.0));
    }
    v.chunk_sizes.push_back(std::move(sizes));
  }
  return v;
}

// Same size at every level.
inline Video flat_video(std::string id, std::size_t chunks, std::int64_t bytes,
                        std::size_t levels = 4, double chunk_s = 2.0) {
  Video v{std::move(id), chunk_s, {}};
  for (std::size_t c = 0; c < chunks; ++c) {
    v.chunk_sizes.emplace_back(levels, bytes);
  }
  return v;
}

struct World {
  NetworkTrace trace;
  RecommendationQueue queue;
  UserTrace user;
  PreferenceParams prefs;
};

// A random but valid world: a bumpy trace, 2-8 videos with noisy chunk
// sizes, watch times from instant swipes to past the end.
inline World random_world(Rng& rng, const BitrateLadder& ladder = default_ladder()) {
  std::vector<BandwidthSample> samples;
  double t = 0.0;
  const int n_samples = 1 + static_cast<int>(rng.below(30));
  for (int i = 0; i < n_samples; ++i) {
    samples.push_back({t, rng.uniform(0.2, 6.0)});
    t += rng.uniform(0.3, 5.0);
  }
  World w{NetworkTrace(std::move(samples)), {}, {}, {}};
  const std::size_t n_videos = 2 + rng.below(7);
  for (std::size_t v = 0; v < n_videos; ++v) {
    const double chunk_s = rng.bernoulli(0.5) ? 2.0 : rng.uniform(0.5, 3.0);
    Video video{"v" + std::to_string(v), chunk_s, {}};
    const std::size_t chunks = 1 + rng.below(8);
    for (std::size_t c = 0; c < chunks; ++c) {
      std::vector<std::int64_t> sizes;
      std::int64_t prev = 1;
      for (double kbps : ladder.levels()) {
        auto s = static_cast<std::int64_t>(kbps * 1000.0 * chunk_s / 8.0 * rng.uniform(0.9, 1.1));
        prev = std::max(prev, s);
        sizes.push_back(prev);
      }
      video.chunk_sizes.push_back(std::move(sizes));
    }
    const double roll = rng.uniform();
    const double watch = roll < 0.1   ? 0.0
                         : roll < 0.3 ? video.length_s() + 5.0
                                      : rng.uniform(0.0, video.length_s());
    w.user.watch_durations.push_back(watch);
    w.queue.videos.push_back(std::move(video));
  }
  w.prefs = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.25, 1.0),
             rng.uniform(0.005, 0.02)};
  return w;
}

inline CompositeAction random_legal_action(const SessionState& state, const World& w,
                                           const SimConfig& config, Rng& rng) {
  const auto actions =
      legal_actions(state, w.queue, config, w.queue[0].chunk_sizes.front().size());
  // Lean towards downloads so episodes do not idle for long.
  std::vector<CompositeAction> downloads;
  for (const auto& a : actions) {
    if (std::holds_alternative<Download>(a)) downloads.push_back(a);
  }
  if (!downloads.empty() && rng.bernoulli(0.8)) return downloads[rng.below(downloads.size())];
  return actions[rng.below(actions.size())];
}

}  // namespace feedflow::fixtures
