#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "feedflow/media.hpp"
#include "feedflow/traces.hpp"

namespace feedflow {

struct Range {
  double min = 0.0;
  double max = 0.0;

  double midpoint() const { return 0.5 * (min + max); }
  bool contains(double x) const { return x >= min && x <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

// Knobs of the synthetic generators. Every range is [min, max] and sampled
// uniformly unless noted.
struct GeneratorConfig {
  // Network traces: an AR(1) process in log-bandwidth, rescaled so the
  // time-weighted mean hits a target drawn from the class range.
  std::vector<BandwidthClass> classes{BandwidthClass::kLow, BandwidthClass::kMedium,
                                      BandwidthClass::kHigh};
  int traces_per_class = 5;
  double trace_duration_s = 600.0;
  double trace_step_s = 1.0;
  double log_volatility = 0.35;
  double persistence = 0.9;
  Range low_mean_mbps{0.5, 1.4};
  Range medium_mean_mbps{1.6, 2.9};
  Range high_mean_mbps{3.2, 6.0};

  // Videos.
  int num_videos = 20;
  Range video_length_s{8.0, 30.0};
  std::vector<double> ladder_kbps{500.0, 1000.0, 1500.0, 2500.0};
  double chunk_duration_s = 2.0;
  Range size_noise{0.9, 1.1};

  // Users: watch time per queue position is a quick swipe with
  // probability quick_swipe_prob, a full watch with probability
  // full_watch_prob, otherwise a partial watch.
  int num_users = 10;
  double quick_swipe_prob = 0.3;
  Range quick_swipe_s{2.0, 5.0};
  double full_watch_prob = 0.3;
  Range partial_watch_s{5.0, 24.0};

  // Preferences.
  Range alpha{0.5, 2.0};
  Range beta{0.5, 2.0};
  Range gamma{0.25, 1.0};
  Range theta{0.005, 0.02};

  const Range& class_mean_range(BandwidthClass cls) const;

  // Throws ConfigError on inverted ranges, non-positive counts, or class
  // mean ranges that straddle a classification threshold.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

GeneratorConfig parse_generator_config(std::string_view json_text);
std::string generator_config_to_json(const GeneratorConfig& config);

struct NamedTrace {
  std::string name;
  BandwidthClass cls = BandwidthClass::kLow;
  NetworkTrace trace;
};

struct Dataset {
  GeneratorConfig config;
  std::uint64_t seed = 0;
  BitrateLadder ladder{std::vector<double>{500.0, 1000.0}};
  double chunk_duration_s = 2.0;
  std::vector<NamedTrace> traces;
  std::vector<Video> videos;
  std::vector<UserTrace> users;
  std::vector<PreferenceParams> prefs;

  std::vector<const NamedTrace*> traces_of(BandwidthClass cls) const;
};

// Deterministic for a fixed (config, seed).
Dataset synthesize_dataset(const GeneratorConfig& config, std::uint64_t seed);

// Directory layout: network/<name>.trace, videos.csv, users.csv, prefs.csv,
// manifest.json. Existing files are overwritten.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace feedflow
