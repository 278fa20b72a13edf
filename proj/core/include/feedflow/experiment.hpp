#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "feedflow/controller.hpp"
#include "feedflow/dataset.hpp"

namespace feedflow {

struct ExperimentConfig {
  // Dataset directory (the one holding manifest.json). Relative paths in a
  // config file resolve against the file's directory.
  std::filesystem::path dataset;
  // Names accepted by parse_policy.
  std::vector<std::string> policies{"gfn-multi", "gfn-single", "gfn-fixed", "rule-based"};
  std::map<BandwidthClass, int> scenarios_per_class{
      {BandwidthClass::kLow, 20}, {BandwidthClass::kMedium, 20}, {BandwidthClass::kHigh, 20}};
  int train_scenarios = 20;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int train_episodes = 60;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t k = 10;
  // Preferences seen by gfn-fixed; unset means the midpoints of the
  // dataset's preference ranges.
  std::optional<PreferenceParams> fixed_prefs;
  RuleBasedParams rule_based;
  // Lower QoE normalization bound is -beta * this many stall seconds.
  double rebuffer_budget_s = 30.0;
  // Resample each episode's watch durations from the user's retention
  // curve instead of replaying them.
  bool stochastic_retention = false;
  // 0 uses every hardware thread.
  unsigned threads = 0;
  ControllerConfig controller;

  // Throws ConfigError on empty seed/policy lists, unknown policies,
  // non-positive counts, and anything the controller rejects.
  void validate() const;
};

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

PreferenceParams default_fixed_prefs(const GeneratorConfig& generator);

// Copies the dataset's ladder into the controller config (and the quality
// map's reference bitrate) and fills unset fixed preferences.
void attach_dataset(ExperimentConfig& config, const Dataset& dataset);

// gfn-multi, gfn-single, gfn-fixed, rule-based. Throws ConfigError.
PolicyKind parse_policy(const std::string& name, const ExperimentConfig& config,
                        const Dataset& dataset);

// Evaluation suite: scenarios_per_class per class, ids like "medium-07".
std::vector<Scenario> evaluation_scenarios(const Dataset& dataset, const ExperimentConfig& config);
// Fixed training suite drawn from the same pools with different pairings.
std::vector<Scenario> training_scenarios(const Dataset& dataset, const ExperimentConfig& config);

struct LossPoint {
  int episode = 0;
  std::string scenario_id;
  double mean_tb_loss = 0.0;
  double mean_log_reward = 0.0;
  double objective = 0.0;
};

struct TrainedModel {
  gfn::FlowModel model;
  std::vector<LossPoint> curve;
};

// Trains one model for `policy` on the training suite, sequentially.
TrainedModel train_policy(const PolicyKind& policy, const ExperimentConfig& config,
                          std::span<const Scenario> suite, std::uint64_t seed);

void write_loss_curve(std::ostream& out, std::span<const LossPoint> curve);

struct MetricsRow {
  std::string policy;
  BandwidthClass cls = BandwidthClass::kLow;
  std::string scenario_id;
  std::uint64_t seed = 0;
  double qoe_norm = 0.0;
  double qoe_raw = 0.0;
  double rebuf_s = 0.0;
  double bw_mb = 0.0;
  double wastage_pct = 0.0;
  double objective = 0.0;
};

// Runs every scenario once (in parallel) with per-scenario seeds derived
// from `seed`. Rows come back in scenario order.
std::vector<MetricsRow> evaluate_policy(const std::string& name, const PolicyKind& policy,
                                        const gfn::FlowModel* model,
                                        const ExperimentConfig& config,
                                        std::span<const Scenario> scenarios, std::uint64_t seed);

inline constexpr std::string_view kMetricsHeader =
    "policy,class,scenario_id,seed,qoe_norm,qoe_raw,rebuf_s,bw_mb,wastage_pct,objective";

void write_metrics(std::ostream& out, std::span<const MetricsRow> rows);
void write_metrics(const std::filesystem::path& path, std::span<const MetricsRow> rows);
// Throws ParseError unless the file carries the metrics header.
std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);
bool is_metrics_file(const std::filesystem::path& path);

// Runs `fn(i)` for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). The first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace feedflow
