#include "feedflow/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "feedflow/csv.hpp"
#include "feedflow/errors.hpp"
#include "feedflow/rng.hpp"

namespace feedflow {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 1u << 20;
constexpr std::uint64_t kEvalStream = 1u << 30;
constexpr std::uint64_t kRetentionStream = 7;

// The scenario an episode actually plays.
Scenario episode_scenario(const Scenario& s, const ExperimentConfig& config,
                          std::uint64_t episode_seed) {
  Scenario out = s;
  if (config.stochastic_retention) {
    Rng rng(derive_seed(episode_seed, kRetentionStream));
    out.user = sample_watch_durations(s.user, s.queue, rng);
  }
  return out;
}

PreferenceParams prefs_from(const json& j) {
  PreferenceParams p;
  p.alpha = j.at("alpha").get<double>();
  p.beta = j.at("beta").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.theta = j.at("theta").get<double>();
  return p;
}

const std::vector<BandwidthClass>& all_classes() {
  static const std::vector<BandwidthClass> classes{BandwidthClass::kLow, BandwidthClass::kMedium,
                                                   BandwidthClass::kHigh};
  return classes;
}

RecommendationQueue rotated_queue(const std::vector<Video>& videos, std::size_t offset) {
  RecommendationQueue q;
  q.videos.reserve(videos.size());
  for (std::size_t i = 0; i < videos.size(); ++i) {
    q.videos.push_back(videos[(i + offset) % videos.size()]);
  }
  return q;
}

void require_pools(const Dataset& dataset) {
  if (dataset.videos.empty()) throw ValidationError("dataset has no videos");
  if (dataset.users.empty()) throw ValidationError("dataset has no users");
  if (dataset.prefs.size() != dataset.users.size()) {
    throw ValidationError("dataset preference and user counts differ");
  }
}

Scenario make_scenario(std::string id, const NamedTrace& trace, const Dataset& dataset,
                       std::size_t user, std::size_t rotation) {
  return Scenario{std::move(id),
                  trace.cls,
                  trace.trace,
                  rotated_queue(dataset.videos, rotation),
                  dataset.users[user % dataset.users.size()],
                  dataset.prefs[user % dataset.prefs.size()]};
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

std::string fixed(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

void ExperimentConfig::validate() const {
  if (policies.empty()) throw ConfigError("policy list is empty");
  if (seeds.empty()) throw ConfigError("seed list is empty");
  for (const auto& [cls, n] : scenarios_per_class) {
    if (n < 0) throw ConfigError(fmt::format("scenario count for {} is negative", to_string(cls)));
  }
  if (train_scenarios <= 0) throw ConfigError("train_scenarios must be positive");
  if (train_episodes < 0) throw ConfigError("train_episodes must be non-negative");
  if (k < 2) throw ConfigError("k must be at least 2");
  if (!(rebuffer_budget_s > 0.0)) throw ConfigError("rebuffer_budget_s must be positive");
  if (!(controller.tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(controller.adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
  for (const auto& name : policies) {
    if (name != "gfn-multi" && name != "gfn-single" && name != "gfn-fixed" &&
        name != "rule-based") {
      throw ConfigError("unknown policy '" + name + "'");
    }
  }
  if (fixed_prefs) fixed_prefs->validate();
  controller.sim.validate();
}

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("experiment config: ") + e.what());
  }
  ExperimentConfig c;
  try {
    if (!j.contains("dataset")) throw ConfigError("experiment config needs a 'dataset' path");
    std::filesystem::path dataset = j.at("dataset").get<std::string>();
    c.dataset = dataset.is_relative() && !base_dir.empty() ? base_dir / dataset : dataset;
    c.policies = j.value("policies", c.policies);
    if (j.contains("scenarios_per_class")) {
      c.scenarios_per_class.clear();
      for (const auto& [name, n] : j.at("scenarios_per_class").items()) {
        c.scenarios_per_class[parse_bandwidth_class(name)] = n.get<int>();
      }
    }
    c.train_scenarios = j.value("train_scenarios", c.train_scenarios);
    c.seeds = j.value("seeds", c.seeds);
    c.train_episodes = j.value("train_episodes", c.train_episodes);
    c.hidden = j.value("hidden", c.hidden);
    c.k = j.value("k", c.k);
    if (j.contains("fixed_prefs")) c.fixed_prefs = prefs_from(j.at("fixed_prefs"));
    if (j.contains("rule_based")) {
      const auto& r = j.at("rule_based");
      c.rule_based.buffer_target_s = r.value("buffer_target_s", c.rule_based.buffer_target_s);
      c.rule_based.next_target_s = r.value("next_target_s", c.rule_based.next_target_s);
      c.rule_based.reserve_s = r.value("reserve_s", c.rule_based.reserve_s);
      c.rule_based.safety_factor = r.value("safety_factor", c.rule_based.safety_factor);
    }
    c.rebuffer_budget_s = j.value("rebuffer_budget_s", c.rebuffer_budget_s);
    c.threads = j.value("threads", c.threads);
    c.stochastic_retention = j.value("stochastic_retention", c.stochastic_retention);

    auto& ctrl = c.controller;
    ctrl.tau = j.value("tau", ctrl.tau);
    ctrl.per_candidate_reward = j.value("per_candidate_reward", ctrl.per_candidate_reward);
    ctrl.buffer_value_scoring = j.value("buffer_value_scoring", ctrl.buffer_value_scoring);
    ctrl.adam.learning_rate = j.value("learning_rate", ctrl.adam.learning_rate);
    if (j.contains("quality")) {
      ctrl.quality = QualityMap(parse_quality_mode(j.at("quality").get<std::string>()),
                                ctrl.quality.min_kbps());
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      ctrl.sim.pause_durations_s = s.value("pause_durations_s", ctrl.sim.pause_durations_s);
      ctrl.sim.lookahead = s.value("lookahead", ctrl.sim.lookahead);
      ctrl.sim.throughput_history = s.value("throughput_history", ctrl.sim.throughput_history);
      ctrl.sim.retention_prior_weight =
          s.value("retention_prior_weight", ctrl.sim.retention_prior_weight);
    }
    ctrl.max_steps = j.value("max_steps", ctrl.max_steps);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_experiment_config(text, path.parent_path());
}

PreferenceParams default_fixed_prefs(const GeneratorConfig& generator) {
  return {generator.alpha.midpoint(), generator.beta.midpoint(), generator.gamma.midpoint(),
          generator.theta.midpoint()};
}

void attach_dataset(ExperimentConfig& config, const Dataset& dataset) {
  config.controller.ladder = dataset.ladder;
  config.controller.quality =
      QualityMap(config.controller.quality.mode(), dataset.ladder.lowest_kbps());
  if (!config.fixed_prefs) config.fixed_prefs = default_fixed_prefs(dataset.config);
}

PolicyKind parse_policy(const std::string& name, const ExperimentConfig& config,
                        const Dataset& dataset) {
  if (name == "gfn-multi") return GfnMulti{config.k};
  if (name == "gfn-single") return GfnSingle{};
  if (name == "gfn-fixed") {
    return GfnFixedPref{config.fixed_prefs.value_or(default_fixed_prefs(dataset.config)), config.k};
  }
  if (name == "rule-based") return RuleBased{config.rule_based};
  throw ConfigError("unknown policy '" + name + "'");
}

std::vector<Scenario> evaluation_scenarios(const Dataset& dataset, const ExperimentConfig& config) {
  require_pools(dataset);
  std::vector<Scenario> out;
  for (std::size_t ci = 0; ci < all_classes().size(); ++ci) {
    const auto cls = all_classes()[ci];
    const auto it = config.scenarios_per_class.find(cls);
    const int n = it == config.scenarios_per_class.end() ? 0 : it->second;
    if (n == 0) continue;
    const auto traces = dataset.traces_of(cls);
    if (traces.empty()) {
      throw ValidationError(fmt::format("dataset has no {} traces", to_string(cls)));
    }
    for (int i = 0; i < n; ++i) {
      const auto u = static_cast<std::size_t>(i) + 3 * ci;
      const auto rot = 7 * static_cast<std::size_t>(i) + 5 * ci;
      out.push_back(make_scenario(fmt::format("{}-{:02}", lower(to_string(cls)), i),
                                  *traces[static_cast<std::size_t>(i) % traces.size()], dataset, u,
                                  rot));
    }
  }
  return out;
}

std::vector<Scenario> training_scenarios(const Dataset& dataset, const ExperimentConfig& config) {
  require_pools(dataset);
  std::vector<BandwidthClass> present;
  for (auto cls : all_classes()) {
    if (!dataset.traces_of(cls).empty()) present.push_back(cls);
  }
  if (present.empty()) throw ValidationError("dataset has no traces");
  std::vector<Scenario> out;
  for (int i = 0; i < config.train_scenarios; ++i) {
    const auto ci = static_cast<std::size_t>(i) % present.size();
    const auto j = static_cast<std::size_t>(i) / present.size();
    const auto traces = dataset.traces_of(present[ci]);
    out.push_back(make_scenario(fmt::format("train-{:02}", i), *traces[(j + 2) % traces.size()],
                                dataset, 3 * j + ci + 1, 11 * j + 3 + ci));
  }
  return out;
}

TrainedModel train_policy(const PolicyKind& policy, const ExperimentConfig& config,
                          std::span<const Scenario> suite, std::uint64_t seed) {
  if (!uses_model(policy)) throw ConfigError(policy_label(policy) + " has nothing to train");
  if (suite.empty()) throw ValidationError("training suite is empty");
  const auto arch = controller_architecture(config.controller, config.hidden);
  TrainedModel out{gfn::FlowModel(arch, derive_seed(seed, kInitStream)), {}};
  gfn::AdamOptimizer optimizer(arch.param_count(), config.controller.adam);
  for (int e = 0; e < config.train_episodes; ++e) {
    const auto episode_seed = derive_seed(seed, kTrainStream + static_cast<std::uint64_t>(e));
    const auto scenario =
        episode_scenario(suite[static_cast<std::size_t>(e) % suite.size()], config, episode_seed);
    const auto result = run_episode(policy, &out.model, &optimizer, scenario, config.controller,
                                    true, episode_seed);
    out.curve.push_back({e, scenario.id, result.training->mean_tb_loss,
                         result.training->mean_log_reward, result.metrics.objective});
  }
  return out;
}

void write_loss_curve(std::ostream& out, std::span<const LossPoint> curve) {
  out << "episode,scenario_id,mean_tb_loss,mean_log_reward,objective\n";
  for (const auto& p : curve) {
    out << fmt::format("{},{},{:.9g},{:.6f},{:.6f}\n", p.episode, p.scenario_id, p.mean_tb_loss,
                       p.mean_log_reward, p.objective);
  }
}

std::vector<MetricsRow> evaluate_policy(const std::string& name, const PolicyKind& policy,
                                        const gfn::FlowModel* model,
                                        const ExperimentConfig& config,
                                        std::span<const Scenario> scenarios, std::uint64_t seed) {
  if (uses_model(policy) && model == nullptr) {
    throw ConfigError(name + " needs a trained model");
  }
  std::vector<MetricsRow> rows(scenarios.size());
  parallel_for(scenarios.size(), config.threads, [&](std::size_t i) {
    const auto episode_seed = derive_seed(seed, kEvalStream + i);
    const auto s = episode_scenario(scenarios[i], config, episode_seed);
    std::optional<gfn::FlowModel> local;
    if (model) local = *model;
    const auto result = run_episode(policy, local ? &*local : nullptr, nullptr, s,
                                    config.controller, false, episode_seed);
    const auto bounds = qoe_bounds(result.watched_chunks, config.controller.ladder, s.prefs,
                                   config.controller.quality, config.rebuffer_budget_s);
    const auto& m = result.metrics;
    rows[i] = {name,
               s.cls,
               s.id,
               seed,
               normalize_qoe(m.qoe_raw, bounds),
               m.qoe_raw,
               m.qoe_terms.rebuffer_sum_s,
               m.bandwidth_mb,
               100.0 * m.wastage_fraction,
               m.objective};
  });
  return rows;
}

void write_metrics(std::ostream& out, std::span<const MetricsRow> rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.policy << ',' << to_string(r.cls) << ',' << r.scenario_id << ',' << r.seed << ','
        << fixed(r.qoe_norm) << ',' << fixed(r.qoe_raw) << ',' << fixed(r.rebuf_s) << ','
        << fixed(r.bw_mb) << ',' << fixed(r.wastage_pct) << ',' << fixed(r.objective) << '\n';
  }
}

void write_metrics(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_metrics(out, rows);
  if (!out) throw Error("write failed for " + path.string());
}

bool is_metrics_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::string first;
  if (!in || !std::getline(in, first)) return false;
  first.erase(std::remove_if(first.begin(), first.end(),
                             [](char ch) { return ch == ' ' || ch == '\r'; }),
              first.end());
  return first == kMetricsHeader;
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  if (!is_metrics_file(path)) throw ParseError(path.string() + " is not a metrics CSV");
  const auto table = read_csv(path);
  const auto c_policy = table.column("policy");
  const auto c_class = table.column("class");
  const auto c_id = table.column("scenario_id");
  const auto c_seed = table.column("seed");
  const auto c_norm = table.column("qoe_norm");
  const auto c_raw = table.column("qoe_raw");
  const auto c_rebuf = table.column("rebuf_s");
  const auto c_bw = table.column("bw_mb");
  const auto c_waste = table.column("wastage_pct");
  const auto c_obj = table.column("objective");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& r = table.rows[i];
    const std::size_t line = i + 2;
    MetricsRow m;
    m.policy = r.at(c_policy);
    try {
      m.cls = parse_bandwidth_class(r.at(c_class));
    } catch (const Error& e) {
      throw ParseError(e.what(), line);
    }
    m.scenario_id = r.at(c_id);
    const auto seed = parse_csv_int(r.at(c_seed), line);
    if (seed < 0) throw ParseError("negative seed", line);
    m.seed = static_cast<std::uint64_t>(seed);
    m.qoe_norm = parse_csv_double(r.at(c_norm), line);
    m.qoe_raw = parse_csv_double(r.at(c_raw), line);
    m.rebuf_s = parse_csv_double(r.at(c_rebuf), line);
    m.bw_mb = parse_csv_double(r.at(c_bw), line);
    m.wastage_pct = parse_csv_double(r.at(c_waste), line);
    m.objective = parse_csv_double(r.at(c_obj), line);
    rows.push_back(std::move(m));
  }
  return rows;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace feedflow
