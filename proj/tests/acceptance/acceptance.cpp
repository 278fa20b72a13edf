// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <fmt/format.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "feedflow/controller.hpp"
#include "feedflow/dataset.hpp"
#include "feedflow/experiment.hpp"
#include "feedflow/gfn/losses.hpp"
#include "feedflow/gfn/optimizer.hpp"
#include "feedflow/gfn/policy.hpp"
#include "feedflow/objective.hpp"
#include "feedflow/sim.hpp"
#include "fixtures.hpp"
#include "trees.hpp"

using namespace feedflow;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kTbLossLimit = 1e-4;
constexpr double kTvLimit = 0.01;
constexpr double kSamplingBudgetS = 120.0;
constexpr double kGradRelLimit = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kGradientBudgetS = 30.0;
constexpr double kConsistencyLimit = 1e-12;
constexpr double kBandwidthLimitMb = 1e-9;
constexpr double kTelescopeRelLimit = 1e-9;
constexpr double kWinRateLimit = 0.70;
constexpr double kAblationBudgetS = 15.0 * 60.0;

const fs::path kSource{FEEDFLOW_SOURCE_DIR};

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// P(terminal) as a product of edge-flow ratios along its path.
std::vector<double> exact_distribution(const gfn::DecisionTree& tree,
                                       const std::vector<double>& lf) {
  std::vector<double> p(tree.size(), 0.0);
  for (auto n : tree.terminals()) {
    double prob = 1.0;
    for (std::size_t s = n; s != gfn::DecisionTree::kRoot; s = tree.parent(s)) {
      double total = 0.0;
      for (auto sib : tree.children(tree.parent(s))) total += std::exp(lf[tree.head(sib)]);
      prob *= std::exp(lf[tree.head(s)]) / total;
    }
    p[n] = prob;
  }
  return p;
}

// 1. Proportional sampling after trajectory-balance training.
Verdict proportional_sampling() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(101, 1));
  double worst_loss = 0.0, worst_tv = 0.0;
  std::size_t largest = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto tree = fixtures::grown_tree(rng, 2 + rng.below(199));
    std::vector<double> reward(tree.size(), 0.0);
    for (auto n : tree.terminals()) reward[n] = rng.uniform(0.1, 10.0);
    largest = std::max(largest, tree.terminals().size());

    gfn::FlowModel model(gfn::Architecture{{0, tree.head_count()}}, rng.next_u64());
    gfn::AdamOptimizer opt(model.params().size(), {0.05});
    std::vector<gfn::TbItem> batch{{{}, &tree, {}, {}}};
    for (auto n : tree.terminals()) batch[0].log_rewards.push_back(std::log(reward[n]));

    double max_loss = 0.0;
    for (int it = 0; it < 20000; ++it) {
      const auto lf = model.forward({});
      batch[0].trajectories.clear();
      max_loss = 0.0;
      const auto terms = tree.terminals();
      for (std::size_t i = 0; i < terms.size(); ++i) {
        batch[0].trajectories.push_back(gfn::trajectory_to(tree, lf, terms[i]));
        max_loss = std::max(max_loss, gfn::tb_loss(tree, lf, model.log_z(),
                                                    batch[0].trajectories.back(), reward[terms[i]]));
      }
      if (max_loss < kTbLossLimit * 0.1) break;
      if (it == 4000) opt = gfn::AdamOptimizer(model.params().size(), {0.005});
      opt.step(model, gfn::tb_gradient(model, batch).gradient);
    }

    const auto dist = exact_distribution(tree, model.forward({}));
    double total_reward = 0.0;
    for (auto n : tree.terminals()) total_reward += reward[n];
    double tv = 0.0;
    for (auto n : tree.terminals()) tv += std::abs(dist[n] - reward[n] / total_reward);
    tv *= 0.5;
    worst_loss = std::max(worst_loss, max_loss);
    worst_tv = std::max(worst_tv, tv);
  }
  const double elapsed = seconds_since(t0);
  return {worst_loss < kTbLossLimit && worst_tv < kTvLimit && elapsed < kSamplingBudgetS,
          fmt::format("max TB loss {:.2e} (< {:.0e}), max TV {:.2e} (< {}), largest tree {} "
                      "terminals, {:.1f}s (< {:.0f}s)",
                      worst_loss, kTbLossLimit, worst_tv, kTvLimit, largest, elapsed,
                      kSamplingBudgetS)};
}

double relative_error(const gfn::Gradient& analytic, const std::function<double()>& loss,
                      gfn::FlowModel& model) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  const auto add = [&](double a, double n) {
    diff += (a - n) * (a - n);
    na += a * a;
    nn += n * n;
  };
  for (std::size_t p = 0; p < model.params().size(); ++p) {
    const double keep = model.params()[p];
    model.params()[p] = keep + kFdStep;
    const double up = loss();
    model.params()[p] = keep - kFdStep;
    const double down = loss();
    model.params()[p] = keep;
    add(analytic.params[p], (up - down) / (2.0 * kFdStep));
  }
  const double z = model.log_z();
  model.set_log_z(z + kFdStep);
  const double up = loss();
  model.set_log_z(z - kFdStep);
  const double down = loss();
  model.set_log_z(z);
  add(analytic.log_z, (up - down) / (2.0 * kFdStep));
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-300});
}

// 2. Analytic gradients against central finite differences.
Verdict gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(derive_seed(102, 1));
  double worst_tb = 0.0, worst_fm = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const auto tree = fixtures::grown_tree(rng, 2 + rng.below(30));
    const auto rewards = fixtures::random_rewards(tree, rng);
    const std::size_t in = 1 + rng.below(8);
    std::vector<std::size_t> layers{in};
    for (std::size_t h = rng.below(3); h > 0; --h) layers.push_back(2 + rng.below(12));
    layers.push_back(tree.head_count());
    gfn::FlowModel model(gfn::Architecture{layers}, rng.next_u64(), 1.0);
    model.set_log_z(rng.uniform(-2.0, 2.0));

    std::vector<gfn::TbItem> tb;
    std::vector<gfn::FmItem> fm;
    for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) {
      std::vector<double> x(in);
      for (auto& v : x) v = rng.uniform(-1.0, 1.0);
      gfn::TbItem item{x, &tree, {}, {}};
      const auto lf = model.forward(x);
      for (std::size_t k = 0, m = 1 + rng.below(5); k < m; ++k) {
        auto traj = gfn::sample_trajectory(tree, lf, rng);
        item.log_rewards.push_back(std::log(rewards[traj.terminal()]));
        item.trajectories.push_back(std::move(traj));
      }
      tb.push_back(std::move(item));
      gfn::FmItem f{x, &tree, {}, rewards};
      for (std::size_t s = 1; s < tree.size(); ++s) {
        if (rng.bernoulli(0.5)) f.states.push_back(s);
      }
      if (f.states.empty()) f.states.push_back(1);
      fm.push_back(std::move(f));
    }
    worst_tb = std::max(worst_tb, relative_error(gfn::tb_gradient(model, tb).gradient,
                                                 [&] { return gfn::tb_loss(model, tb); }, model));
    worst_fm = std::max(worst_fm, relative_error(gfn::fm_gradient(model, fm).gradient,
                                                 [&] { return gfn::fm_loss(model, fm); }, model));
  }
  const double elapsed = seconds_since(t0);
  return {worst_tb < kGradRelLimit && worst_fm < kGradRelLimit && elapsed < kGradientBudgetS,
          fmt::format("max relative error TB {:.2e}, FM {:.2e} (< {:.0e}), {:.1f}s (< {:.0f}s)",
                      worst_tb, worst_fm, kGradRelLimit, elapsed, kGradientBudgetS)};
}

// 3. Flows that balance every transition give zero FM and TB loss.
Verdict consistency() {
  Rng rng(derive_seed(103, 1));
  double worst_fm = 0.0, worst_tb = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto tree = fixtures::grown_tree(rng, 2 + rng.below(199));
    const auto rewards = fixtures::random_rewards(tree, rng);
    double log_z = 0.0;
    const auto lf = fixtures::consistent_log_flows(tree, rewards, log_z);
    for (std::size_t s = 1; s < tree.size(); ++s) {
      const std::vector<std::size_t> one{s};
      worst_fm = std::max(worst_fm, gfn::fm_loss(tree, lf, one, rewards));
    }
    for (auto n : tree.terminals()) {
      worst_tb = std::max(worst_tb,
                          gfn::tb_loss(tree, lf, log_z, gfn::trajectory_to(tree, lf, n), rewards[n]));
    }
  }
  return {worst_fm <= kConsistencyLimit && worst_tb <= kConsistencyLimit,
          fmt::format("max FM loss {:.2e}, max TB loss {:.2e} (<= {:.0e})", worst_fm, worst_tb,
                      kConsistencyLimit)};
}

// Bytes of chunks in `v` whose playback never began.
std::int64_t unstarted_bytes(const SessionState& s, std::size_t v) {
  std::int64_t b = 0;
  for (std::size_t c = s.started_chunks[v]; c < s.buffers[v].size(); ++c) b += s.buffers[v][c].bytes;
  return b;
}

// 4. Byte conservation and bandwidth cost.
Verdict conservation() {
  Rng rng(derive_seed(104, 1));
  const SimConfig config;
  int violations = 0;
  double worst_bw = 0.0;
  for (int episode = 0; episode < 1000; ++episode) {
    const auto w = fixtures::random_world(rng);
    const SessionEnv env{w.trace, w.queue, w.user, config};
    auto s = initial_state(env);
    while (!s.finished) step(s, fixtures::random_legal_action(s, w, config, rng), env);

    std::int64_t logged = 0;
    for (const auto& d : s.download_log) logged += d.bytes;
    std::int64_t played = 0;
    for (const auto& wc : s.watch_log) played += s.buffers[wc.video][wc.chunk].bytes;
    std::int64_t wasted = 0, residual = 0;
    for (std::size_t v = 0; v < w.queue.size(); ++v) {
      (v < s.current_video ? wasted : residual) += unstarted_bytes(s, v);
    }
    const bool ok = s.downloaded_bytes == logged && played == s.played_bytes &&
                    wasted == s.wasted_bytes && logged == played + wasted + residual;
    if (!ok) ++violations;
    worst_bw = std::max(worst_bw, std::abs(bandwidth_cost_mb(s) - static_cast<double>(logged) / 1e6));
  }
  return {violations == 0 && worst_bw <= kBandwidthLimitMb,
          fmt::format("{} of 1000 episodes break conservation, max bandwidth error {:.2e} MB "
                      "(<= {:.0e})",
                      violations, worst_bw, kBandwidthLimitMb)};
}

double reference_objective(const SessionState& s, const BitrateLadder& ladder,
                           const PreferenceParams& p) {
  double v = -p.beta * s.pending_stall_s - p.theta * static_cast<double>(s.downloaded_bytes) / 1e6;
  for (std::size_t n = 0; n < s.watch_log.size(); ++n) {
    const double q = ladder.kbps(s.watch_log[n].level) / 1000.0;
    v += p.alpha * q - p.beta * s.watch_log[n].rebuffer_s;
    if (n > 0) v -= p.gamma * std::abs(q - ladder.kbps(s.watch_log[n - 1].level) / 1000.0);
  }
  return v;
}

// 5. Per-step deltas telescope to the episode objective.
Verdict telescoping() {
  Rng rng(derive_seed(105, 1));
  const SimConfig config;
  const QualityMap quality;
  const auto& ladder = fixtures::default_ladder();
  double worst = 0.0;
  for (int episode = 0; episode < 1000; ++episode) {
    const auto w = fixtures::random_world(rng);
    const SessionEnv env{w.trace, w.queue, w.user, config};
    auto s = initial_state(env);
    auto prev = session_metrics(s, ladder, w.prefs, quality);
    double sum = prev.objective;
    while (!s.finished) {
      step(s, fixtures::random_legal_action(s, w, config, rng), env);
      const auto m = session_metrics(s, ladder, w.prefs, quality);
      sum += step_objective_delta(prev, m);
      prev = m;
    }
    const double want = reference_objective(s, ladder, w.prefs);
    worst = std::max(worst, std::abs(sum - want) / std::max(1.0, std::abs(want)));
  }
  return {worst <= kTelescopeRelLimit,
          fmt::format("max relative gap {:.2e} (<= {:.0e})", worst, kTelescopeRelLimit)};
}

struct AblationRuns {
  std::map<std::string, std::vector<MetricsRow>> rows;
  double seconds = 0.0;
};

const AblationRuns& ablation_runs() {
  static const AblationRuns runs = [] {
    const auto t0 = std::chrono::steady_clock::now();
    auto config = load_experiment_config(kSource / "configs" / "demo.json");
    const auto dataset = load_dataset(config.dataset);
    attach_dataset(config, dataset);
    const auto scenarios = evaluation_scenarios(dataset, config);
    const auto suite = training_scenarios(dataset, config);
    AblationRuns out;
    for (const std::string name : {"gfn-multi", "gfn-single", "gfn-fixed"}) {
      const auto policy = parse_policy(name, config, dataset);
      for (auto seed : config.seeds) {
        const auto trained = train_policy(policy, config, suite, seed);
        auto rows = evaluate_policy(name, policy, &trained.model, config, scenarios, seed);
        auto& dst = out.rows[name];
        dst.insert(dst.end(), rows.begin(), rows.end());
      }
    }
    out.seconds = seconds_since(t0);
    return out;
  }();
  return runs;
}

struct Paired {
  double mean_a = 0.0, mean_b = 0.0, win_rate = 0.0;
  std::size_t pairs = 0;
};

Paired pair_up(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  std::map<std::pair<std::string, std::uint64_t>, double> other;
  for (const auto& r : b) other[{r.scenario_id, r.seed}] = r.objective;
  Paired p;
  std::size_t wins = 0;
  for (const auto& r : a) {
    const auto it = other.find({r.scenario_id, r.seed});
    if (it == other.end()) continue;
    ++p.pairs;
    p.mean_a += r.objective;
    p.mean_b += it->second;
    if (r.objective > it->second) ++wins;
  }
  if (p.pairs > 0) {
    p.mean_a /= static_cast<double>(p.pairs);
    p.mean_b /= static_cast<double>(p.pairs);
    p.win_rate = static_cast<double>(wins) / static_cast<double>(p.pairs);
  }
  return p;
}

// 6. Multi-candidate beats single-candidate.
Verdict multi_beats_single() {
  const auto& runs = ablation_runs();
  const auto p = pair_up(runs.rows.at("gfn-multi"), runs.rows.at("gfn-single"));
  return {p.pairs == 180 && p.mean_a > p.mean_b && p.win_rate >= kWinRateLimit &&
              runs.seconds < kAblationBudgetS,
          fmt::format("mean objective {:.3f} vs {:.3f}, wins {:.1f}% of {} pairs (>= {:.0f}%), "
                      "suite {:.1f}s (< {:.0f}s)",
                      p.mean_a, p.mean_b, 100.0 * p.win_rate, p.pairs, 100.0 * kWinRateLimit,
                      runs.seconds, kAblationBudgetS)};
}

// 7. True preferences beat fixed preferences.
Verdict personalized_beats_fixed() {
  const auto& runs = ablation_runs();
  const auto p = pair_up(runs.rows.at("gfn-multi"), runs.rows.at("gfn-fixed"));
  return {p.pairs == 180 && p.mean_a > p.mean_b && runs.seconds < kAblationBudgetS,
          fmt::format("mean objective {:.3f} vs {:.3f} over {} pairs (wins {:.1f}%)", p.mean_a,
                      p.mean_b, p.pairs, 100.0 * p.win_rate)};
}

// 8. The rule never stalls when bandwidth covers the top bitrate.
Verdict baseline_sanity() {
  auto config = load_experiment_config(kSource / "configs" / "demo.json");
  const auto dataset = load_dataset(config.dataset);
  attach_dataset(config, dataset);
  std::vector<Scenario> scenarios = evaluation_scenarios(dataset, config);
  const auto train = training_scenarios(dataset, config);
  scenarios.insert(scenarios.end(), train.begin(), train.end());
  const double top_mbps = config.controller.ladder.top_kbps() / 1000.0;
  int stalled = 0;
  double worst = 0.0;
  for (auto s : scenarios) {
    s.trace = NetworkTrace::constant(top_mbps);
    const auto r = run_episode(RuleBased{config.rule_based}, nullptr, nullptr, s,
                               config.controller, false, 1);
    const double rebuf = r.metrics.qoe_terms.rebuffer_sum_s;
    if (rebuf != 0.0) ++stalled;
    worst = std::max(worst, rebuf);
  }
  return {stalled == 0,
          fmt::format("{} of {} scenarios rebuffer at {:.1f} Mbps (max {:.3f}s)", stalled,
                      scenarios.size(), top_mbps, worst)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + FEEDFLOW_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// 9. Two full pipeline runs give byte-identical metrics.
Verdict determinism() {
  const auto root = fs::temp_directory_path() / "feedflow-acceptance-determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  std::vector<std::string> metrics, reports;
  bool commands_ok = true;
  for (const std::string run : {"first", "second"}) {
    const auto dir = root / run;
    const auto data = dir / "data";
    commands_ok &= run_cli("gen-dataset --config " + (kSource / "configs" / "dataset.json").string() +
                           " --seed 2024 --out " + data.string()) == 0;
    std::string config = slurp(kSource / "configs" / "demo.json");
    const auto at = config.find("../data/demo");
    config.replace(at, std::string("../data/demo").size(), data.string());
    std::ofstream(dir / "config.json") << config;
    commands_ok &= run_cli("evaluate --config " + (dir / "config.json").string() + " --out " +
                           (dir / "out").string()) == 0;
    commands_ok &= run_cli("report --out " + (dir / "out").string()) == 0;
    metrics.push_back(slurp(dir / "out" / "metrics.csv"));
    reports.push_back(slurp(dir / "out" / "report.md"));
  }
  const bool same = !metrics[0].empty() && metrics[0] == metrics[1] && reports[0] == reports[1];
  fs::remove_all(root);
  return {commands_ok && same,
          fmt::format("pipeline exit codes {}, metrics.csv {} ({} bytes), report.md {}",
                      commands_ok ? "all 0" : "non-zero", same ? "identical" : "differ",
                      metrics[0].size(), reports[0] == reports[1] ? "identical" : "differ")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"proportional sampling after TB training", proportional_sampling},
      {"gradients match finite differences", gradient_oracle},
      {"balanced flows give zero FM and TB loss", consistency},
      {"simulator byte conservation", conservation},
      {"objective deltas telescope", telescoping},
      {"multi-candidate beats single-candidate", multi_beats_single},
      {"personalized beats fixed preferences", personalized_beats_fixed},
      {"rule-based never stalls at top-bitrate bandwidth", baseline_sanity},
      {"pipeline output is byte-identical across runs", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failures;
    fmt::print("[{}] {}. {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, v.detail);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
