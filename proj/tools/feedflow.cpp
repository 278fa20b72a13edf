// feedflow: dataset generation, training, evaluation and reporting.
//
// Exit status: 0 success, 1 usage error, 2 invalid input, 3 runtime failure.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "feedflow/dataset.hpp"
#include "feedflow/errors.hpp"
#include "feedflow/experiment.hpp"
#include "feedflow/gfn/checkpoint.hpp"
#include "feedflow/report.hpp"

namespace fs = std::filesystem;
using namespace feedflow;

namespace {

enum Exit { kOk = 0, kUsage = 1, kInvalid = 2, kFailure = 3 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string in;
  std::string policy;
  std::string cls;
};

// Files written by the running command; removed again unless commit() runs.
class Outputs {
 public:
  ~Outputs() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = files_.rbegin(); it != files_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);  // only if empty
  }

  void make_dir(const fs::path& dir) {
    std::vector<fs::path> created;
    for (auto p = dir; !p.empty() && !fs::exists(p); p = p.parent_path()) created.push_back(p);
    fs::create_directories(dir);
    dirs_.insert(dirs_.end(), created.rbegin(), created.rend());
  }

  const fs::path& add(const fs::path& file) {
    files_.push_back(file);
    return files_.back();
  }

  template <class Fn>
  void write(const fs::path& file, Fn&& fn) {
    add(file);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error("cannot write " + file.string());
    fn(out);
    if (!out) throw Error("write failed for " + file.string());
  }

  void commit() { committed_ = true; }

 private:
  std::vector<fs::path> files_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

void log(const std::string& msg) { std::cerr << msg << '\n'; }

ExperimentConfig experiment_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  auto config = load_experiment_config(o.config);
  if (o.seed) config.seeds = {*o.seed};
  if (!o.policy.empty()) config.policies = {o.policy};
  if (!o.cls.empty()) {
    const auto keep = parse_bandwidth_class(o.cls);
    for (auto& [cls, n] : config.scenarios_per_class) {
      if (cls != keep) n = 0;
    }
  }
  return config;
}

fs::path checkpoint_path(const fs::path& out, const std::string& policy, std::uint64_t seed) {
  return out / "models" / fmt::format("{}-seed{}.ckpt", policy, seed);
}

fs::path curve_path(const fs::path& out, const std::string& policy, std::uint64_t seed) {
  return out / fmt::format("loss-{}-seed{}.csv", policy, seed);
}

gfn::FlowModel train_and_save(const std::string& name, const PolicyKind& policy,
                              const ExperimentConfig& config, const Dataset& dataset,
                              std::uint64_t seed, const fs::path& out, Outputs& outputs) {
  log(fmt::format("training {} (seed {}, {} episodes)", name, seed, config.train_episodes));
  const auto suite = training_scenarios(dataset, config);
  auto trained = train_policy(policy, config, suite, seed);
  outputs.make_dir(out / "models");
  outputs.add(checkpoint_path(out, name, seed));
  gfn::save_checkpoint(trained.model, checkpoint_path(out, name, seed));
  outputs.write(curve_path(out, name, seed),
                [&](std::ostream& s) { write_loss_curve(s, trained.curve); });
  return std::move(trained.model);
}

std::vector<MetricsRow> run_policies(const std::vector<std::string>& names,
                                     const ExperimentConfig& config, const Dataset& dataset,
                                     const fs::path& out, Outputs& outputs) {
  const auto scenarios = evaluation_scenarios(dataset, config);
  if (scenarios.empty()) throw ConfigError("no evaluation scenarios selected");
  const auto arch = controller_architecture(config.controller, config.hidden);
  std::vector<MetricsRow> rows;
  for (const auto& name : names) {
    const auto policy = parse_policy(name, config, dataset);
    for (auto seed : config.seeds) {
      std::optional<gfn::FlowModel> model;
      if (uses_model(policy)) {
        const auto ckpt = checkpoint_path(out, name, seed);
        if (fs::exists(ckpt)) {
          model = gfn::load_checkpoint(ckpt, arch);
        } else {
          model = train_and_save(name, policy, config, dataset, seed, out, outputs);
        }
      }
      log(fmt::format("evaluating {} (seed {}) on {} scenarios", name, seed, scenarios.size()));
      auto part = evaluate_policy(name, policy, model ? &*model : nullptr, config, scenarios, seed);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  }
  return rows;
}

int cmd_gen_dataset(const Options& o) {
  GeneratorConfig gen;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    std::stringstream text;
    text << in.rdbuf();
    gen = parse_generator_config(text.str());
  }
  gen.validate();
  const auto dataset = synthesize_dataset(gen, o.seed.value_or(1));
  Outputs outputs;
  const fs::path out = o.out;
  outputs.make_dir(out / "network");
  for (const auto& t : dataset.traces) outputs.add(out / "network" / (t.name + ".trace"));
  for (const char* f : {"videos.csv", "users.csv", "prefs.csv", "manifest.json"}) {
    outputs.add(out / f);
  }
  save_dataset(dataset, out);
  outputs.commit();
  log(fmt::format("wrote {} traces, {} videos, {} users to {}", dataset.traces.size(),
                  dataset.videos.size(), dataset.users.size(), out.string()));
  return kOk;
}

int cmd_train(const Options& o) {
  auto config = experiment_config(o);
  const auto dataset = load_dataset(config.dataset);
  attach_dataset(config, dataset);
  Outputs outputs;
  const fs::path out = o.out;
  outputs.make_dir(out);
  std::size_t trained = 0;
  for (const auto& name : config.policies) {
    const auto policy = parse_policy(name, config, dataset);
    if (!uses_model(policy)) continue;
    for (auto seed : config.seeds) {
      train_and_save(name, policy, config, dataset, seed, out, outputs);
      ++trained;
    }
  }
  if (trained == 0) throw ConfigError("none of the selected policies has a model to train");
  outputs.commit();
  return kOk;
}

int cmd_evaluate(const Options& o) {
  auto config = experiment_config(o);
  const auto dataset = load_dataset(config.dataset);
  attach_dataset(config, dataset);
  Outputs outputs;
  const fs::path out = o.out;
  outputs.make_dir(out);
  const auto rows = run_policies(config.policies, config, dataset, out, outputs);
  outputs.add(out / "metrics.csv");
  write_metrics(out / "metrics.csv", rows);
  outputs.commit();
  log(fmt::format("wrote {} rows to {}", rows.size(), (out / "metrics.csv").string()));
  return kOk;
}

int cmd_ablate(const Options& o) {
  auto config = experiment_config(o);
  const auto dataset = load_dataset(config.dataset);
  attach_dataset(config, dataset);
  Outputs outputs;
  const fs::path out = o.out;
  outputs.make_dir(out);
  const auto rows =
      run_policies({"gfn-multi", "gfn-single", "gfn-fixed"}, config, dataset, out, outputs);
  outputs.add(out / "ablation-metrics.csv");
  write_metrics(out / "ablation-metrics.csv", rows);
  const auto mc = compare_policies(rows, "gfn-multi", "gfn-single");
  const auto pf = compare_policies(rows, "gfn-multi", "gfn-fixed");
  outputs.write(out / "ablation-summary.csv", [&](std::ostream& s) {
    s << "a,b,pairs,mean_a,mean_b,win_rate\n";
    for (const auto* c : {&mc, &pf}) {
      s << fmt::format("{},{},{},{:.6f},{:.6f},{:.6f}\n", c->a, c->b, c->pairs, c->mean_a,
                       c->mean_b, c->win_rate);
    }
  });
  outputs.commit();
  for (const auto* c : {&mc, &pf}) {
    log(fmt::format("{} vs {}: mean objective {:.4f} vs {:.4f}, wins {:.0f}% of {} pairs", c->a,
                    c->b, c->mean_a, c->mean_b, 100.0 * c->win_rate, c->pairs));
  }
  return kOk;
}

int cmd_report(const Options& o) {
  const fs::path in = o.in.empty() ? fs::path(o.out) : fs::path(o.in);
  if (!fs::is_directory(in)) throw ValidationError("no such directory: " + in.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(in)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" &&
        is_metrics_file(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ValidationError("no metrics CSVs in " + in.string());
  std::vector<MetricsRow> rows;
  for (const auto& f : files) {
    auto part = read_metrics(f);
    rows.insert(rows.end(), part.begin(), part.end());
  }

  std::optional<std::vector<Cell>> cells;
  if (!o.config.empty()) {
    const auto config = experiment_config(o);
    cells.emplace();
    for (const auto& p : config.policies) {
      for (const auto& [cls, n] : config.scenarios_per_class) {
        if (n > 0) cells->emplace_back(p, cls);
      }
    }
  }
  const auto md = render_report(rows, cells);

  Outputs outputs;
  const fs::path out = o.out;
  outputs.make_dir(out);
  outputs.write(out / "report.md", [&](std::ostream& s) { s << md; });
  outputs.commit();
  std::cout << md;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Short-video prefetch and bitrate control experiments"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", o.config, "Config file (JSON)")->check(CLI::ExistingFile);
    if (needs_config) c->required();
    sub->add_option("--seed", o.seed, "Seed; overrides the config's seed list");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  };
  const auto filters = [&](CLI::App* sub) {
    sub->add_option("--policy", o.policy, "Only this policy")
        ->check(CLI::IsMember({"gfn-multi", "gfn-single", "gfn-fixed", "rule-based"}));
    sub->add_option("--class", o.cls, "Only this bandwidth class")
        ->check(CLI::IsMember({"low", "medium", "high"}));
  };

  auto* gen = app.add_subcommand("gen-dataset", "Synthesize traces, videos, users and preferences");
  common(gen, false);
  auto* train = app.add_subcommand("train", "Train flow models; writes checkpoints and loss curves");
  common(train, true);
  filters(train);
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate policies; writes metrics.csv");
  common(evaluate, true);
  filters(evaluate);
  auto* ablate = app.add_subcommand("ablate", "Multi vs single candidate, personalized vs fixed");
  common(ablate, true);
  ablate->add_option("--class", o.cls, "Only this bandwidth class")
      ->check(CLI::IsMember({"low", "medium", "high"}));
  auto* report = app.add_subcommand("report", "Aggregate metrics CSVs into report.md");
  common(report, false);
  report->add_option("--in", o.in, "Directory with metrics CSVs (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_dataset(o);
    if (*train) return cmd_train(o);
    if (*evaluate) return cmd_evaluate(o);
    if (*ablate) return cmd_ablate(o);
    return cmd_report(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
