#include "feedflow/dataset.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "feedflow/csv.hpp"
#include "feedflow/errors.hpp"
#include "feedflow/rng.hpp"

namespace feedflow {

using nlohmann::json;

namespace {

void check_range(const Range& r, const char* name, bool positive = false) {
  if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max) {
    throw ConfigError(fmt::format("{}: range [{}, {}] is invalid (min > max)", name, r.min, r.max));
  }
  if (positive ? r.min <= 0.0 : r.min < 0.0) {
    throw ConfigError(fmt::format("{}: range [{}, {}] must be {}", name, r.min, r.max,
                                  positive ? "positive" : "non-negative"));
  }
}

Range range_from(const json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(fmt::format("'{}' must be a [min, max] pair", key));
  }
  return Range{v[0].get<double>(), v[1].get<double>()};
}

json range_to(const Range& r) { return json::array({r.min, r.max}); }

// Stream ids for independent generator substreams.
enum Stream : std::uint64_t { kNetwork = 1, kVideos = 2, kUsers = 3, kPrefs = 4 };

NetworkTrace synth_trace(const GeneratorConfig& c, BandwidthClass cls, Rng& rng) {
  const auto n = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(c.trace_duration_s / c.trace_step_s)));
  const double target = rng.uniform(c.class_mean_range(cls).min, c.class_mean_range(cls).max);
  const double innovation = c.log_volatility * std::sqrt(1.0 - c.persistence * c.persistence);
  std::vector<double> bw(n);
  double x = c.log_volatility * rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    bw[i] = std::exp(x);
    x = c.persistence * x + innovation * rng.normal();
  }
  // Equal spacing, so the time-weighted mean is the arithmetic mean.
  double mean = 0.0;
  for (double b : bw) mean += b;
  mean /= static_cast<double>(n);
  std::vector<BandwidthSample> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i] = {static_cast<double>(i) * c.trace_step_s, bw[i] * target / mean};
  }
  return NetworkTrace(std::move(samples));
}

Video synth_video(const GeneratorConfig& c, std::size_t index, Rng& rng) {
  Video v;
  v.id = fmt::format("v{:03d}", index);
  v.chunk_duration_s = c.chunk_duration_s;
  const double length = rng.uniform(c.video_length_s.min, c.video_length_s.max);
  const auto chunks =
      std::max<long long>(1, std::llround(length / c.chunk_duration_s));
  v.chunk_sizes.resize(static_cast<std::size_t>(chunks));
  for (auto& row : v.chunk_sizes) {
    row.resize(c.ladder_kbps.size());
    for (std::size_t l = 0; l < row.size(); ++l) {
      const double noise = rng.uniform(c.size_noise.min, c.size_noise.max);
      auto bytes = static_cast<std::int64_t>(
          std::llround(c.ladder_kbps[l] * 1000.0 * c.chunk_duration_s / 8.0 * noise));
      bytes = std::max<std::int64_t>(bytes, 1);
      if (l > 0) bytes = std::max(bytes, row[l - 1]);
      row[l] = bytes;
    }
  }
  return v;
}

UserTrace synth_user(const GeneratorConfig& c, Rng& rng) {
  UserTrace u;
  u.watch_durations.resize(static_cast<std::size_t>(c.num_videos));
  for (auto& w : u.watch_durations) {
    const double r = rng.uniform();
    if (r < c.quick_swipe_prob) {
      w = rng.uniform(c.quick_swipe_s.min, c.quick_swipe_s.max);
    } else if (r < c.quick_swipe_prob + c.full_watch_prob) {
      // Capped to the video length by the simulator.
      w = c.video_length_s.max;
    } else {
      w = rng.uniform(c.partial_watch_s.min, c.partial_watch_s.max);
    }
  }
  return u;
}

}  // namespace

const Range& GeneratorConfig::class_mean_range(BandwidthClass cls) const {
  switch (cls) {
    case BandwidthClass::kLow:
      return low_mean_mbps;
    case BandwidthClass::kMedium:
      return medium_mean_mbps;
    case BandwidthClass::kHigh:
      return high_mean_mbps;
  }
  return low_mean_mbps;
}

void GeneratorConfig::validate() const {
  if (classes.empty()) throw ConfigError("network.classes must not be empty");
  if (traces_per_class <= 0) throw ConfigError("network.traces_per_class must be > 0");
  if (!(trace_duration_s > 0.0) || !(trace_step_s > 0.0) || trace_step_s > trace_duration_s) {
    throw ConfigError("network.duration_s and network.step_s must be positive, step <= duration");
  }
  if (!(log_volatility >= 0.0) || !(persistence >= 0.0 && persistence < 1.0)) {
    throw ConfigError("network.volatility must be >= 0 and persistence in [0, 1)");
  }
  check_range(low_mean_mbps, "network.class_mean_mbps.low", true);
  check_range(medium_mean_mbps, "network.class_mean_mbps.medium", true);
  check_range(high_mean_mbps, "network.class_mean_mbps.high", true);
  for (auto cls : {BandwidthClass::kLow, BandwidthClass::kMedium, BandwidthClass::kHigh}) {
    const auto& r = class_mean_range(cls);
    if (classify_mean(r.min) != cls || classify_mean(r.max) != cls) {
      throw ConfigError(fmt::format("class mean range for {} crosses a class threshold",
                                    to_string(cls)));
    }
  }
  if (num_videos <= 0) throw ConfigError("videos.count must be > 0");
  check_range(video_length_s, "videos.length_s", true);
  BitrateLadder ladder(ladder_kbps);  // validates
  if (!(chunk_duration_s > 0.0)) throw ConfigError("videos.chunk_duration_s must be > 0");
  check_range(size_noise, "videos.size_noise", true);
  if (num_users <= 0) throw ConfigError("users.count must be > 0");
  if (!(quick_swipe_prob >= 0.0) || !(full_watch_prob >= 0.0) ||
      quick_swipe_prob + full_watch_prob > 1.0) {
    throw ConfigError("users: swipe/full-watch probabilities must be >= 0 and sum to <= 1");
  }
  check_range(quick_swipe_s, "users.quick_swipe_s");
  check_range(partial_watch_s, "users.partial_watch_s");
  check_range(alpha, "preferences.alpha");
  check_range(beta, "preferences.beta");
  check_range(gamma, "preferences.gamma");
  check_range(theta, "preferences.theta");
}

GeneratorConfig parse_generator_config(std::string_view json_text) {
  GeneratorConfig c;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  try {
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.contains("classes")) {
        c.classes.clear();
        for (const auto& name : n.at("classes")) {
          c.classes.push_back(parse_bandwidth_class(name.get<std::string>()));
        }
      }
      c.traces_per_class = n.value("traces_per_class", c.traces_per_class);
      c.trace_duration_s = n.value("duration_s", c.trace_duration_s);
      c.trace_step_s = n.value("step_s", c.trace_step_s);
      c.log_volatility = n.value("volatility", c.log_volatility);
      c.persistence = n.value("persistence", c.persistence);
      if (n.contains("class_mean_mbps")) {
        const auto& m = n.at("class_mean_mbps");
        c.low_mean_mbps = range_from(m, "low", c.low_mean_mbps);
        c.medium_mean_mbps = range_from(m, "medium", c.medium_mean_mbps);
        c.high_mean_mbps = range_from(m, "high", c.high_mean_mbps);
      }
    }
    if (j.contains("videos")) {
      const auto& v = j.at("videos");
      c.num_videos = v.value("count", c.num_videos);
      c.video_length_s = range_from(v, "length_s", c.video_length_s);
      c.ladder_kbps = v.value("ladder_kbps", c.ladder_kbps);
      c.chunk_duration_s = v.value("chunk_duration_s", c.chunk_duration_s);
      c.size_noise = range_from(v, "size_noise", c.size_noise);
    }
    if (j.contains("users")) {
      const auto& u = j.at("users");
      c.num_users = u.value("count", c.num_users);
      c.quick_swipe_prob = u.value("quick_swipe_prob", c.quick_swipe_prob);
      c.quick_swipe_s = range_from(u, "quick_swipe_s", c.quick_swipe_s);
      c.full_watch_prob = u.value("full_watch_prob", c.full_watch_prob);
      c.partial_watch_s = range_from(u, "partial_watch_s", c.partial_watch_s);
    }
    if (j.contains("preferences")) {
      const auto& p = j.at("preferences");
      c.alpha = range_from(p, "alpha", c.alpha);
      c.beta = range_from(p, "beta", c.beta);
      c.gamma = range_from(p, "gamma", c.gamma);
      c.theta = range_from(p, "theta", c.theta);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("generator config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string generator_config_to_json(const GeneratorConfig& c) {
  json classes = json::array();
  for (auto cls : c.classes) {
    std::string name(to_string(cls));
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    classes.push_back(name);
  }
  json j = {
      {"network",
       {{"classes", classes},
        {"traces_per_class", c.traces_per_class},
        {"duration_s", c.trace_duration_s},
        {"step_s", c.trace_step_s},
        {"volatility", c.log_volatility},
        {"persistence", c.persistence},
        {"class_mean_mbps",
         {{"low", range_to(c.low_mean_mbps)},
          {"medium", range_to(c.medium_mean_mbps)},
          {"high", range_to(c.high_mean_mbps)}}}}},
      {"videos",
       {{"count", c.num_videos},
        {"length_s", range_to(c.video_length_s)},
        {"ladder_kbps", c.ladder_kbps},
        {"chunk_duration_s", c.chunk_duration_s},
        {"size_noise", range_to(c.size_noise)}}},
      {"users",
       {{"count", c.num_users},
        {"quick_swipe_prob", c.quick_swipe_prob},
        {"quick_swipe_s", range_to(c.quick_swipe_s)},
        {"full_watch_prob", c.full_watch_prob},
        {"partial_watch_s", range_to(c.partial_watch_s)}}},
      {"preferences",
       {{"alpha", range_to(c.alpha)},
        {"beta", range_to(c.beta)},
        {"gamma", range_to(c.gamma)},
        {"theta", range_to(c.theta)}}},
  };
  return j.dump(2);
}

std::vector<const NamedTrace*> Dataset::traces_of(BandwidthClass cls) const {
  std::vector<const NamedTrace*> out;
  for (const auto& t : traces) {
    if (t.cls == cls) out.push_back(&t);
  }
  return out;
}

Dataset synthesize_dataset(const GeneratorConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset d;
  d.config = config;
  d.seed = seed;
  d.ladder = BitrateLadder(config.ladder_kbps);
  d.chunk_duration_s = config.chunk_duration_s;

  Rng net_rng(derive_seed(seed, kNetwork));
  for (auto cls : config.classes) {
    std::string prefix(to_string(cls));
    std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (int i = 0; i < config.traces_per_class; ++i) {
      auto trace = synth_trace(config, cls, net_rng);
      d.traces.push_back({fmt::format("{}_{:03d}", prefix, i), classify_trace(trace), std::move(trace)});
    }
  }

  Rng video_rng(derive_seed(seed, kVideos));
  for (int i = 0; i < config.num_videos; ++i) {
    d.videos.push_back(synth_video(config, static_cast<std::size_t>(i), video_rng));
  }

  Rng user_rng(derive_seed(seed, kUsers));
  Rng pref_rng(derive_seed(seed, kPrefs));
  for (int i = 0; i < config.num_users; ++i) {
    d.users.push_back(synth_user(config, user_rng));
    PreferenceParams p;
    p.alpha = pref_rng.uniform(config.alpha.min, config.alpha.max);
    p.beta = pref_rng.uniform(config.beta.min, config.beta.max);
    p.gamma = pref_rng.uniform(config.gamma.min, config.gamma.max);
    p.theta = pref_rng.uniform(config.theta.min, config.theta.max);
    d.prefs.push_back(p);
  }
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "network");

  json trace_index = json::array();
  for (const auto& t : d.traces) {
    const auto file = fs::path("network") / (t.name + ".trace");
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / file).string());
    save_network_trace(t.trace, out);
    std::string cls(to_string(t.cls));
    trace_index.push_back({{"name", t.name}, {"file", file.generic_string()}, {"class", cls}});
  }

  {
    std::ofstream out(dir / "videos.csv", std::ios::binary);
    out << "video_id,chunk_index,level,size_bytes\n";
    for (const auto& v : d.videos) {
      for (std::size_t c = 0; c < v.chunk_count(); ++c) {
        for (std::size_t l = 0; l < v.chunk_sizes[c].size(); ++l) {
          out << fmt::format("{},{},{},{}\n", v.id, c, l, v.chunk_sizes[c][l]);
        }
      }
    }
  }
  {
    std::ofstream out(dir / "users.csv", std::ios::binary);
    out << "user_id,position,watch_s\n";
    for (std::size_t u = 0; u < d.users.size(); ++u) {
      for (std::size_t p = 0; p < d.users[u].watch_durations.size(); ++p) {
        out << fmt::format("u{:03d},{},{}\n", u, p, d.users[u].watch_durations[p]);
      }
    }
  }
  {
    std::ofstream out(dir / "prefs.csv", std::ios::binary);
    out << "user_id,alpha,beta,gamma,theta\n";
    for (std::size_t u = 0; u < d.prefs.size(); ++u) {
      const auto& p = d.prefs[u];
      out << fmt::format("u{:03d},{},{},{},{}\n", u, p.alpha, p.beta, p.gamma, p.theta);
    }
  }
  json manifest = {
      {"format", "feedflow-dataset/1"},
      {"seed", d.seed},
      {"config", json::parse(generator_config_to_json(d.config))},
      {"ladder_kbps", d.ladder.levels()},
      {"chunk_duration_s", d.chunk_duration_s},
      {"traces", trace_index},
  };
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error("no dataset manifest at " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  Dataset d;
  try {
    d.config = parse_generator_config(manifest.at("config").dump());
    d.seed = manifest.at("seed").get<std::uint64_t>();
    d.ladder = BitrateLadder(manifest.at("ladder_kbps").get<std::vector<double>>());
    d.chunk_duration_s = manifest.at("chunk_duration_s").get<double>();
    for (const auto& t : manifest.at("traces")) {
      auto trace = load_network_trace_file((dir / t.at("file").get<std::string>()).string());
      const auto cls = parse_bandwidth_class(t.at("class").get<std::string>());
      if (classify_trace(trace) != cls) {
        throw ValidationError("trace " + t.at("name").get<std::string>() +
                              " does not match its recorded class");
      }
      d.traces.push_back({t.at("name").get<std::string>(), cls, std::move(trace)});
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  const auto videos = read_csv(dir / "videos.csv");
  {
    const auto c_id = videos.column("video_id"), c_chunk = videos.column("chunk_index"),
               c_level = videos.column("level"), c_size = videos.column("size_bytes");
    for (std::size_t r = 0; r < videos.rows.size(); ++r) {
      const auto& row = videos.rows[r];
      const auto line = r + 2;
      if (d.videos.empty() || d.videos.back().id != row[c_id]) {
        Video v;
        v.id = row[c_id];
        v.chunk_duration_s = d.chunk_duration_s;
        d.videos.push_back(std::move(v));
      }
      auto& v = d.videos.back();
      const auto chunk = static_cast<std::size_t>(parse_csv_int(row[c_chunk], line));
      const auto level = static_cast<std::size_t>(parse_csv_int(row[c_level], line));
      if (chunk == v.chunk_sizes.size()) v.chunk_sizes.emplace_back();
      if (chunk + 1 != v.chunk_sizes.size() || level != v.chunk_sizes.back().size()) {
        throw ParseError("videos.csv rows must be ordered by chunk then level", line);
      }
      v.chunk_sizes.back().push_back(parse_csv_int(row[c_size], line));
    }
    RecommendationQueue{d.videos}.validate(d.ladder.size());
  }

  const auto users = read_csv(dir / "users.csv");
  {
    const auto c_user = users.column("user_id"), c_pos = users.column("position"),
               c_watch = users.column("watch_s");
    std::string current;
    for (std::size_t r = 0; r < users.rows.size(); ++r) {
      const auto& row = users.rows[r];
      if (d.users.empty() || row[c_user] != current) {
        current = row[c_user];
        d.users.emplace_back();
      }
      auto& u = d.users.back();
      if (static_cast<std::size_t>(parse_csv_int(row[c_pos], r + 2)) != u.watch_durations.size()) {
        throw ParseError("users.csv positions must be consecutive from 0", r + 2);
      }
      u.watch_durations.push_back(parse_csv_double(row[c_watch], r + 2));
    }
    for (const auto& u : d.users) u.validate();
  }

  const auto prefs = read_csv(dir / "prefs.csv");
  {
    const auto ca = prefs.column("alpha"), cb = prefs.column("beta"), cg = prefs.column("gamma"),
               ct = prefs.column("theta");
    for (std::size_t r = 0; r < prefs.rows.size(); ++r) {
      const auto& row = prefs.rows[r];
      PreferenceParams p{parse_csv_double(row[ca], r + 2), parse_csv_double(row[cb], r + 2),
                         parse_csv_double(row[cg], r + 2), parse_csv_double(row[ct], r + 2)};
      p.validate();
      d.prefs.push_back(p);
    }
  }
  if (d.prefs.size() != d.users.size()) {
    throw ValidationError("prefs.csv and users.csv describe different user counts");
  }
  return d;
}

}  // namespace feedflow
