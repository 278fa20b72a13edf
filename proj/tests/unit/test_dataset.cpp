#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "feedflow/dataset.hpp"
#include "feedflow/errors.hpp"

using namespace feedflow;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.traces_per_class = 2;
  c.trace_duration_s = 120.0;
  c.num_videos = 6;
  c.num_users = 4;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Concatenation of every file of a saved dataset, in path order.
std::string serialized(const Dataset& d, const fs::path& dir) {
  fs::remove_all(dir);
  save_dataset(d, dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += f.filename().string() + "\n" + slurp(f);
  return out;
}

fs::path temp_dir(const std::string& name) {
  return fs::temp_directory_path() / ("feedflow-test-" + name);
}

}  // namespace

TEST(Dataset, DeterministicForConfigAndSeed) {
  const auto a = synthesize_dataset(small_config(), 42);
  const auto b = synthesize_dataset(small_config(), 42);
  EXPECT_EQ(serialized(a, temp_dir("det-a")), serialized(b, temp_dir("det-b")));
}

TEST(Dataset, DistinctSeedsGiveDistinctOutput) {
  const auto a = synthesize_dataset(small_config(), 1);
  const auto b = synthesize_dataset(small_config(), 2);
  EXPECT_NE(serialized(a, temp_dir("seed-a")), serialized(b, temp_dir("seed-b")));
}

TEST(Dataset, TracesLandInTheirRequestedClass) {
  auto c = small_config();
  c.classes = {BandwidthClass::kLow};
  c.traces_per_class = 10;
  const auto d = synthesize_dataset(c, 7);
  ASSERT_EQ(d.traces.size(), 10u);
  for (const auto& t : d.traces) EXPECT_EQ(classify_trace(t.trace), BandwidthClass::kLow);

  const auto all = synthesize_dataset(small_config(), 7);
  for (const auto& t : all.traces) EXPECT_EQ(classify_trace(t.trace), t.cls);
}

TEST(Dataset, PreferenceSamplesStayInRangeWithMidpointMean) {
  auto c = small_config();
  c.num_users = 1000;
  const auto d = synthesize_dataset(c, 99);
  ASSERT_EQ(d.prefs.size(), 1000u);
  double sum = 0.0;
  for (const auto& p : d.prefs) {
    EXPECT_TRUE(c.alpha.contains(p.alpha));
    EXPECT_TRUE(c.beta.contains(p.beta));
    EXPECT_TRUE(c.gamma.contains(p.gamma));
    EXPECT_TRUE(c.theta.contains(p.theta));
    sum += p.alpha;
  }
  EXPECT_NEAR(sum / 1000.0, c.alpha.midpoint(), 0.1 * c.alpha.midpoint());
}

TEST(Dataset, VideosAreValidAndSizedByBitrate) {
  const auto d = synthesize_dataset(small_config(), 3);
  for (const auto& v : d.videos) {
    EXPECT_NO_THROW(v.validate(d.ladder.size()));
    for (std::size_t c = 0; c < v.chunk_count(); ++c) {
      for (std::size_t l = 0; l < d.ladder.size(); ++l) {
        const double nominal = d.ladder.kbps(l) * 1000.0 * v.chunk_duration_s / 8.0;
        EXPECT_GE(static_cast<double>(v.chunk_size(c, l)), 0.9 * nominal - 1.0);
      }
    }
  }
  for (const auto& u : d.users) EXPECT_EQ(u.watch_durations.size(), d.videos.size());
}

TEST(Dataset, SaveLoadRoundTrip) {
  const auto d = synthesize_dataset(small_config(), 5);
  const auto dir = temp_dir("roundtrip");
  fs::remove_all(dir);
  save_dataset(d, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "videos.csv"));
  const auto back = load_dataset(dir);
  EXPECT_EQ(back.seed, d.seed);
  EXPECT_EQ(back.config, d.config);
  EXPECT_EQ(back.ladder, d.ladder);
  ASSERT_EQ(back.traces.size(), d.traces.size());
  for (std::size_t i = 0; i < d.traces.size(); ++i) {
    EXPECT_EQ(back.traces[i].trace, d.traces[i].trace);
    EXPECT_EQ(back.traces[i].cls, d.traces[i].cls);
  }
  ASSERT_EQ(back.videos.size(), d.videos.size());
  for (std::size_t i = 0; i < d.videos.size(); ++i) {
    EXPECT_EQ(back.videos[i].chunk_sizes, d.videos[i].chunk_sizes);
  }
  for (std::size_t i = 0; i < d.users.size(); ++i) {
    EXPECT_EQ(back.users[i].watch_durations, d.users[i].watch_durations);
    EXPECT_EQ(back.prefs[i], d.prefs[i]);
  }
  fs::remove_all(dir);
}

TEST(Dataset, MissingDirectoryFails) {
  EXPECT_THROW(load_dataset(temp_dir("does-not-exist")), Error);
}

TEST(GeneratorConfig, JsonRoundTrip) {
  auto c = small_config();
  c.alpha = {0.7, 1.1};
  c.ladder_kbps = {300.0, 800.0, 2000.0};
  EXPECT_EQ(parse_generator_config(generator_config_to_json(c)), c);
}

TEST(GeneratorConfig, InvertedRangeIsConfigError) {
  EXPECT_THROW(parse_generator_config(R"({"preferences": {"alpha": [2.0, 0.5]}})").validate(),
               ConfigError);
  auto c = small_config();
  c.video_length_s = {30.0, 8.0};
  EXPECT_THROW(synthesize_dataset(c, 1), ConfigError);
}

TEST(GeneratorConfig, ClassRangeMustNotStraddleThreshold) {
  auto c = small_config();
  c.low_mean_mbps = {0.5, 2.0};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(GeneratorConfig, MalformedJsonIsParseError) {
  EXPECT_THROW(parse_generator_config("{not json"), ParseError);
}
