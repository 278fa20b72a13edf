#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kSource{FEEDFLOW_SOURCE_DIR};

int run(const std::string& args) {
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

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("feedflow-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// A config small enough for a unit test.
fs::path tiny_config(const fs::path& dir) {
  const auto path = dir / "tiny.json";
  std::ofstream(path) << R"({"dataset": ")" << (kSource / "data" / "demo").string() << R"(",
    "policies": ["gfn-multi", "rule-based"],
    "scenarios_per_class": {"low": 2, "medium": 2, "high": 2},
    "train_scenarios": 3, "train_episodes": 3, "seeds": [1], "hidden": [8], "k": 4})";
  return path;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("evaluate --bogus"), 1);
  EXPECT_EQ(run("evaluate --config /definitely/not/here.json"), 1);
  EXPECT_EQ(run("evaluate --config " + (kSource / "configs" / "demo.json").string() +
                " --policy nonsense"),
            1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ReportOnAnEmptyDirectoryFailsWithoutOutput) {
  const auto dir = scratch("empty");
  EXPECT_EQ(run("report --in " + dir.string() + " --out " + (dir / "out").string()), 2);
  EXPECT_FALSE(fs::exists(dir / "out" / "report.md"));
  EXPECT_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST(Cli, InvalidConfigExitsWithTwoAndLeavesNothing) {
  const auto dir = scratch("badconfig");
  std::ofstream(dir / "bad.json") << R"({"dataset": "x", "seeds": []})";
  EXPECT_EQ(run("evaluate --config " + (dir / "bad.json").string() + " --out " +
                (dir / "out").string()),
            2);
  EXPECT_FALSE(fs::exists(dir / "out"));
  fs::remove_all(dir);
}

TEST(Cli, EvaluateAndReportAreDeterministic) {
  const auto dir = scratch("pipeline");
  const auto config = tiny_config(dir);
  for (const char* run_dir : {"a", "b"}) {
    ASSERT_EQ(run("evaluate --config " + config.string() + " --out " + (dir / run_dir).string()),
              0);
    ASSERT_EQ(run("report --out " + (dir / run_dir).string()), 0);
  }
  const auto a = slurp(dir / "a" / "metrics.csv");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "a" / "report.md"), slurp(dir / "b" / "report.md"));
  EXPECT_TRUE(fs::exists(dir / "a" / "models" / "gfn-multi-seed1.ckpt"));
  EXPECT_NE(slurp(dir / "a" / "report.md").find("| rule-based | Low |"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, GenDatasetWritesAManifestDirectory) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run("gen-dataset --config " + (kSource / "configs" / "dataset.json").string() +
                " --seed 2024 --out " + (dir / "d").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "d" / "manifest.json"));
  // The bundled demo data is this exact command's output.
  EXPECT_EQ(slurp(dir / "d" / "videos.csv"), slurp(kSource / "data" / "demo" / "videos.csv"));
  EXPECT_EQ(slurp(dir / "d" / "manifest.json"), slurp(kSource / "data" / "demo" / "manifest.json"));
  fs::remove_all(dir);
}
