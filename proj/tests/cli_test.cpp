#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "burstprof/burstseg.hpp"
#include "burstprof/csv.hpp"
#include "burstprof/ingest.hpp"

using namespace burstprof;
namespace fs = std::filesystem;

namespace {

const std::string kCli = BURSTPROF_CLI_PATH;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("burstprof_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the tool with stderr captured; returns the exit status.
  int run(const std::string& args) {
    const std::string cmd = "'" + kCli + "' " + args + " >/dev/null 2>'" + (dir_ / "stderr.txt").string() + "'";
    const int status = std::system(cmd.c_str());
    stderr_ = slurp(dir_ / "stderr.txt");
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string small_synth(const fs::path& out, int seed = 3) {
    const auto cfg = dir_ / "small.json";
    std::ofstream(cfg) << R"({"users": 4, "synth": {"bursts_min": 150, "bursts_max": 200}})";
    EXPECT_EQ(run("synth --out '" + out.string() + "' --config '" + cfg.string() + "' --seed " + std::to_string(seed)), 0)
        << stderr_;
    return (out / "traces.csv").string();
  }

  fs::path dir_;
  std::string stderr_;
};

}  // namespace

TEST_F(Cli, ThresholdMatchesLibrary) {
  const auto traces = small_synth(dir_ / "synth");
  ASSERT_EQ(run("threshold --traces '" + traces + "' --out '" + (dir_ / "th").string() + "'"), 0) << stderr_;
  const auto parsed = parse_traces(traces).traces;
  std::ostringstream expect;
  expect << "user_id,tau_star,fallback\n";
  for (const auto& t : batch_thresholds(parsed, BurstConfig{}))
    expect << t.user_id << ',' << csv::format_double(t.tau_star) << ',' << (t.fallback ? 1 : 0) << '\n';
  EXPECT_EQ(slurp(dir_ / "th" / "thresholds.csv"), expect.str());
}

TEST_F(Cli, PipelineIsDeterministic) {
  const auto cfg = dir_ / "p.json";
  std::ofstream(cfg) << R"({"users": 6, "synth": {"bursts_min": 300, "bursts_max": 350}})";
  for (const char* name : {"a", "b"})
    ASSERT_EQ(run("pipeline --seed 42 --config '" + cfg.string() + "' --out '" + (dir_ / name).string() + "'"), 0)
        << stderr_;
  const auto a = nlohmann::json::parse(slurp(dir_ / "a" / "run.json"));
  const auto b = nlohmann::json::parse(slurp(dir_ / "b" / "run.json"));
  ASSERT_FALSE(a.at("artifacts").empty());
  EXPECT_EQ(a.at("artifacts"), b.at("artifacts"));
  EXPECT_EQ(a.at("seed"), 42);
  for (const auto& e : fs::directory_iterator(dir_ / "a")) {
    if (e.path().filename() == "run.json") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir_ / "b" / e.path().filename())) << e.path().filename();
  }
  for (const char* f : {"thresholds.csv", "bursts.csv", "features.csv", "model.json", "metrics.csv", "roc.csv"})
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
}

TEST_F(Cli, EvaluateWritesOneRowPerBoundary) {
  const auto cfg = dir_ / "p.json";
  std::ofstream(cfg) << R"({"users": 6, "synth": {"bursts_min": 300, "bursts_max": 350}})";
  const auto out = (dir_ / "p").string();
  ASSERT_EQ(run("pipeline --seed 5 --config '" + cfg.string() + "' --out '" + out + "'"), 0) << stderr_;
  ASSERT_EQ(run("evaluate --out '" + out + "' --labels '" + out + "/holdout_labels.csv' --h 0.5 --h 0.166"), 0)
      << stderr_;
  std::istringstream metrics(slurp(dir_ / "p" / "metrics.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(metrics, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "h,precision,npv,sensitivity,specificity,accuracy");
  EXPECT_EQ(lines[1].substr(0, 4), "0.5,");
  EXPECT_EQ(lines[2].substr(0, 6), "0.166,");
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("threshold --out '" + dir_.string() + "'"), 2);
  EXPECT_NE(stderr_.find("--traces"), std::string::npos);
  EXPECT_EQ(run("threshold --bogus 1"), 2);
}

TEST_F(Cli, RuntimeErrorsExitOneWithSingleLine) {
  EXPECT_EQ(run("threshold --traces /nonexistent/t.csv --out '" + dir_.string() + "'"), 1);
  EXPECT_EQ(stderr_.rfind("burstprof: error: io: ", 0), 0u) << stderr_;
  EXPECT_EQ(std::count(stderr_.begin(), stderr_.end(), '\n'), 1);
  const auto bad = dir_ / "bad.csv";
  std::ofstream(bad) << "nope\n";
  EXPECT_EQ(run("threshold --traces '" + bad.string() + "' --out '" + dir_.string() + "'"), 1);
  EXPECT_EQ(stderr_.rfind("burstprof: error: parse: ", 0), 0u) << stderr_;
}

TEST_F(Cli, FlagsOverrideConfig) {
  const auto traces = small_synth(dir_ / "synth");
  const auto cfg = dir_ / "c.json";
  std::ofstream(cfg) << R"({"bin_length": 0.5, "J": 3})";
  ASSERT_EQ(run("threshold --traces '" + traces + "' --config '" + cfg.string() + "' --bin-length 0.1 --out '" +
                (dir_ / "o").string() + "'"),
            0)
      << stderr_;
  const auto manifest = nlohmann::json::parse(slurp(dir_ / "o" / "run.json"));
  EXPECT_EQ(manifest.at("config").at("bin_length"), 0.1);
  EXPECT_EQ(manifest.at("config").at("J"), 3);
  std::ofstream(cfg) << R"({"unknown_key": 1})";
  EXPECT_EQ(run("threshold --traces '" + traces + "' --config '" + cfg.string() + "' --out '" + dir_.string() + "'"), 1);
}

TEST_F(Cli, InputsAreNotModified) {
  const auto traces = small_synth(dir_ / "synth");
  const auto before = slurp(traces);
  ASSERT_EQ(run("features --traces '" + traces + "' --out '" + (dir_ / "f").string() + "'"), 0) << stderr_;
  EXPECT_EQ(slurp(traces), before);
}
