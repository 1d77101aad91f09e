/*
 * Copyright 2026 The maca Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maca/cli.hpp"

namespace maca {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("maca_cli_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "maca");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    log_.str({});
    err_.str({});
    return cli::dispatch(static_cast<int>(argv.size()), argv.data(), log_, err_);
  }

  std::string dir(const std::string& name) const { return (root_ / name).string(); }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path root_;
  std::ostringstream log_;
  std::ostringstream err_;
};

TEST_F(CliTest, GenDataIsDeterministic) {
  ASSERT_EQ(call({"gen-data", "--frames", "20", "--seed", "7", "--out", dir("a")}), 0) << err_.str();
  ASSERT_EQ(call({"gen-data", "--frames", "20", "--seed", "7", "--out", dir("b")}), 0) << err_.str();
  const std::string a = slurp(root_ / "a" / "dataset.bin");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(root_ / "b" / "dataset.bin"));
  EXPECT_EQ(read_dataset((root_ / "a" / "dataset.bin").string()).size(), 60u);  // originals, mirrors, noise copies
}

TEST_F(CliTest, ManifestReproducesTheRun) {
  ASSERT_EQ(call({"gen-data", "--frames", "10", "--noise-copies", "0", "--seed", "3", "--out", dir("a")}), 0);
  const std::string manifest = slurp(root_ / "a" / "manifest.txt");
  EXPECT_NE(manifest.find("command = gen-data\n"), std::string::npos);
  EXPECT_NE(manifest.find("seed = 3\n"), std::string::npos);
  EXPECT_NE(manifest.find("frames = 10\n"), std::string::npos);
  ASSERT_EQ(call({"gen-data", "--config", (root_ / "a" / "manifest.txt").string(), "--out", dir("b")}), 0) << err_.str();
  EXPECT_EQ(slurp(root_ / "a" / "dataset.bin"), slurp(root_ / "b" / "dataset.bin"));
}

TEST_F(CliTest, MissingSeedIsGeneratedAndRecorded) {
  ASSERT_EQ(call({"simulate", "--scenario", "swap", "--agents", "2", "--time-limit", "0.5", "--out", dir("a")}), 0);
  const std::string manifest = slurp(root_ / "a" / "manifest.txt");
  const auto at = manifest.find("seed = ");
  ASSERT_NE(at, std::string::npos);
  EXPECT_NE(manifest[at + 7], '\n');
}

TEST_F(CliTest, FlagsOverrideTheConfigFile) {
  {
    std::ofstream os(root_ / "cfg.txt");
    os << "# comment\nscenario = swap\nagents = 2\ntime-limit = 0.5\nseed = 1\n";
  }
  ASSERT_EQ(call({"simulate", "--config", (root_ / "cfg.txt").string(), "--agents", "4", "--out", dir("a")}), 0);
  const std::string manifest = slurp(root_ / "a" / "manifest.txt");
  EXPECT_NE(manifest.find("scenario = swap\n"), std::string::npos);
  EXPECT_NE(manifest.find("agents = 4\n"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
  EXPECT_EQ(call({}), 1);
  EXPECT_EQ(call({"fly"}), 1);
  EXPECT_EQ(call({"simulate", "--wings", "2"}), 1);
  EXPECT_EQ(call({"simulate", "--scenario", "maze", "--out", dir("a")}), 1);
  EXPECT_EQ(call({"simulate", "--time-limit", "soon", "--out", dir("a")}), 1);
  EXPECT_EQ(call({"simulate", "--controller", "learned", "--out", dir("a")}), 1);
  EXPECT_EQ(call({"train", "--out", dir("a")}), 1);
  EXPECT_EQ(call({"gen-data", "--frames", "0", "--out", dir("a")}), 1);
  {
    std::ofstream os(root_ / "bad.txt");
    os << "colour = blue\n";
  }
  EXPECT_EQ(call({"simulate", "--config", (root_ / "bad.txt").string(), "--out", dir("a")}), 1);
  EXPECT_EQ(call({"simulate", "--config", (root_ / "missing.txt").string()}), 1);
  EXPECT_FALSE(err_.str().empty());
}

TEST_F(CliTest, RuntimeErrorsExitWithTwo) {
  EXPECT_EQ(call({"train", "--data", (root_ / "none.bin").string(), "--out", dir("a")}), 2);
  {
    std::ofstream os(root_ / "junk.bin");
    os << "not a dataset";
  }
  EXPECT_EQ(call({"partition", "--data", (root_ / "junk.bin").string(), "--out", dir("a")}), 2);
}

TEST_F(CliTest, HelpExitsCleanly) {
  EXPECT_EQ(call({"--help"}), 0);
  EXPECT_NE(log_.str().find("simulate"), std::string::npos);
}

TEST_F(CliTest, SimulateWritesTraceAndMetrics) {
  ASSERT_EQ(call({"simulate", "--scenario", "circle", "--agents", "4", "--time-limit", "2", "--seed", "1", "--out",
                  dir("a")}),
            0);
  const std::string trace = slurp(root_ / "a" / "trace.csv");
  EXPECT_EQ(trace.rfind("# scenario: circle\n", 0), 0u);
  const auto j = nlohmann::json::parse(slurp(root_ / "a" / "metrics.json"));
  for (const char* k : {"total_travel_time", "total_distance", "safety_margin_min", "safety_margin_avg", "completed"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
}

TEST_F(CliTest, EvaluateReportsMarginFields) {
  ASSERT_EQ(call({"evaluate", "--scenario", "circle", "--controller", "orca", "--protect-radius", "0.2",
                  "--time-limit", "5", "--seed", "1", "--out", dir("a")}),
            0)
      << err_.str();
  const auto j = nlohmann::json::parse(slurp(root_ / "a" / "metrics_circle.json"));
  EXPECT_EQ(j["repetitions"].get<int>(), 1);
  EXPECT_TRUE(j["mean"]["safety_margin_min"].is_number());
  EXPECT_TRUE(j["mean"]["safety_margin_avg"].is_number());
  EXPECT_DOUBLE_EQ(j["protect_radius"].get<double>(), 0.2);
}

TEST_F(CliTest, StressWritesItsReport) {
  ASSERT_EQ(call({"stress", "--controller", "orca", "--inits", "3", "--time-limit", "10", "--seed", "2", "--out",
                  dir("a")}),
            0);
  const auto j = nlohmann::json::parse(slurp(root_ / "a" / "stress.json"));
  EXPECT_EQ(j["initializations"].get<int>(), 3);
  EXPECT_GE(j["failure_rate"].get<double>(), 0.0);
  EXPECT_LE(j["failure_rate"].get<double>(), 1.0);
}

TEST_F(CliTest, PartitionAndTrainFromGeneratedData) {
  ASSERT_EQ(call({"gen-data", "--frames", "30", "--seed", "5", "--out", dir("data")}), 0);
  const std::string data = (root_ / "data" / "dataset.bin").string();
  ASSERT_EQ(call({"partition", "--data", data, "--k", "5", "--seed", "1", "--out", dir("part")}), 0) << err_.str();
  const std::string table = slurp(root_ / "part" / "partition_table.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 62);
  ASSERT_EQ(call({"train", "--data", data, "--epochs", "1", "--lr", "0.01", "--seed", "2", "--out", dir("t1")}), 0)
      << err_.str();
  EXPECT_TRUE(fs::exists(root_ / "t1" / "model.bin"));
  EXPECT_EQ(slurp(root_ / "t1" / "history.csv").rfind("epoch,train_loss", 0), 0u);
  ASSERT_EQ(call({"train", "--config", (root_ / "t1" / "manifest.txt").string(), "--out", dir("t2")}), 0);
  EXPECT_EQ(slurp(root_ / "t1" / "model.bin"), slurp(root_ / "t2" / "model.bin"));
  const CANetModel m = load_checkpoint((root_ / "t1" / "model.bin").string());
  EXPECT_TRUE(m.all_finite());
}

}  // namespace
}  // namespace maca
