// Copyright 2026 The dam Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dam/cli/commands.hpp"

using namespace dam;
using namespace dam::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dam_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig tiny_config(const fs::path& root) {
  ExperimentConfig c;
  c.data_root = (root / "data").string();
  c.output_dir = (root / "runs").string();
  c.source_train = 6;
  c.source_test = 3;
  c.target_train = 6;
  c.target_test = 3;
  c.train.total_iters = 4;
  c.train.iters_stage1 = 2;
  c.shifter_schedule.iterations = 2;
  c.ablation_max_n = 1;
  c.ablation_seeds = {1};
  return c;
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream is(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DAM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json load_json(const fs::path& p) {
  std::ifstream is(p);
  return json::parse(is);
}

}  // namespace

TEST(Config, JsonAndFileRoundTrip) {
  const auto dir = scratch("config");
  ExperimentConfig c = tiny_config(dir);
  c.betas = {5, 10, 7.5};
  c.mrl_reduction = mrl::Reduction::sum;
  c.eval_split = "source_test";
  save_config(dir / "c.json", c);
  const auto back = load_config(dir / "c.json");
  EXPECT_TRUE(back == c);
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_TRUE(config_from_json(json::object()) == ExperimentConfig{});
}

TEST(Config, RejectsUnknownKeysWrongTypesAndInconsistency) {
  EXPECT_THROW(config_from_json({{"sed", 3}}), ConfigError);
  EXPECT_THROW(config_from_json({{"train", {{"total_iter", 3}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"seed", "one"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"n", 2}}), ConfigError);  // three kinds by default
  EXPECT_NO_THROW(config_from_json({{"n", 3}}));
  EXPECT_THROW(config_from_json({{"shifters", {{"betas", {1.0}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"shifters", {{"kinds", {"bogus"}}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"mrl", {{"reduction", "max"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"eval", {{"split", "target_train"}}}}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/dam.json"), ConfigError);
  try {
    config_from_json({{"benchmark", {{"source_style", {{"palete", 1}}}}}});
    FAIL() << "nested unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("benchmark.source_style.palete"), std::string::npos);
  }
}

TEST(GenData, ByteIdenticalAcrossRunsAndSeedSensitive) {
  const auto dir = scratch("gen");
  auto c = tiny_config(dir);
  c.data_root = (dir / "a").string();
  std::ostringstream log;
  cmd_gen_data(c, log);
  c.data_root = (dir / "b").string();
  cmd_gen_data(c, log);
  const auto a = read_tree(dir / "a"), b = read_tree(dir / "b");
  EXPECT_GE(a.size(), 4u * 3u);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(fs::exists(dir / "a" / ".dam.lock"));
  c.seed = 2;
  c.data_root = (dir / "c").string();
  cmd_gen_data(c, log);
  EXPECT_NE(read_tree(dir / "c"), a);
}

TEST(TrainShifters, EmptyKindsWarnsAndTrainsNothing) {
  const auto dir = scratch("nokinds");
  auto c = tiny_config(dir);
  c.kinds.clear();
  std::ostringstream log;
  EXPECT_TRUE(cmd_train_shifters(c, log).empty());
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST(DirectoryLock, RejectsConcurrentUseAndReleases) {
  const auto dir = scratch("lock");
  {
    DirectoryLock a(dir);
    EXPECT_THROW(DirectoryLock b(dir), std::runtime_error);
    auto c = tiny_config(dir);
    c.data_root = dir.string();
    std::ostringstream log;
    EXPECT_THROW(cmd_gen_data(c, log), std::runtime_error);
  }
  EXPECT_NO_THROW(DirectoryLock again(dir));
}

TEST(Ablation, OffsetsAreMedianDifferences) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_THROW(median({}), std::invalid_argument);
  std::vector<AblationRow> rows(3);
  rows[0].n = 0;
  rows[0].dd.map = {0.10, 0.20, 0.15};
  rows[0].dd_mrl.map = {0.05, 0.01, 0.02};
  rows[1].n = 1;
  rows[1].dd.map = {0.4, 0.3, 0.5};
  rows[1].dd_mrl.map = {0.45, 0.6, 0.5};
  rows[2].n = 2;
  rows[2].dd.map = {0.4};
  rows[2].dd_mrl.failures = {"dd_mrl_n2_s1: diverged"};
  for (auto& r : rows)
    for (auto* cell : {&r.dd, &r.dd_mrl}) {
      cell->acc = cell->map;
      cell->miou = cell->map;
    }
  const auto j = ablation_json(rows, {1, 2, 3});
  EXPECT_EQ(j["schema"], kAblationSchema);
  EXPECT_FALSE(j["rows"][0].contains("offset"));
  EXPECT_NEAR(j["rows"][1]["offset"].get<double>(), 0.5 - 0.4, 1e-15);
  EXPECT_FALSE(j["rows"][2].contains("offset"));
  EXPECT_FALSE(j["rows"][2]["dd_mrl"].contains("median_map"));
  // Offsets recomputed from the per-seed lists agree with the stored ones.
  for (const auto& r : j["rows"])
    if (r.contains("offset"))
      EXPECT_EQ(r["offset"].get<double>(), median(r["dd_mrl"]["map"].get<std::vector<double>>()) -
                                               median(r["dd"]["map"].get<std::vector<double>>()));
  const auto table = ablation_table(j);
  EXPECT_NE(table.find("+10.0"), std::string::npos);
  EXPECT_NE(table.find("n/a"), std::string::npos);
}

TEST(Plot, WritesChartsAndRejectsMissingFiles) {
  const auto dir = scratch("plot");
  eval::MetricsReport r;
  r.class_names = {"disk", "square", "triangle", "ring", "cross"};
  r.per_class_ap = {0.5, 0.25, std::nullopt, 1.0, 0.0};
  r.map = 0.4375;
  r.errors = {3, 2, 1};
  r.label = "dd_mrl_n3 <b>";
  fs::create_directories(dir / "run");
  eval::write_metrics_file(dir / "run" / "metrics.json", r);
  EXPECT_THROW(cmd_plot({dir / "run" / "metrics.json", dir / "nope.json"}, dir / "plots"), std::runtime_error);
  EXPECT_THROW(cmd_plot({}, dir / "plots"), std::invalid_argument);
  const auto out = cmd_plot({dir / "run" / "metrics.json"}, dir / "plots");
  ASSERT_EQ(out.size(), 2u);
  for (const auto& p : out) {
    const auto svg = read_tree(dir / "plots").at(p.filename().string());
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("&lt;b&gt;"), std::string::npos);
    EXPECT_EQ(svg.find("<b>"), std::string::npos);
  }
}

TEST(Binary, PipelineAndExitCodes) {
  const auto dir = scratch("binary");
  auto c = tiny_config(dir);
  const auto cfg = (dir / "c.json").string();
  save_config(cfg, c);

  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("gen-data"), 1);                               // --config is required
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "missing.json").string()), 1);
  std::ofstream(dir / "bad.json") << R"({"trian": {}})";
  EXPECT_EQ(run_cli("gen-data --config " + (dir / "bad.json").string()), 1);
  EXPECT_EQ(run_cli("train --baseline --config " + cfg), 1);     // no data yet

  ASSERT_EQ(run_cli("gen-data --config " + cfg), 0);
  EXPECT_EQ(run_cli("train --dd-only --baseline --config " + cfg), 1);
  EXPECT_EQ(run_cli("train --config " + cfg), 1);                 // no shifters yet
  ASSERT_EQ(run_cli("train --baseline --config " + cfg), 0);
  const auto ckpt = dir / "runs" / "train" / "baseline" / "detector.ckpt";
  ASSERT_TRUE(fs::exists(ckpt));
  ASSERT_EQ(run_cli("eval --config " + cfg + " --checkpoint " + ckpt.string()), 0);
  const auto metrics = ckpt.parent_path() / "metrics.json";
  ASSERT_TRUE(fs::exists(metrics));
  EXPECT_EQ(eval::read_metrics_file(metrics).label, "baseline");
  EXPECT_EQ(run_cli("eval --config " + cfg + " --checkpoint " + (dir / "none.ckpt").string()), 1);
  EXPECT_EQ(run_cli("plot --config " + cfg + " " + metrics.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "runs" / "plots" / "class_ap.svg"));
  EXPECT_EQ(run_cli("plot --config " + cfg + " " + (dir / "none.json").string()), 1);

  // A held lock is an input error.
  {
    DirectoryLock held(ckpt.parent_path());
    EXPECT_EQ(run_cli("train --baseline --config " + cfg), 1);
  }

  // A divergent run exits with 2.
  auto hot = c;
  hot.train.lr_stage1 = 1e30;
  hot.train.clip_norm = 0;
  save_config(dir / "hot.json", hot);
  EXPECT_EQ(run_cli("train --baseline --config " + (dir / "hot.json").string()), 2);
}

TEST(Binary, ShiftersTrainAndAblationRuns) {
  const auto dir = scratch("ablation");
  auto c = tiny_config(dir);
  c.kinds = {shifter::ConstraintKind::color_preservation};
  const auto cfg = (dir / "c.json").string();
  save_config(cfg, c);
  ASSERT_EQ(run_cli("gen-data --config " + cfg), 0);
  ASSERT_EQ(run_cli("train-shifters --config " + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "runs" / "shifters" / "shifter_1.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "runs" / "shifters" / "translation_grid.png"));
  ASSERT_EQ(run_cli("train --config " + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "runs" / "train" / "dd_mrl_n1" / "history.csv"));
  ASSERT_EQ(run_cli("ablation --config " + cfg), 0);
  const auto j = load_json(dir / "runs" / "ablation" / "ablation.json");
  ASSERT_EQ(j["rows"].size(), 2u);
  const auto& r1 = j["rows"][1];
  ASSERT_TRUE(r1.contains("offset"));
  EXPECT_EQ(r1["offset"].get<double>(), median(r1["dd_mrl"]["map"].get<std::vector<double>>()) -
                                            median(r1["dd"]["map"].get<std::vector<double>>()));
}
