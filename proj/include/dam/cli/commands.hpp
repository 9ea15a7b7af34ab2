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

#ifndef DAM_CLI_COMMANDS_HPP
#define DAM_CLI_COMMANDS_HPP

// The subcommands behind tools/dam. Each takes a resolved config and writes
// into the configured directories; nothing here reads the clock.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dam/cli/config.hpp"
#include "dam/cli/plot.hpp"
#include "dam/core/dataset_io.hpp"
#include "dam/core/png_io.hpp"
#include "dam/eval/report.hpp"
#include "dam/shifter/train.hpp"
#include "dam/trainer/trainer.hpp"

namespace dam::cli {

namespace fs = std::filesystem;

/// Exclusive lock on a working directory for the lifetime of the object.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / ".dam.lock") {
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
      throw std::runtime_error("directory " + dir.string() +
                               " is in use by another run (remove " + path_.string() +
                               " if that run is gone)");
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

enum class Method { baseline, dd, dd_mrl };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::dd: return "dd";
    case Method::dd_mrl: return "dd_mrl";
  }
  return "?";
}

inline std::string run_label(Method m, int n) {
  return m == Method::baseline ? "baseline" : method_name(m) + "_n" + std::to_string(n);
}

inline fs::path shifter_dir(const ExperimentConfig& c) { return fs::path(c.output_dir) / "shifters"; }
inline fs::path shifter_path(const ExperimentConfig& c, int i) {
  return shifter_dir(c) / ("shifter_" + std::to_string(i) + ".ckpt");
}

inline const char* kSplits[] = {"source_train", "source_test", "target_train", "target_test"};

// ---------------------------------------------------------------- gen-data

inline void cmd_gen_data(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  const fs::path root(cfg.data_root);
  DirectoryLock lock(root);
  const auto bench = synth::generate_benchmark(cfg.benchmark());
  for (const char* s : kSplits) fs::remove_all(root / s);
  synth::write_benchmark(root, bench);
  log << "wrote " << bench.source_train.size() << "/" << bench.source_test.size()
      << " source and " << bench.target_train.size() << "/" << bench.target_test.size()
      << " target images to " << root.string() << "\n";
}

struct LoadedData {
  LabeledDataset source_train;
  UnlabeledDataset target_train;
  LabeledDataset source_test;
  LabeledDataset target_test;

  const LabeledDataset& eval_set(const std::string& split) const {
    return split == "source_test" ? source_test : target_test;
  }
};

inline LoadedData load_data(const ExperimentConfig& cfg, bool with_tests = true) {
  const fs::path root(cfg.data_root);
  if (!fs::exists(root / "source_train"))
    throw std::runtime_error("no dataset under " + root.string() + " (run gen-data first)");
  LoadedData d;
  d.source_train = read_labeled_dataset(root / "source_train");
  d.target_train = read_unlabeled_dataset(root / "target_train");
  if (with_tests) {
    d.source_test = read_labeled_dataset(root / "source_test");
    d.target_test = read_labeled_dataset(root / "target_test");
  }
  return d;
}

// ---------------------------------------------------------- train-shifters

/// Trains one shifter per configured constraint kind, in order.
inline std::vector<shifter::ShifterBundle<float>> train_shifters(
    const ExperimentConfig& cfg, const std::vector<Image>& source, const std::vector<Image>& target,
    std::ostream& log) {
  std::vector<shifter::ShifterBundle<float>> out;
  for (int i = 0; i < cfg.n(); ++i) {
    const auto kind = cfg.kinds[static_cast<std::size_t>(i)];
    auto b = shifter::ShifterBundle<float>::create({kind, cfg.beta(static_cast<std::size_t>(i))},
                                                   cfg.generator, cfg.shifter_disc,
                                                   cfg.shifter_init_seed(i + 1), cfg.gan_mode);
    auto sched = cfg.shifter_schedule;
    sched.seed = cfg.shifter_train_seed(i + 1);
    try {
      shifter::train_shifter(b, source, target, sched);
    } catch (const DivergenceError& e) {
      throw DivergenceError("shifter " + std::to_string(i + 1), e.iteration());
    }
    log << "shifter " << (i + 1) << " (" << shifter::to_string(kind) << ") trained\n";
    out.push_back(std::move(b));
  }
  return out;
}

/// Rows: source, then each shifter's translation; one column per image.
inline Image translation_grid(const std::vector<shifter::ShifterBundle<float>>& shifters,
                              const std::vector<Image>& images) {
  if (images.empty()) return Image({3, 1, 1});
  const int H = image_height(images[0]), W = image_width(images[0]);
  const int rows = static_cast<int>(shifters.size()) + 1, cols = static_cast<int>(images.size());
  Image grid({3, rows * H, cols * W});
  for (int c = 0; c < cols; ++c) {
    const auto& src = images[static_cast<std::size_t>(c)];
    for (int r = 0; r < rows; ++r) {
      const Image tile = r == 0 ? src : shifter::translate(shifters[static_cast<std::size_t>(r - 1)], src);
      for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) grid.at(ch, r * H + y, c * W + x) = tile.at(ch, y, x);
    }
  }
  return grid;
}

inline std::vector<fs::path> cmd_train_shifters(const ExperimentConfig& cfg,
                                                std::ostream& log = std::cerr) {
  if (cfg.kinds.empty()) {
    log << "warning: no constraint kinds configured; nothing to train\n";
    return {};
  }
  const auto data = load_data(cfg);
  std::vector<Image> S, T;
  for (const auto& x : data.source_train.items) S.push_back(x.pixels);
  for (const auto& x : data.target_train.items) T.push_back(x.pixels);
  DirectoryLock lock(cfg.output_dir);
  const auto shifters = train_shifters(cfg, S, T, log);
  fs::create_directories(shifter_dir(cfg));
  std::vector<fs::path> paths;
  for (int i = 0; i < cfg.n(); ++i) {
    paths.push_back(shifter_path(cfg, i + 1));
    shifter::save_shifter(paths.back(), shifters[static_cast<std::size_t>(i)]);
  }
  std::vector<Image> sample;
  const auto& probe = data.source_test.empty() ? data.source_train : data.source_test;
  for (std::size_t k = 0; k < std::min<std::size_t>(8, probe.size()); ++k)
    sample.push_back(probe[k].pixels);
  write_png(shifter_dir(cfg) / "translation_grid.png", translation_grid(shifters, sample));
  return paths;
}

inline std::vector<shifter::ShifterBundle<float>> load_shifters(const ExperimentConfig& cfg, int n) {
  std::vector<shifter::ShifterBundle<float>> out;
  for (int i = 1; i <= n; ++i) {
    const auto p = shifter_path(cfg, i);
    if (!fs::exists(p))
      throw std::runtime_error("missing shifter checkpoint " + p.string() +
                               " (run train-shifters first)");
    out.push_back(shifter::load_shifter<float>(p));
  }
  return out;
}

// ------------------------------------------------------------------- train

struct RunOutput {
  detector::Detector<float> detector;
  std::vector<trainer::LossRecord> history;
};

/// Trains one detector. `shifted` holds the translated source set of at
/// least n shifters; only the first n are used.
inline RunOutput train_detector(const ExperimentConfig& cfg, const LoadedData& data,
                                const std::vector<std::vector<Image>>& shifted, Method method, int n,
                                std::uint64_t replicate) {
  trainer::TrainInputs in;
  in.source = &data.source_train;
  in.target = &data.target_train;
  if (method != Method::baseline)
    in.shifted.assign(shifted.begin(), shifted.begin() + n);
  auto sched = cfg.train;
  sched.seed = cfg.detector_seed(replicate);
  const bool mrl = method == Method::dd_mrl && cfg.mrl_enabled;
  const int used = static_cast<int>(in.shifted.size());
  auto r = trainer::train<float>(in, sched, cfg.detector, cfg.mrl_disc(used), cfg.framework(mrl));
  return {std::move(r.detector), std::move(r.history)};
}

inline fs::path cmd_train(const ExperimentConfig& cfg, Method method,
                          std::optional<fs::path> out_dir = std::nullopt,
                          std::ostream& log = std::cerr) {
  const int n = method == Method::baseline ? 0 : cfg.n();
  const fs::path dir = out_dir ? *out_dir : fs::path(cfg.output_dir) / "train" / run_label(method, n);
  const auto data = load_data(cfg, false);
  const auto shifters = load_shifters(cfg, n);
  const auto shifted = trainer::precompute_shifted(data.source_train, shifters);
  DirectoryLock lock(dir);
  auto run = train_detector(cfg, data, shifted, method, n, 0);
  const auto ckpt = dir / "detector.ckpt";
  detector::save_detector(ckpt, run.detector,
                          {{"method", method_name(method)}, {"n", n}, {"seed", cfg.seed}});
  std::ofstream hist(dir / "history.csv", std::ios::binary);
  trainer::write_history_csv(hist, run.history);
  save_config(dir / "config.json", cfg);
  log << run_label(method, n) << ": " << run.history.size() << " iterations, checkpoint "
      << ckpt.string() << "\n";
  return ckpt;
}

// -------------------------------------------------------------------- eval

inline eval::MetricsReport evaluate_and_write(const detector::Detector<float>& det,
                                              const LabeledDataset& test, const eval::EvalOptions& opt,
                                              const fs::path& dir, const std::string& label) {
  std::vector<Detection> dets;
  auto report = eval::evaluate(det, test, opt, &dets);
  report.label = label;
  fs::create_directories(dir);
  eval::write_metrics_file(dir / "metrics.json", report);
  std::ofstream(dir / "report.txt", std::ios::binary) << eval::format_report(report);
  std::ofstream dump(dir / "detections.txt", std::ios::binary);
  eval::write_detections(dump, dets);
  return report;
}

inline eval::MetricsReport cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint,
                                    std::optional<fs::path> out_dir = std::nullopt,
                                    std::ostream& log = std::cerr) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("no checkpoint at " + checkpoint.string());
  nlohmann::json extra;
  const auto det = detector::load_detector<float>(checkpoint, &extra);
  const auto data = load_data(cfg);
  const fs::path dir = out_dir ? *out_dir : checkpoint.parent_path();
  DirectoryLock lock(dir);
  std::string label = extra.value("method", std::string("detector"));
  if (extra.contains("n") && label != "baseline") label += "_n" + std::to_string(extra["n"].get<int>());
  const auto report = evaluate_and_write(det, data.eval_set(cfg.eval_split), cfg.eval, dir, label);
  log << eval::format_report(report);
  return report;
}

// ---------------------------------------------------------------- ablation

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of an empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct AblationCell {
  std::vector<double> map, acc, miou;
  std::vector<std::string> failures;
};

struct AblationRow {
  int n = 0;
  AblationCell dd, dd_mrl;
};

inline constexpr const char* kAblationSchema = "dam-ablation/1";

inline nlohmann::json cell_json(const AblationCell& c) {
  nlohmann::json j = {{"map", c.map}, {"gt_box_accuracy", c.acc}, {"rpn_best_overlap_miou", c.miou},
                      {"failures", c.failures}};
  if (!c.map.empty()) {
    j["median_map"] = median(c.map);
    j["median_gt_box_accuracy"] = median(c.acc);
    j["median_rpn_best_overlap_miou"] = median(c.miou);
  }
  return j;
}

inline nlohmann::json ablation_json(const std::vector<AblationRow>& rows,
                                    const std::vector<std::uint64_t>& seeds) {
  nlohmann::json out = {{"schema", kAblationSchema}, {"seeds", seeds}, {"rows", nlohmann::json::array()}};
  for (const auto& r : rows) {
    nlohmann::json row = {{"n", r.n}, {"dd", cell_json(r.dd)}, {"dd_mrl", cell_json(r.dd_mrl)}};
    if (r.n >= 1 && !r.dd.map.empty() && !r.dd_mrl.map.empty())
      row["offset"] = median(r.dd_mrl.map) - median(r.dd.map);
    out["rows"].push_back(row);
  }
  return out;
}

inline std::string ablation_table(const nlohmann::json& j) {
  std::string s = "#SD |     DD | DD+MRL | offset\n----+--------+--------+-------\n";
  char buf[128];
  auto cell = [](const nlohmann::json& c) -> std::string {
    if (!c.contains("median_map")) return "   n/a";
    char b[32];
    std::snprintf(b, sizeof b, "%6.1f", 100.0 * c["median_map"].get<double>());
    return b;
  };
  for (const auto& r : j["rows"]) {
    std::string off = "      ";
    if (r.contains("offset")) {
      char b[32];
      std::snprintf(b, sizeof b, "%+6.1f", 100.0 * r["offset"].get<double>());
      off = b;
    }
    std::snprintf(buf, sizeof buf, "%3d | %s | %s | %s\n", r["n"].get<int>(), cell(r["dd"]).c_str(),
                  cell(r["dd_mrl"]).c_str(), off.c_str());
    s += buf;
  }
  s += "(median mAP@0.5 in points over seeds; n = 0 DD is the source-only baseline)\n";
  return s;
}

/// {DD, DD+MRL} x n in 0..max_n x seeds, each trained and evaluated.
inline nlohmann::json cmd_ablation(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  const auto data = load_data(cfg);
  const auto shifters = load_shifters(cfg, cfg.ablation_max_n);
  const auto shifted = trainer::precompute_shifted(data.source_train, shifters);
  const fs::path root = fs::path(cfg.output_dir) / "ablation";
  DirectoryLock lock(root);
  std::vector<AblationRow> rows;
  for (int n = 0; n <= cfg.ablation_max_n; ++n) {
    AblationRow row;
    row.n = n;
    for (Method m : {Method::dd, Method::dd_mrl}) {
      auto& cell = m == Method::dd ? row.dd : row.dd_mrl;
      const Method eff = m == Method::dd && n == 0 ? Method::baseline : m;
      for (std::uint64_t seed : cfg.ablation_seeds) {
        const std::string label = method_name(m) + "_n" + std::to_string(n) + "_s" + std::to_string(seed);
        try {
          auto run = train_detector(cfg, data, shifted, eff, n, seed);
          const auto rep = evaluate_and_write(run.detector, data.eval_set(cfg.eval_split), cfg.eval,
                                              root / label, label);
          cell.map.push_back(rep.map);
          cell.acc.push_back(rep.gt_box_accuracy);
          cell.miou.push_back(rep.miou);
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s: mAP %.4f acc %.4f mIoU %.4f\n", label.c_str(), rep.map,
                        rep.gt_box_accuracy, rep.miou);
          log << buf;
        } catch (const std::exception& e) {
          cell.failures.push_back(label + ": " + e.what());
          log << label << " failed: " << e.what() << "\n";
        }
      }
    }
    rows.push_back(std::move(row));
  }
  const auto j = ablation_json(rows, cfg.ablation_seeds);
  std::ofstream(root / "ablation.json", std::ios::binary) << j.dump(2) << "\n";
  const auto table = ablation_table(j);
  std::ofstream(root / "ablation.txt", std::ios::binary) << table;
  log << table;
  return j;
}

// -------------------------------------------------------------------- plot

inline std::vector<fs::path> cmd_plot(const std::vector<fs::path>& reports, const fs::path& out_dir) {
  if (reports.empty()) throw std::invalid_argument("plot: no metrics files given");
  std::vector<eval::MetricsReport> rs;
  for (const auto& p : reports) {
    if (!fs::exists(p)) throw std::runtime_error("plot: missing metrics file " + p.string());
    rs.push_back(eval::read_metrics_file(p));
    if (rs.back().label.empty()) rs.back().label = p.parent_path().filename().string();
  }
  fs::create_directories(out_dir);
  const auto a = out_dir / "class_ap.svg", e = out_dir / "errors.svg";
  std::ofstream(a, std::ios::binary) << class_ap_chart(rs);
  std::ofstream(e, std::ios::binary) << error_chart(rs);
  return {a, e};
}

}  // namespace dam::cli

#endif  // DAM_CLI_COMMANDS_HPP
