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

#ifndef DAM_CLI_CONFIG_HPP
#define DAM_CLI_CONFIG_HPP

// Experiment configuration: one JSON document, every key optional, unknown
// keys rejected by name. All randomness derives from the root `seed`.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dam/detector/detector.hpp"
#include "dam/eval/report.hpp"
#include "dam/mrl/mrl.hpp"
#include "dam/shifter/bundle.hpp"
#include "dam/shifter/train.hpp"
#include "dam/synthdata/benchmark.hpp"
#include "dam/trainer/trainer.hpp"

namespace dam::cli {

using nlohmann::json;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::string data_root = "data";
  std::string output_dir = "runs";
  std::uint64_t seed = 1;

  synth::SceneSpec scene;
  synth::DomainStyle source_style = synth::default_source_style();
  synth::DomainStyle target_style = synth::default_target_style();
  int source_train = 400, source_test = 100, target_train = 400, target_test = 200;

  std::vector<shifter::ConstraintKind> kinds{shifter::ConstraintKind::color_preservation,
                                             shifter::ConstraintKind::reconstruction,
                                             shifter::ConstraintKind::both};
  std::vector<double> betas;  // empty: per-kind default
  shifter::GanMode gan_mode = shifter::GanMode::log_loss;
  shifter::GeneratorConfig generator;
  shifter::DiscriminatorConfig shifter_disc;
  shifter::ShifterSchedule shifter_schedule;

  detector::DetectorConfig detector{.backbone_widths = {32, 64, 64, 64}, .rpn_hidden = 64};

  bool mrl_enabled = true;
  double grl_lambda = 1.0;
  bool grl_warmup = false;
  double grl_gamma = 10.0;
  mrl::Reduction mrl_reduction = mrl::Reduction::mean;
  int mrl_hidden = 32;
  double mrl_weight = 1.0, loc_weight = 1.0, cls_weight = 1.0;

  trainer::TrainSchedule train;

  eval::EvalOptions eval;
  std::string eval_split = "target_test";

  std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
  int ablation_max_n = 3;

  int n() const { return static_cast<int>(kinds.size()); }

  double beta(std::size_t i) const {
    return betas.empty() ? shifter::default_beta(kinds.at(i)) : betas.at(i);
  }

  synth::BenchmarkConfig benchmark() const {
    synth::BenchmarkConfig b;
    b.scene = scene;
    b.source_style = source_style;
    b.target_style = target_style;
    b.source_train = source_train;
    b.source_test = source_test;
    b.target_train = target_train;
    b.target_test = target_test;
    b.seed = seed;
    return b;
  }

  trainer::FrameworkOptions framework(bool use_mrl) const {
    trainer::FrameworkOptions f;
    f.use_mrl = use_mrl;
    f.grl = {grl_lambda, grl_warmup, grl_gamma};
    f.reduction = mrl_reduction;
    f.mrl_weight = mrl_weight;
    f.loc_weight = loc_weight;
    f.cls_weight = cls_weight;
    return f;
  }

  mrl::DiscriminatorConfig mrl_disc(int shifted) const {
    return {detector.feature_channels(), mrl_hidden, shifted};
  }

  void validate() const {
    scene.validate();
    source_style.validate();
    target_style.validate();
    if (source_train < 1 || target_train < 1 || source_test < 0 || target_test < 0)
      throw ConfigError("config: dataset sizes must be positive");
    if (!betas.empty() && betas.size() != kinds.size())
      throw ConfigError("config: shifters.betas must list one weight per constraint kind");
    for (double b : betas)
      if (!(b >= 0)) throw ConfigError("config: shifters.betas must be >= 0");
    detector.validate();
    if (detector.num_classes != static_cast<int>(scene.classes.size()))
      throw ConfigError("config: detector.num_classes must equal the number of scene classes");
    train.validate();
    if (eval_split != "target_test" && eval_split != "source_test")
      throw ConfigError("config: eval.split must be target_test or source_test");
    if (ablation_max_n < 0 || ablation_max_n > n())
      throw ConfigError("config: ablation.max_n must lie in [0, number of shifters]");
    if (ablation_seeds.empty()) throw ConfigError("config: ablation.seeds is empty");
  }

  /// Seeds of each stochastic stage, all derived from the root seed.
  std::uint64_t shifter_init_seed(int i) const { return synth::derive_seed(seed, 101, i); }
  std::uint64_t shifter_train_seed(int i) const { return synth::derive_seed(seed, 102, i); }
  std::uint64_t detector_seed(std::uint64_t replicate) const {
    return synth::derive_seed(seed, 103, replicate);
  }
};

namespace detail {

// Shortest decimal that reads back as the same float.
inline double short_decimal(float v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::strtod(std::string(buf, r.ptr).c_str(), nullptr);
}

inline json rgb_json(const synth::Rgb& c) {
  return json::array({short_decimal(c[0]), short_decimal(c[1]), short_decimal(c[2])});
}

inline json style_json(const synth::DomainStyle& s) {
  json pal = json::array();
  for (const auto& c : s.palette) pal.push_back(rgb_json(c));
  return {{"palette", pal},
          {"background_mode", std::string(synth::to_string(s.background_mode))},
          {"background", rgb_json(s.background)},
          {"background_end", rgb_json(s.background_end)},
          {"texture_strength", s.texture_strength},
          {"edge_softness", s.edge_softness}};
}

/// Rejects keys of `j` absent from `known`, naming the full dotted path.
inline void check_keys(const json& j, const json& known, const std::string& path) {
  if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    const std::string full = path.empty() ? k : path + "." + k;
    if (!known.contains(k)) throw ConfigError("config: unknown key '" + full + "'");
    if (known[k].is_object() && !known[k].empty()) check_keys(v, known[k], full);
  }
}

template <class V>
void read(const json& j, const char* key, V& out, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ConfigError("config: key '" + (path.empty() ? std::string(key) : path + "." + key) +
                      "' has the wrong type");
  }
}

inline synth::Rgb read_rgb(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("config: '" + path + "' must be [r, g, b]");
  synth::Rgb c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ConfigError("config: '" + path + "' must be numeric");
    c[i] = j[i].get<float>();
  }
  return c;
}

inline void read_style(const json& j, synth::DomainStyle& s, const std::string& path) {
  if (j.contains("palette")) {
    s.palette.clear();
    for (const auto& c : j.at("palette")) s.palette.push_back(read_rgb(c, path + ".palette"));
  }
  if (j.contains("background_mode")) {
    try {
      s.background_mode = synth::parse_background_mode(j.at("background_mode").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError("config: " + path + ".background_mode: " + e.what());
    }
  }
  if (j.contains("background")) s.background = read_rgb(j.at("background"), path + ".background");
  if (j.contains("background_end"))
    s.background_end = read_rgb(j.at("background_end"), path + ".background_end");
  read(j, "texture_strength", s.texture_strength, path);
  read(j, "edge_softness", s.edge_softness, path);
}

}  // namespace detail

inline json config_to_json(const ExperimentConfig& c) {
  std::vector<std::string> kinds, classes;
  for (auto k : c.kinds) kinds.emplace_back(shifter::to_string(k));
  for (auto k : c.scene.classes) classes.emplace_back(synth::to_string(k));
  return {
      {"data_root", c.data_root},
      {"output_dir", c.output_dir},
      {"seed", c.seed},
      {"benchmark",
       {{"height", c.scene.height},
        {"width", c.scene.width},
        {"min_objects", c.scene.min_objects},
        {"max_objects", c.scene.max_objects},
        {"classes", classes},
        {"min_size", c.scene.min_size},
        {"max_size", c.scene.max_size},
        {"overlap_limit", c.scene.overlap_limit},
        {"max_retries", c.scene.max_retries},
        {"source_train", c.source_train},
        {"source_test", c.source_test},
        {"target_train", c.target_train},
        {"target_test", c.target_test},
        {"source_style", detail::style_json(c.source_style)},
        {"target_style", detail::style_json(c.target_style)}}},
      {"shifters",
       {{"kinds", kinds},
        {"betas", c.betas},
        {"gan_mode", std::string(shifter::to_string(c.gan_mode))},
        {"generator_width", c.generator.width},
        {"residual_blocks", c.generator.residual_blocks},
        {"identity_init", c.generator.identity_init},
        {"discriminator_width", c.shifter_disc.width},
        {"iterations", c.shifter_schedule.iterations},
        {"lr", c.shifter_schedule.lr},
        {"adam_beta1", c.shifter_schedule.adam_beta1},
        {"adam_beta2", c.shifter_schedule.adam_beta2},
        {"crop", c.shifter_schedule.crop},
        {"checkpoint_every", c.shifter_schedule.checkpoint_every}}},
      {"detector", detector::detector_config_to_json(c.detector)},
      {"mrl",
       {{"enabled", c.mrl_enabled},
        {"lambda", c.grl_lambda},
        {"warmup", c.grl_warmup},
        {"gamma", c.grl_gamma},
        {"reduction", c.mrl_reduction == mrl::Reduction::sum ? "sum" : "mean"},
        {"hidden", c.mrl_hidden},
        {"weight", c.mrl_weight}}},
      {"train",
       {{"total_iters", c.train.total_iters},
        {"iters_stage1", c.train.iters_stage1},
        {"lr_stage1", c.train.lr_stage1},
        {"lr_stage2", c.train.lr_stage2},
        {"accumulation_chunks", c.train.accumulation_chunks},
        {"momentum", c.train.momentum},
        {"weight_decay", c.train.weight_decay},
        {"clip_norm", c.train.clip_norm},
        {"checkpoint_every", c.train.checkpoint_every},
        {"loc_weight", c.loc_weight},
        {"cls_weight", c.cls_weight}}},
      {"eval",
       {{"split", c.eval_split},
        {"error_top_k", c.eval.error_top_k},
        {"all_points_ap", c.eval.all_points_ap},
        {"miou_proposals", c.eval.miou_proposals}}},
      {"ablation", {{"seeds", c.ablation_seeds}, {"max_n", c.ablation_max_n}}}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  // Optional "n" is accepted as a consistency check on shifters.kinds.
  json known = config_to_json(c);
  known["n"] = 0;
  detail::check_keys(j, known, "");
  using detail::read;
  read(j, "data_root", c.data_root, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "seed", c.seed, "");
  if (j.contains("benchmark")) {
    const auto& b = j["benchmark"];
    const std::string p = "benchmark";
    read(b, "height", c.scene.height, p);
    read(b, "width", c.scene.width, p);
    read(b, "min_objects", c.scene.min_objects, p);
    read(b, "max_objects", c.scene.max_objects, p);
    if (b.contains("classes")) {
      c.scene.classes.clear();
      for (const auto& k : b["classes"]) {
        try {
          c.scene.classes.push_back(synth::parse_shape_kind(k.get<std::string>()));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("config: benchmark.classes: ") + e.what());
        }
      }
    }
    read(b, "min_size", c.scene.min_size, p);
    read(b, "max_size", c.scene.max_size, p);
    read(b, "overlap_limit", c.scene.overlap_limit, p);
    read(b, "max_retries", c.scene.max_retries, p);
    read(b, "source_train", c.source_train, p);
    read(b, "source_test", c.source_test, p);
    read(b, "target_train", c.target_train, p);
    read(b, "target_test", c.target_test, p);
    if (b.contains("source_style")) detail::read_style(b["source_style"], c.source_style, p + ".source_style");
    if (b.contains("target_style")) detail::read_style(b["target_style"], c.target_style, p + ".target_style");
  }
  if (j.contains("shifters")) {
    const auto& s = j["shifters"];
    const std::string p = "shifters";
    if (s.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : s["kinds"]) {
        try {
          c.kinds.push_back(shifter::parse_constraint_kind(k.get<std::string>()));
        } catch (const std::exception& e) {
          throw ConfigError(std::string("config: shifters.kinds: ") + e.what());
        }
      }
    }
    read(s, "betas", c.betas, p);
    if (s.contains("gan_mode")) {
      try {
        c.gan_mode = shifter::parse_gan_mode(s["gan_mode"].get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("config: shifters.gan_mode: ") + e.what());
      }
    }
    read(s, "generator_width", c.generator.width, p);
    read(s, "residual_blocks", c.generator.residual_blocks, p);
    read(s, "identity_init", c.generator.identity_init, p);
    read(s, "discriminator_width", c.shifter_disc.width, p);
    read(s, "iterations", c.shifter_schedule.iterations, p);
    read(s, "lr", c.shifter_schedule.lr, p);
    read(s, "adam_beta1", c.shifter_schedule.adam_beta1, p);
    read(s, "adam_beta2", c.shifter_schedule.adam_beta2, p);
    read(s, "crop", c.shifter_schedule.crop, p);
    read(s, "checkpoint_every", c.shifter_schedule.checkpoint_every, p);
  }
  if (j.contains("detector")) {
    json merged = detector::detector_config_to_json(c.detector);
    merged.update(j["detector"]);
    try {
      c.detector = detector::detector_config_from_json(merged);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: detector: ") + e.what());
    }
  }
  if (j.contains("mrl")) {
    const auto& m = j["mrl"];
    const std::string p = "mrl";
    read(m, "enabled", c.mrl_enabled, p);
    read(m, "lambda", c.grl_lambda, p);
    read(m, "warmup", c.grl_warmup, p);
    read(m, "gamma", c.grl_gamma, p);
    std::string red = c.mrl_reduction == mrl::Reduction::sum ? "sum" : "mean";
    read(m, "reduction", red, p);
    if (red != "sum" && red != "mean") throw ConfigError("config: mrl.reduction must be sum or mean");
    c.mrl_reduction = red == "sum" ? mrl::Reduction::sum : mrl::Reduction::mean;
    read(m, "hidden", c.mrl_hidden, p);
    read(m, "weight", c.mrl_weight, p);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    const std::string p = "train";
    read(t, "total_iters", c.train.total_iters, p);
    read(t, "iters_stage1", c.train.iters_stage1, p);
    read(t, "lr_stage1", c.train.lr_stage1, p);
    read(t, "lr_stage2", c.train.lr_stage2, p);
    read(t, "accumulation_chunks", c.train.accumulation_chunks, p);
    read(t, "momentum", c.train.momentum, p);
    read(t, "weight_decay", c.train.weight_decay, p);
    read(t, "clip_norm", c.train.clip_norm, p);
    read(t, "checkpoint_every", c.train.checkpoint_every, p);
    read(t, "loc_weight", c.loc_weight, p);
    read(t, "cls_weight", c.cls_weight, p);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    const std::string p = "eval";
    read(e, "split", c.eval_split, p);
    read(e, "error_top_k", c.eval.error_top_k, p);
    read(e, "all_points_ap", c.eval.all_points_ap, p);
    read(e, "miou_proposals", c.eval.miou_proposals, p);
  }
  if (j.contains("ablation")) {
    read(j["ablation"], "seeds", c.ablation_seeds, "ablation");
    read(j["ablation"], "max_n", c.ablation_max_n, "ablation");
  }
  if (j.contains("n")) {
    int n = -1;
    read(j, "n", n, "");
    if (n != c.n())
      throw ConfigError("config: n = " + std::to_string(n) + " but shifters.kinds lists " +
                        std::to_string(c.n()) + " kinds");
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << config_to_json(c).dump(2) << "\n";
}

}  // namespace dam::cli

#endif  // DAM_CLI_CONFIG_HPP
