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

#ifndef DAM_SYNTHDATA_BENCHMARK_HPP
#define DAM_SYNTHDATA_BENCHMARK_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "dam/core/dataset_io.hpp"
#include "dam/synthdata/render.hpp"

namespace dam::synth {

/// Light saturated shapes on a dark, nearly flat background.
inline DomainStyle default_source_style() {
  DomainStyle s;
  s.palette = {{0.90f, 0.20f, 0.20f}, {0.20f, 0.80f, 0.25f}, {0.25f, 0.35f, 0.95f},
               {0.95f, 0.85f, 0.15f}, {0.85f, 0.25f, 0.85f}};
  s.background_mode = BackgroundMode::flat;
  s.background = {0.12f, 0.12f, 0.14f};
  s.background_end = s.background;
  s.texture_strength = 0.04;
  s.edge_softness = 0.0;
  return s;
}

/// Source palette remapped to muted tones over a mid-grey, noisy backdrop:
/// hue, saturation and local contrast all shift, geometry does not.
inline DomainStyle default_target_style() {
  DomainStyle s;
  s.palette = {{0.60f, 0.35f, 0.20f}, {0.25f, 0.45f, 0.55f}, {0.55f, 0.25f, 0.45f},
               {0.25f, 0.55f, 0.45f}, {0.70f, 0.70f, 0.65f}};
  s.background_mode = BackgroundMode::noise;
  s.background = {0.45f, 0.42f, 0.36f};
  s.background_end = s.background;
  s.texture_strength = 0.15;
  s.edge_softness = 0.5;
  return s;
}

struct BenchmarkConfig {
  SceneSpec scene;
  DomainStyle source_style = default_source_style();
  DomainStyle target_style = default_target_style();
  int source_train = 400;
  int source_test = 100;
  int target_train = 400;
  int target_test = 200;
  std::uint64_t seed = 1;
};

struct Benchmark {
  LabeledDataset source_train;
  LabeledDataset source_test;
  UnlabeledDataset target_train;
  // Labels of the target domain exist only here, for evaluation.
  LabeledDataset target_test;
};

enum class Split : std::uint64_t { source_train = 1, source_test = 2, target_train = 3, target_test = 4 };

inline std::string split_dir_name(Split s) {
  switch (s) {
    case Split::source_train: return "source_train";
    case Split::source_test: return "source_test";
    case Split::target_train: return "target_train";
    case Split::target_test: return "target_test";
  }
  return "?";
}

/// Seed of image `index` in `split`; splits draw from disjoint streams.
inline std::uint64_t image_seed(std::uint64_t root, Split split, int index) {
  return derive_seed(root, static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(index));
}

inline std::string image_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

inline LabeledDataset render_split(const BenchmarkConfig& cfg, Split split, const DomainStyle& style,
                                   int count) {
  if (count < 0) throw std::invalid_argument("generate_benchmark: negative split size");
  LabeledDataset d;
  d.class_names = cfg.scene.class_names();
  d.split = split_dir_name(split);
  d.items.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    auto item = render_scene(cfg.scene, style, image_seed(cfg.seed, split, i));
    item.id = image_id(i);
    d.items.push_back(std::move(item));
  }
  return d;
}

inline Benchmark generate_benchmark(const BenchmarkConfig& cfg) {
  cfg.scene.validate();
  cfg.source_style.validate();
  cfg.target_style.validate();
  if (cfg.source_style == cfg.target_style)
    throw std::invalid_argument("generate_benchmark: source and target styles must differ");
  Benchmark b;
  b.source_train = render_split(cfg, Split::source_train, cfg.source_style, cfg.source_train);
  b.source_test = render_split(cfg, Split::source_test, cfg.source_style, cfg.source_test);
  b.target_train = strip_labels(render_split(cfg, Split::target_train, cfg.target_style, cfg.target_train));
  b.target_test = render_split(cfg, Split::target_test, cfg.target_style, cfg.target_test);
  return b;
}

inline void write_benchmark(const std::filesystem::path& root, const Benchmark& b) {
  write_labeled_dataset(root / split_dir_name(Split::source_train), b.source_train);
  write_labeled_dataset(root / split_dir_name(Split::source_test), b.source_test);
  write_unlabeled_dataset(root / split_dir_name(Split::target_train), b.target_train);
  write_labeled_dataset(root / split_dir_name(Split::target_test), b.target_test);
}

}  // namespace dam::synth

#endif  // DAM_SYNTHDATA_BENCHMARK_HPP
