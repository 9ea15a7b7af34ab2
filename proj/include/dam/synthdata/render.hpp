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

#ifndef DAM_SYNTHDATA_RENDER_HPP
#define DAM_SYNTHDATA_RENDER_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "dam/core/png_io.hpp"
#include "dam/core/types.hpp"
#include "dam/synthdata/scene.hpp"

namespace dam::synth {

/// Thrown when objects cannot be placed within the retry budget.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(root) ^ a) ^ b);
}

struct PlacedObject {
  ShapeKind kind;
  int class_id;
  double cx, cy, half;  // inscribing square centre and half side
  Box box;              // tight box of the hard mask
  int palette_slot;
};

namespace detail {

// Tight box of the pixels whose centre-sampled 4x4 grid hits the shape.
inline bool tight_box(const PlacedObject& o, int W, int H, Box& out) {
  int x0 = W, y0 = H, x1 = -1, y1 = -1;
  const int px0 = std::max(0, static_cast<int>(std::floor(o.cx - o.half)) - 1);
  const int py0 = std::max(0, static_cast<int>(std::floor(o.cy - o.half)) - 1);
  const int px1 = std::min(W - 1, static_cast<int>(std::ceil(o.cx + o.half)) + 1);
  const int py1 = std::min(H - 1, static_cast<int>(std::ceil(o.cy + o.half)) + 1);
  for (int y = py0; y <= py1; ++y)
    for (int x = px0; x <= px1; ++x) {
      bool hit = false;
      for (int sy = 0; sy < 4 && !hit; ++sy)
        for (int sx = 0; sx < 4 && !hit; ++sx) {
          const double u = (x + (sx + 0.5) / 4.0 - o.cx) / o.half;
          const double v = (y + (sy + 0.5) / 4.0 - o.cy) / o.half;
          hit = shape_contains(o.kind, u, v);
        }
      if (hit) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  if (x1 < 0) return false;
  out = Box{double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
  return true;
}

// Fraction of the pixel footprint, widened by `soft` on each side, covered by the shape.
inline double coverage(const PlacedObject& o, int x, int y, double soft) {
  constexpr int kSamples = 4;
  const double span = 1.0 + 2.0 * soft;
  int hits = 0;
  for (int sy = 0; sy < kSamples; ++sy)
    for (int sx = 0; sx < kSamples; ++sx) {
      const double px = x - soft + span * (sx + 0.5) / kSamples;
      const double py = y - soft + span * (sy + 0.5) / kSamples;
      if (shape_contains(o.kind, (px - o.cx) / o.half, (py - o.cy) / o.half)) ++hits;
    }
  return static_cast<double>(hits) / (kSamples * kSamples);
}

}  // namespace detail

/// Samples the scene geometry for `seed`. Depends only on `spec` and `seed`.
inline std::vector<PlacedObject> sample_layout(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(seed, 0x6765));
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  auto uniform_real = [&](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  const int count = uniform_int(spec.min_objects, spec.max_objects);
  const int n_classes = static_cast<int>(spec.classes.size());
  std::vector<PlacedObject> placed;
  for (int k = 0; k < count; ++k) {
    bool ok = false;
    for (int attempt = 0; attempt < spec.max_retries && !ok; ++attempt) {
      PlacedObject o{};
      o.class_id = uniform_int(0, n_classes - 1);
      o.kind = spec.classes[static_cast<std::size_t>(o.class_id)];
      const int size = uniform_int(spec.min_size, spec.max_size);
      o.half = 0.5 * size;
      o.cx = uniform_real(o.half, spec.width - o.half);
      o.cy = uniform_real(o.half, spec.height - o.half);
      o.palette_slot = static_cast<int>(rng() % 1024);
      if (!detail::tight_box(o, spec.width, spec.height, o.box)) continue;
      ok = std::all_of(placed.begin(), placed.end(), [&](const PlacedObject& p) {
        return iou(p.box, o.box) <= spec.overlap_limit;
      });
      if (ok) placed.push_back(o);
    }
    if (!ok)
      throw PlacementError("render_scene: could not place object " + std::to_string(k + 1) +
                           " of " + std::to_string(count) + " within " +
                           std::to_string(spec.max_retries) + " attempts");
  }
  return placed;
}

/// Renders one labeled scene. Geometry and labels are a function of
/// (spec, seed) alone; the style only changes appearance.
inline LabeledImage render_scene(const SceneSpec& spec, const DomainStyle& style,
                                 std::uint64_t seed) {
  style.validate();
  const auto objects = sample_layout(spec, seed);
  const int H = spec.height, W = spec.width;
  Image im({3, H, W});
  std::mt19937_64 noise_rng(derive_seed(seed, 0x6e6f));
  auto noise = [&]() {
    return static_cast<float>((static_cast<double>(noise_rng() >> 11) * 0x1.0p-53 - 0.5) * 2.0 *
                              style.texture_strength);
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const float t = H > 1 ? static_cast<float>(y) / static_cast<float>(H - 1) : 0.0f;
      const float n = style.background_mode == BackgroundMode::noise ? noise() : 0.0f;
      for (int c = 0; c < 3; ++c) {
        float v = style.background[c];
        if (style.background_mode == BackgroundMode::gradient)
          v = (1 - t) * style.background[c] + t * style.background_end[c];
        im.at(c, y, x) = v + n;
      }
    }
  // Objects carry a per-pixel texture of the same strength.
  for (const auto& o : objects) {
    const Rgb colour = style.palette[static_cast<std::size_t>(o.palette_slot) % style.palette.size()];
    const double reach = o.half + style.edge_softness + 1.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - reach)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(o.cx + reach)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(o.cy + reach)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double cov = detail::coverage(o, x, y, style.edge_softness);
        if (cov <= 0) continue;
        const float n = noise();
        for (int c = 0; c < 3; ++c) {
          float& px = im.at(c, y, x);
          px = static_cast<float>((1 - cov) * px + cov * (colour[c] + n));
        }
      }
  }
  for (auto& v : im.storage()) v = std::clamp(v, 0.0f, 1.0f);
  quantize_8bit(im);
  LabeledImage out;
  out.pixels = std::move(im);
  for (const auto& o : objects) out.annotations.push_back({o.box, o.class_id});
  return out;
}

}  // namespace dam::synth

#endif  // DAM_SYNTHDATA_RENDER_HPP
