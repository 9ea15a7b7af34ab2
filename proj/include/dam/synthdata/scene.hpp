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

#ifndef DAM_SYNTHDATA_SCENE_HPP
#define DAM_SYNTHDATA_SCENE_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dam::synth {

using Rgb = std::array<float, 3>;

enum class BackgroundMode { flat, gradient, noise };

inline std::string_view to_string(BackgroundMode m) {
  switch (m) {
    case BackgroundMode::flat: return "flat";
    case BackgroundMode::gradient: return "gradient";
    case BackgroundMode::noise: return "noise";
  }
  return "?";
}

inline BackgroundMode parse_background_mode(std::string_view s) {
  if (s == "flat") return BackgroundMode::flat;
  if (s == "gradient") return BackgroundMode::gradient;
  if (s == "noise") return BackgroundMode::noise;
  throw std::invalid_argument("unknown background mode '" + std::string(s) + "'");
}

/// Appearance of one domain. Geometry never depends on the style.
struct DomainStyle {
  std::vector<Rgb> palette;
  BackgroundMode background_mode = BackgroundMode::flat;
  Rgb background{0.1f, 0.1f, 0.1f};
  // End colour for the gradient mode (top to bottom).
  Rgb background_end{0.3f, 0.3f, 0.3f};
  double texture_strength = 0.0;
  double edge_softness = 0.0;

  void validate() const {
    if (palette.empty()) throw std::invalid_argument("DomainStyle: empty palette");
    auto check_rgb = [](const Rgb& c) {
      for (float v : c)
        if (!(v >= 0.0f && v <= 1.0f))
          throw std::invalid_argument("DomainStyle: colour component outside [0, 1]");
    };
    for (const auto& c : palette) check_rgb(c);
    check_rgb(background);
    check_rgb(background_end);
    if (!std::isfinite(texture_strength) || texture_strength < 0)
      throw std::invalid_argument("DomainStyle: texture_strength must be finite and >= 0");
    if (!std::isfinite(edge_softness) || edge_softness < 0)
      throw std::invalid_argument("DomainStyle: edge_softness must be finite and >= 0");
  }

  friend bool operator==(const DomainStyle&, const DomainStyle&) = default;
};

enum class ShapeKind { disc, square, triangle, star, cross };

inline std::string_view to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::disc: return "disc";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
    case ShapeKind::star: return "star";
    case ShapeKind::cross: return "cross";
  }
  return "?";
}

inline ShapeKind parse_shape_kind(std::string_view s) {
  for (auto k : {ShapeKind::disc, ShapeKind::square, ShapeKind::triangle, ShapeKind::star,
                 ShapeKind::cross})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown shape kind '" + std::string(s) + "'");
}

struct SceneSpec {
  int height = 64;
  int width = 64;
  int min_objects = 1;
  int max_objects = 4;
  // Class id i renders classes[i].
  std::vector<ShapeKind> classes{ShapeKind::disc, ShapeKind::square, ShapeKind::triangle,
                                 ShapeKind::star, ShapeKind::cross};
  // Side of the square an object is inscribed in, in pixels.
  int min_size = 14;
  int max_size = 26;
  // Largest pairwise IoU allowed between placed objects' boxes.
  double overlap_limit = 0.1;
  int max_retries = 200;

  void validate() const {
    if (height <= 0 || width <= 0) throw std::invalid_argument("SceneSpec: empty image");
    if (min_objects < 0 || max_objects < min_objects)
      throw std::invalid_argument("SceneSpec: bad object count range");
    if (classes.empty()) throw std::invalid_argument("SceneSpec: no classes");
    if (min_size < 3 || max_size < min_size)
      throw std::invalid_argument("SceneSpec: bad object size range");
    if (max_size > height || max_size > width)
      throw std::invalid_argument("SceneSpec: objects do not fit inside the image");
    if (!(overlap_limit >= 0.0 && overlap_limit < 1.0))
      throw std::invalid_argument("SceneSpec: overlap_limit must be in [0, 1)");
    if (max_retries < 1) throw std::invalid_argument("SceneSpec: max_retries must be >= 1");
  }

  std::vector<std::string> class_names() const {
    std::vector<std::string> out;
    for (auto k : classes) out.emplace_back(to_string(k));
    return out;
  }
};

/// Shape membership test in the object's unit frame: (u, v) in [-1, 1]^2
/// relative to the inscribing square.
inline bool shape_contains(ShapeKind kind, double u, double v) {
  switch (kind) {
    case ShapeKind::disc:
      return u * u + v * v <= 1.0;
    case ShapeKind::square:
      return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case ShapeKind::triangle: {
      // Apex at top, base at the bottom edge.
      if (v > 1.0 || v < -1.0) return false;
      const double half = 0.5 * (v + 1.0);
      return std::abs(u) <= half;
    }
    case ShapeKind::star: {
      const double r = std::sqrt(u * u + v * v);
      if (r > 1.0) return false;
      if (r <= 0.4) return true;
      const double a = std::atan2(u, -v);  // point 0 straight up
      const double sector = 2.0 * std::numbers::pi / 5.0;
      double t = std::fmod(a + 2.0 * std::numbers::pi, sector) / sector;  // [0, 1)
      t = std::abs(t - 0.5) * 2.0;  // 1 at a point, 0 between points
      return r <= 0.4 + 0.6 * t;
    }
    case ShapeKind::cross:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
  }
  return false;
}

}  // namespace dam::synth

#endif  // DAM_SYNTHDATA_SCENE_HPP
