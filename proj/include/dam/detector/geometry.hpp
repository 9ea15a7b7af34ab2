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

#ifndef DAM_DETECTOR_GEOMETRY_HPP
#define DAM_DETECTOR_GEOMETRY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "dam/core/box.hpp"

namespace dam::detector {

using BoxDelta = std::array<double, 4>;  // dx, dy, dw, dh

/// One square anchor per feature cell, centred on the cell; index = y * W + x.
inline std::vector<Box> make_anchors(int feat_h, int feat_w, int stride, double size) {
  std::vector<Box> anchors;
  anchors.reserve(static_cast<std::size_t>(feat_h) * feat_w);
  for (int y = 0; y < feat_h; ++y)
    for (int x = 0; x < feat_w; ++x) {
      const double cx = (x + 0.5) * stride, cy = (y + 0.5) * stride;
      anchors.push_back({cx - size / 2, cy - size / 2, cx + size / 2, cy + size / 2});
    }
  return anchors;
}

/// Standard centre/log-size box coding, divided by `stds`.
inline BoxDelta encode_box(const Box& reference, const Box& target,
                           const BoxDelta& stds = {1, 1, 1, 1}) {
  return {(target.center_x() - reference.center_x()) / reference.width() / stds[0],
          (target.center_y() - reference.center_y()) / reference.height() / stds[1],
          std::log(target.width() / reference.width()) / stds[2],
          std::log(target.height() / reference.height()) / stds[3]};
}

inline Box decode_box(const Box& reference, const BoxDelta& d, const BoxDelta& stds = {1, 1, 1, 1}) {
  // Clamp log-size deltas so exp() cannot overflow.
  constexpr double kMaxLog = 4.135166556742356;  // log(1000 / 16)
  const double cx = reference.center_x() + d[0] * stds[0] * reference.width();
  const double cy = reference.center_y() + d[1] * stds[1] * reference.height();
  const double w = reference.width() * std::exp(std::min(d[2] * stds[2], kMaxLog));
  const double h = reference.height() * std::exp(std::min(d[3] * stds[3], kMaxLog));
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

/// Greedy non-maximum suppression. Candidates are visited by score
/// descending (stable on index); a candidate is kept unless its IoU with an
/// already kept box exceeds `threshold`. Returns kept indices in visit order.
inline std::vector<int> nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                            double threshold, int limit = -1) {
  std::vector<int> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] >
                                              scores[static_cast<std::size_t>(b)]; });
  std::vector<int> keep;
  for (int i : order) {
    if (limit >= 0 && static_cast<int>(keep.size()) >= limit) break;
    bool suppressed = false;
    for (int k : keep)
      if (iou(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(k)]) > threshold) {
        suppressed = true;
        break;
      }
    if (!suppressed) keep.push_back(i);
  }
  return keep;
}

}  // namespace dam::detector

#endif  // DAM_DETECTOR_GEOMETRY_HPP
