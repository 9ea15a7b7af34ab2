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

#ifndef DAM_CORE_BOX_HPP
#define DAM_CORE_BOX_HPP

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace dam {

/// Axis-aligned box in continuous pixel coordinates. The pixel at column i
/// spans [i, i+1); there is no "+1" correction anywhere in the library, so a
/// box's width is simply xmax - xmin.
struct Box {
  double xmin = 0;
  double ymin = 0;
  double xmax = 0;
  double ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (xmin + xmax); }
  double center_y() const { return 0.5 * (ymin + ymax); }
  bool valid() const {
    return std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) &&
           std::isfinite(ymax) && xmax > xmin && ymax > ymin;
  }

  friend bool operator==(const Box&, const Box&) = default;
  friend std::ostream& operator<<(std::ostream& os, const Box& b) {
    return os << '[' << b.xmin << ',' << b.ymin << ',' << b.xmax << ',' << b.ymax << ']';
  }
};

inline void require_valid(const Box& b, const char* where) {
  if (!b.valid())
    throw std::invalid_argument(std::string(where) + ": degenerate box");
}

/// Intersection over union; throws on zero-area input.
inline double iou(const Box& a, const Box& b) {
  require_valid(a, "iou");
  require_valid(b, "iou");
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Thrown by clip_box when nothing of the box lies inside the image.
class BoxOutsideImage : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline Box clip_box(const Box& b, double width, double height) {
  if (!(width > 0) || !(height > 0))
    throw std::invalid_argument("clip_box: image size must be positive");
  Box c{std::clamp(b.xmin, 0.0, width), std::clamp(b.ymin, 0.0, height),
        std::clamp(b.xmax, 0.0, width), std::clamp(b.ymax, 0.0, height)};
  if (!c.valid()) throw BoxOutsideImage("clip_box: box outside image");
  return c;
}

}  // namespace dam

#endif  // DAM_CORE_BOX_HPP
