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

#ifndef DAM_CORE_TYPES_HPP
#define DAM_CORE_TYPES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/core/box.hpp"
#include "dam/nn/tensor.hpp"

namespace dam {

/// Pixels are channels x H x W floats in [0, 1].
using Image = nn::Tensor<float>;

inline int image_channels(const Image& im) { return im.dim(0); }
inline int image_height(const Image& im) { return im.dim(1); }
inline int image_width(const Image& im) { return im.dim(2); }

inline void require_image(const Image& im, const char* where) {
  if (im.rank() != 3 || im.dim(0) <= 0 || im.dim(1) <= 0 || im.dim(2) <= 0)
    throw std::invalid_argument(std::string(where) + ": image must be C x H x W");
  for (float v : im.storage())
    if (!(v >= 0.0f && v <= 1.0f))
      throw std::invalid_argument(std::string(where) + ": pixel outside [0, 1]");
}

struct Annotation {
  Box box;
  int class_id = 0;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct LabeledImage {
  Image pixels;
  std::vector<Annotation> annotations;
  std::string id;

  /// Checks the shape contract, class range and that boxes lie in the frame.
  void validate(int class_count) const {
    require_image(pixels, "LabeledImage");
    const double w = image_width(pixels), h = image_height(pixels);
    for (const auto& a : annotations) {
      if (!a.box.valid()) throw std::invalid_argument("LabeledImage: degenerate box");
      if (a.class_id < 0 || a.class_id >= class_count)
        throw std::invalid_argument("LabeledImage: class id out of range");
      if (a.box.xmin < 0 || a.box.ymin < 0 || a.box.xmax > w || a.box.ymax > h)
        throw std::invalid_argument("LabeledImage: box outside image");
    }
  }
};

struct UnlabeledImage {
  Image pixels;
  std::string id;
};

/// Domain label of a training entry: 0 is the source, 1..n the shifted
/// domains (entry i produced by shifter i), n+1 the target.
struct DomainId {
  int value = 0;

  static DomainId source() { return {0}; }
  static DomainId shifted(int i) { return {i}; }
  static DomainId target(int n_shifted) { return {n_shifted + 1}; }
  static int count(int n_shifted) { return n_shifted + 2; }

  bool in_range(int n_shifted) const { return value >= 0 && value < count(n_shifted); }
  friend bool operator==(const DomainId&, const DomainId&) = default;
  friend auto operator<=>(const DomainId&, const DomainId&) = default;
};

struct Detection {
  int class_id = 0;
  double confidence = 0;
  Box box;
  std::string image_id;
};

/// Ordered image collection with its class manifest.
template <class Item>
struct Dataset {
  std::vector<Item> items;
  std::vector<std::string> class_names;
  std::string split;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  int class_count() const { return static_cast<int>(class_names.size()); }
  const Item& operator[](std::size_t i) const { return items[i]; }

  /// Seeded permutation of item indices; equal seeds give equal orders.
  std::vector<std::size_t> order(std::uint64_t seed) const {
    std::vector<std::size_t> idx(items.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = idx.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }
};

using LabeledDataset = Dataset<LabeledImage>;
using UnlabeledDataset = Dataset<UnlabeledImage>;

inline UnlabeledDataset strip_labels(const LabeledDataset& d) {
  UnlabeledDataset out;
  out.class_names = d.class_names;
  out.split = d.split;
  out.items.reserve(d.items.size());
  for (const auto& it : d.items) out.items.push_back({it.pixels, it.id});
  return out;
}

}  // namespace dam

#endif  // DAM_CORE_TYPES_HPP
