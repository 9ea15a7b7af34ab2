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

#ifndef DAM_NN_LAYERS_HPP
#define DAM_NN_LAYERS_HPP

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dam/nn/ops.hpp"

namespace dam::nn {

using Rng = std::mt19937_64;

/// Named view over a model's trainable tensors, in registration order.
template <class T>
class ParameterList {
 public:
  void add(std::string name, Var<T> v) { items_.emplace_back(std::move(name), std::move(v)); }
  void append(const ParameterList& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
  }

  std::size_t size() const { return items_.size(); }
  auto begin() { return items_.begin(); }
  auto end() { return items_.end(); }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  const std::pair<std::string, Var<T>>& operator[](std::size_t i) const { return items_[i]; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : items_) n += v.value().size();
    return n;
  }
  void zero_grad() {
    for (auto& [name, v] : items_) v.grad().zero();
  }
  void set_requires_grad(bool on) {
    for (auto& [name, v] : items_) v.node()->requires_grad = on;
  }
  /// Flattened copy of all values, in order.
  std::vector<T> flat_values() const {
    std::vector<T> out;
    for (const auto& [name, v] : items_)
      out.insert(out.end(), v.value().storage().begin(), v.value().storage().end());
    return out;
  }
  std::vector<T> flat_grads() {
    std::vector<T> out;
    for (auto& [name, v] : items_)
      out.insert(out.end(), v.grad().storage().begin(), v.grad().storage().end());
    return out;
  }
  /// Mutable reference to the i-th scalar across all tensors.
  T& scalar(std::size_t i) {
    for (auto& [name, v] : items_) {
      if (i < v.value().size()) return v.mutable_value()[i];
      i -= v.value().size();
    }
    throw std::out_of_range("ParameterList::scalar");
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> items_;
};

template <class T>
Tensor<T> normal_tensor(std::vector<int> shape, double stddev, Rng& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.storage()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  /// He-normal weights scaled by `gain`; zero bias. gain = 0 gives an
  /// all-zero layer.
  Conv2d(int in, int out, int kernel, int stride, int pad, Rng& rng, double gain = 1.0)
      : stride_(stride), pad_(pad) {
    const double fan_in = static_cast<double>(in) * kernel * kernel;
    weight_ = Var<T>::parameter(
        gain == 0.0 ? Tensor<T>({out, in, kernel, kernel})
                    : normal_tensor<T>({out, in, kernel, kernel},
                                       gain * std::sqrt(2.0 / fan_in), rng));
    bias_ = Var<T>::parameter(Tensor<T>({out}));
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, stride_, pad_); }

  void collect(ParameterList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight_);
    params.add(prefix + ".bias", bias_);
  }

  int out_channels() const { return weight_.shape()[0]; }
  int in_channels() const { return weight_.shape()[1]; }
  int kernel() const { return weight_.shape()[2]; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }
  const Var<T>& weight() const { return weight_; }
  const Var<T>& bias() const { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
  int stride_ = 1;
  int pad_ = 0;
};

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng, double stddev)
      : weight_(Var<T>::parameter(stddev == 0.0 ? Tensor<T>({out, in})
                                                : normal_tensor<T>({out, in}, stddev, rng))),
        bias_(Var<T>::parameter(Tensor<T>({out}))) {}

  Var<T> operator()(const Var<T>& x) const { return linear(x, weight_, bias_); }

  void collect(ParameterList<T>& params, const std::string& prefix) const {
    params.add(prefix + ".weight", weight_);
    params.add(prefix + ".bias", bias_);
  }

  int in_features() const { return weight_.shape()[1]; }
  int out_features() const { return weight_.shape()[0]; }
  const Var<T>& bias() const { return bias_; }

 private:
  Var<T> weight_;
  Var<T> bias_;
};

/// Deep copy of parameter values from one list into another of equal layout.
template <class T>
void copy_values(const ParameterList<T>& from, ParameterList<T>& to) {
  if (from.size() != to.size()) throw std::invalid_argument("copy_values: layout mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    auto dst = to[i].second;
    if (dst.value().shape() != from[i].second.value().shape())
      throw std::invalid_argument("copy_values: shape mismatch at " + from[i].first);
    dst.mutable_value() = from[i].second.value();
  }
}

}  // namespace dam::nn

#endif  // DAM_NN_LAYERS_HPP
