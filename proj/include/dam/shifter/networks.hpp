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

#ifndef DAM_SHIFTER_NETWORKS_HPP
#define DAM_SHIFTER_NETWORKS_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "dam/nn/layers.hpp"

namespace dam::shifter {

using nn::Conv2d;
using nn::ParameterList;
using nn::Rng;
using nn::Var;

struct GeneratorConfig {
  int channels = 3;
  int width = 8;
  int residual_blocks = 3;
  // Zero-initialise the output layer so an untrained generator is the identity.
  bool identity_init = true;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

/// Image-to-image generator without downsampling:
///   h = relu(conv(x)); h += conv(relu(conv(h))) per block;
///   y = sigmoid(logit(x) + conv(relu(h)))
/// The residual is applied in logit space, so y stays in (0, 1) and the
/// zero-residual generator reproduces its input.
template <class T>
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.width < 1 || cfg.residual_blocks < 0 || cfg.channels < 1)
      throw std::invalid_argument("GeneratorConfig: invalid sizes");
    head_ = Conv2d<T>(cfg.channels, cfg.width, 3, 1, 1, rng);
    for (int b = 0; b < cfg.residual_blocks; ++b) {
      blocks_.push_back({Conv2d<T>(cfg.width, cfg.width, 3, 1, 1, rng),
                         Conv2d<T>(cfg.width, cfg.width, 3, 1, 1, rng, 0.5)});
    }
    tail_ = Conv2d<T>(cfg.width, cfg.channels, 3, 1, 1, rng, cfg.identity_init ? 0.0 : 0.5);
  }

  Var<T> operator()(const Var<T>& x) const {
    Var<T> h = nn::relu(head_(x));
    for (const auto& [a, b] : blocks_) h = nn::add(h, b(nn::relu(a(h))));
    Var<T> residual = tail_(nn::relu(h));
    return nn::sigmoid(nn::add(nn::logit(x, static_cast<T>(kLogitEps)), residual));
  }

  void collect(ParameterList<T>& params, const std::string& prefix) const {
    head_.collect(params, prefix + ".head");
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      blocks_[b].first.collect(params, prefix + ".block" + std::to_string(b) + ".a");
      blocks_[b].second.collect(params, prefix + ".block" + std::to_string(b) + ".b");
    }
    tail_.collect(params, prefix + ".tail");
  }
  ParameterList<T> parameters() const {
    ParameterList<T> p;
    collect(p, "g");
    return p;
  }

  const GeneratorConfig& config() const { return cfg_; }

  static constexpr double kLogitEps = 1e-3;

 private:
  GeneratorConfig cfg_;
  Conv2d<T> head_;
  std::vector<std::pair<Conv2d<T>, Conv2d<T>>> blocks_;
  Conv2d<T> tail_;
};

struct DiscriminatorConfig {
  int channels = 3;
  int width = 8;

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

/// Patch discriminator: two stride-2 layers then a 1-channel logit map at
/// a quarter of the input resolution.
template <class T>
class PatchDiscriminator {
 public:
  PatchDiscriminator() = default;
  PatchDiscriminator(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg.width < 1 || cfg.channels < 1)
      throw std::invalid_argument("DiscriminatorConfig: invalid sizes");
    c1_ = Conv2d<T>(cfg.channels, cfg.width, 3, 2, 1, rng);
    c2_ = Conv2d<T>(cfg.width, 2 * cfg.width, 3, 2, 1, rng);
    c3_ = Conv2d<T>(2 * cfg.width, 1, 3, 1, 1, rng, 0.5);
  }

  Var<T> operator()(const Var<T>& x) const {
    const T slope = static_cast<T>(0.2);
    Var<T> h = nn::leaky_relu(c1_(x), slope);
    h = nn::leaky_relu(c2_(h), slope);
    return c3_(h);
  }

  void collect(ParameterList<T>& params, const std::string& prefix) const {
    c1_.collect(params, prefix + ".c1");
    c2_.collect(params, prefix + ".c2");
    c3_.collect(params, prefix + ".c3");
  }
  ParameterList<T> parameters() const {
    ParameterList<T> p;
    collect(p, "d");
    return p;
  }

  const DiscriminatorConfig& config() const { return cfg_; }

 private:
  DiscriminatorConfig cfg_;
  Conv2d<T> c1_, c2_, c3_;
};

}  // namespace dam::shifter

#endif  // DAM_SHIFTER_NETWORKS_HPP
