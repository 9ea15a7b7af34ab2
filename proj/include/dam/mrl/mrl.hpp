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

#ifndef DAM_MRL_MRL_HPP
#define DAM_MRL_MRL_HPP

// Multi-domain adversarial alignment: a gradient reversal layer in front of
// an (n+2)-way per-location domain classifier over backbone features.

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dam/core/types.hpp"
#include "dam/nn/layers.hpp"

namespace dam::mrl {

using nn::Tensor;
using nn::Var;

/// Reversal strength, optionally ramped with the DANN-style warm-up
///   lambda(p) = lambda_max * (2 / (1 + exp(-gamma p)) - 1),  p in [0, 1].
struct GradientReversal {
  double lambda = 1.0;
  bool warmup = false;
  double gamma = 10.0;

  double at(double progress) const {
    if (!warmup) return lambda;
    const double p = std::clamp(progress, 0.0, 1.0);
    return lambda * (2.0 / (1.0 + std::exp(-gamma * p)) - 1.0);
  }
};

/// Forward pass of the reversal layer: the identity.
template <class T>
Tensor<T> grl_forward(const Tensor<T>& x, double /*lambda*/) {
  return x;
}

/// Backward pass of the reversal layer: -lambda * upstream.
template <class T>
Tensor<T> grl_backward(const Tensor<T>& upstream, double lambda) {
  Tensor<T> out = upstream;
  for (auto& v : out.storage()) v = static_cast<T>(-lambda) * v;
  return out;
}

/// Graph op form used in training.
template <class T>
Var<T> grl(const Var<T>& x, double lambda) {
  return nn::gradient_reversal(x, static_cast<T>(lambda));
}

struct DiscriminatorConfig {
  int in_channels = 32;
  int hidden = 32;
  int shifted_domains = 3;  // n; the classifier has n + 2 outputs

  int domains() const { return shifted_domains + 2; }
};

/// Three convolutions that keep the spatial size: 3x3, 3x3, then 1x1 to
/// n + 2 domain logits per location.
template <class T>
class MultiDomainDiscriminator {
 public:
  MultiDomainDiscriminator() = default;
  MultiDomainDiscriminator(const DiscriminatorConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    if (cfg.in_channels < 1 || cfg.hidden < 1 || cfg.shifted_domains < 0)
      throw std::invalid_argument("mrl::DiscriminatorConfig: invalid sizes");
    c1_ = nn::Conv2d<T>(cfg.in_channels, cfg.hidden, 3, 1, 1, rng);
    c2_ = nn::Conv2d<T>(cfg.hidden, cfg.hidden, 3, 1, 1, rng);
    c3_ = nn::Conv2d<T>(cfg.hidden, cfg.domains(), 1, 1, 0, rng, 0.5);
  }

  Var<T> operator()(const Var<T>& features) const {
    Var<T> h = nn::relu(c1_(features));
    h = nn::relu(c2_(h));
    return c3_(h);
  }

  void collect(nn::ParameterList<T>& params, const std::string& prefix) const {
    c1_.collect(params, prefix + ".c1");
    c2_.collect(params, prefix + ".c2");
    c3_.collect(params, prefix + ".c3");
  }
  nn::ParameterList<T> parameters() const {
    nn::ParameterList<T> p;
    collect(p, "mrl_disc");
    return p;
  }

  const DiscriminatorConfig& config() const { return cfg_; }
  int domains() const { return cfg_.domains(); }

 private:
  DiscriminatorConfig cfg_;
  nn::Conv2d<T> c1_, c2_, c3_;
};

enum class Reduction { sum, mean };

/// Per-location cross entropy of the true domain, summed (or averaged) over
/// all (u, v) of a domains x H x W logit map.
template <class T>
Var<T> mrl_loss_from_logits(const Var<T>& logits, DomainId label, Reduction r = Reduction::sum) {
  const auto& s = logits.shape();
  if (s.size() != 3) throw std::invalid_argument("mrl_loss: logits must be K x H x W");
  if (label.value < 0 || label.value >= s[0])
    throw std::out_of_range("mrl_loss: domain label " + std::to_string(label.value) +
                            " outside [0, " + std::to_string(s[0]) + ")");
  const T divisor = r == Reduction::sum ? T(1) : static_cast<T>(s[1] * s[2]);
  return nn::softmax_cross_entropy_map(logits, label.value, divisor);
}

template <class T>
Var<T> mrl_loss(const Var<T>& features, DomainId label, const MultiDomainDiscriminator<T>& disc,
                Reduction r = Reduction::sum) {
  if (!label.in_range(disc.config().shifted_domains))
    throw std::out_of_range("mrl_loss: domain label " + std::to_string(label.value) +
                            " outside [0, " + std::to_string(disc.domains()) + ")");
  return mrl_loss_from_logits(disc(features), label, r);
}

/// Checks that the labels are exactly {0, ..., n+1}, each once.
inline void require_canonical_labels(const std::vector<DomainId>& labels, int n_shifted) {
  if (static_cast<int>(labels.size()) != DomainId::count(n_shifted))
    throw std::invalid_argument("mrl_total: expected " + std::to_string(DomainId::count(n_shifted)) +
                                " feature maps, got " + std::to_string(labels.size()));
  std::set<int> seen;
  for (const auto& l : labels) {
    if (!l.in_range(n_shifted))
      throw std::invalid_argument("mrl_total: domain label " + std::to_string(l.value) +
                                  " out of range");
    if (!seen.insert(l.value).second)
      throw std::invalid_argument("mrl_total: duplicate domain label " + std::to_string(l.value));
  }
}

/// Sum of mrl_loss over the n+2 domain feature maps, one per domain label.
template <class T>
Var<T> mrl_total(const std::vector<std::pair<Var<T>, DomainId>>& batch,
                 const MultiDomainDiscriminator<T>& disc, Reduction r = Reduction::sum) {
  std::vector<DomainId> labels;
  for (const auto& [f, l] : batch) labels.push_back(l);
  require_canonical_labels(labels, disc.config().shifted_domains);
  std::vector<Var<T>> terms;
  for (const auto& [f, l] : batch) terms.push_back(mrl_loss(f, l, disc, r));
  return nn::sum_scalars(terms);
}

}  // namespace dam::mrl

#endif  // DAM_MRL_MRL_HPP
