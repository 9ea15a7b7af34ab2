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

#ifndef DAM_NN_OPTIM_HPP
#define DAM_NN_OPTIM_HPP

#include <cmath>
#include <vector>

#include "dam/nn/layers.hpp"

namespace dam::nn {

/// SGD with heavy-ball momentum and L2 weight decay folded into the gradient:
///   g <- grad + wd * p;  buf <- momentum * buf + g;  p <- p - lr * buf
template <class T>
class Sgd {
 public:
  Sgd(ParameterList<T> params, double momentum, double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& [name, v] : params_) buffers_.emplace_back(v.value().shape());
  }

  void step(double lr) {
    std::size_t i = 0;
    for (auto& [name, v] : params_) {
      auto& p = v.mutable_value();
      auto& g = v.grad();
      auto& buf = buffers_[i++];
      for (std::size_t k = 0; k < p.size(); ++k) {
        const T gk = g[k] + static_cast<T>(weight_decay_) * p[k];
        buf[k] = static_cast<T>(momentum_) * buf[k] + gk;
        p[k] -= static_cast<T>(lr) * buf[k];
      }
    }
  }
  void zero_grad() { params_.zero_grad(); }
  ParameterList<T>& params() { return params_; }

 private:
  ParameterList<T> params_;
  std::vector<Tensor<T>> buffers_;
  double momentum_;
  double weight_decay_;
};

template <class T>
class Adam {
 public:
  Adam(ParameterList<T> params, double beta1, double beta2, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, v] : params_) {
      m_.emplace_back(v.value().shape());
      v_.emplace_back(v.value().shape());
    }
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    std::size_t i = 0;
    for (auto& [name, var] : params_) {
      auto& p = var.mutable_value();
      auto& g = var.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      ++i;
      for (std::size_t k = 0; k < p.size(); ++k) {
        m[k] = static_cast<T>(beta1_ * m[k] + (1.0 - beta1_) * g[k]);
        v[k] = static_cast<T>(beta2_ * v[k] + (1.0 - beta2_) * g[k] * g[k]);
        const double mh = m[k] / c1;
        const double vh = v[k] / c2;
        p[k] -= static_cast<T>(lr * mh / (std::sqrt(vh) + eps_));
      }
    }
  }
  void zero_grad() { params_.zero_grad(); }
  ParameterList<T>& params() { return params_; }

 private:
  ParameterList<T> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  double beta1_;
  double beta2_;
  double eps_;
  int t_ = 0;
};

}  // namespace dam::nn

#endif  // DAM_NN_OPTIM_HPP
