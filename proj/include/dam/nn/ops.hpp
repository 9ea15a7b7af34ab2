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

#ifndef DAM_NN_OPS_HPP
#define DAM_NN_OPS_HPP

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/nn/autograd.hpp"
#include "dam/nn/tensor.hpp"

namespace dam::nn {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <class T>
T ordered_sum(const T* p, int n, int stride) {
  T s = 0;
  for (int i = 0; i < n; ++i) s += p[static_cast<std::size_t>(i) * stride];
  return s;
}

inline int conv_out(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// col is (C*K*K) x (Ho*Wo).
template <class T>
void im2col(const T* x, int C, int H, int W, int K, int stride, int pad, int Ho,
            int Wo, T* col) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx) {
        T* row = col + static_cast<std::size_t>((c * K + ky) * K + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* dst = row + oy * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + Wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, int C, int H, int W, int K, int stride, int pad,
                int Ho, int Wo, T* x) {
  const int P = Ho * Wo;
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < K; ++ky) {
      for (int kx = 0; kx < K; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * K + ky) * K + kx) * P;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          T* dst = x + (static_cast<std::size_t>(c) * H + iy) * W;
          const T* src = row + oy * Wo;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <class T>
T softplus(T z) {
  // log(1 + exp(z)) without overflow.
  return std::max(z, T(0)) + std::log1p(std::exp(-std::abs(z)));
}

template <class T>
T sigmoid(T z) {
  if (z >= 0) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

}  // namespace detail

/// 2-d convolution of a single C x H x W map. Weight is O x C x K x K, bias
/// has O entries (may be undefined).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias,
              int stride, int pad) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3])
    throw std::invalid_argument("conv2d: bad shapes " + x.value().shape_string() +
                                " * " + weight.value().shape_string());
  const int C = xs[0], H = xs[1], W = xs[2];
  const int O = ws[0], K = ws[2];
  const int Ho = detail::conv_out(H, K, stride, pad);
  const int Wo = detail::conv_out(W, K, stride, pad);
  if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: empty output");
  const int CKK = C * K * K, P = Ho * Wo;
  const bool direct = (K == 1 && stride == 1 && pad == 0);

  auto col = std::make_shared<AlignedVector<T>>();
  const T* col_ptr = x.value().data();
  if (!direct) {
    col->resize(static_cast<std::size_t>(CKK) * P);
    detail::im2col(x.value().data(), C, H, W, K, stride, pad, Ho, Wo, col->data());
    col_ptr = col->data();
  }
  Tensor<T> out({O, Ho, Wo});
  {
    detail::MatMap<T> Y(out.data(), O, P);
    detail::ConstMatMap<T> Wm(weight.value().data(), O, CKK);
    detail::ConstMatMap<T> Cm(col_ptr, CKK, P);
    Y.noalias() = Wm * Cm;
    if (bias.defined()) {
      const T* b = bias.value().data();
      for (int o = 0; o < O; ++o) Y.row(o).array() += b[o];
    }
  }
  const bool has_bias = bias.defined();
  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  auto xn = x.node();
  auto wn = weight.node();
  auto bn = has_bias ? bias.node() : nullptr;
  return make_result<T>(
      std::move(out), parents,
      [=](Node<T>& self) {
        detail::ConstMatMap<T> dY(self.grad.data(), O, P);
        const T* cp = direct ? xn->value.data() : col->data();
        detail::ConstMatMap<T> Cm(cp, CKK, P);
        if (wn->requires_grad) {
          detail::MatMap<T> dW(wn->grad_buffer().data(), O, CKK);
          dW.noalias() += dY * Cm.transpose();
        }
        if (bn && bn->requires_grad) {
          T* db = bn->grad_buffer().data();
          // Fixed-order sums: vectorised reductions depend on buffer alignment.
          for (int o = 0; o < O; ++o) db[o] += detail::ordered_sum(self.grad.data() + std::size_t(o) * P, P, 1);
        }
        if (xn->requires_grad) {
          detail::ConstMatMap<T> Wm(wn->value.data(), O, CKK);
          if (direct) {
            detail::MatMap<T> dX(xn->grad_buffer().data(), CKK, P);
            dX.noalias() += Wm.transpose() * dY;
          } else {
            AlignedVector<T> dcol(static_cast<std::size_t>(CKK) * P);
            detail::MatMap<T> dC(dcol.data(), CKK, P);
            dC.noalias() = Wm.transpose() * dY;
            detail::col2im_add(dcol.data(), C, H, W, K, stride, pad, Ho, Wo,
                               xn->grad_buffer().data());
          }
        }
      });
}

/// x: R x F, weight: O x F, bias: O.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
    throw std::invalid_argument("linear: bad shapes");
  const int R = xs[0], F = xs[1], O = ws[0];
  Tensor<T> out({R, O});
  if (R > 0) {
    detail::MatMap<T> Y(out.data(), R, O);
    detail::ConstMatMap<T> X(x.value().data(), R, F);
    detail::ConstMatMap<T> Wm(weight.value().data(), O, F);
    Y.noalias() = X * Wm.transpose();
    if (bias.defined()) {
      for (int r = 0; r < R; ++r)
        for (int o = 0; o < O; ++o) Y(r, o) += bias.value()[o];
    }
  }
  const bool has_bias = bias.defined();
  std::vector<Var<T>> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  auto xn = x.node();
  auto wn = weight.node();
  auto bn = has_bias ? bias.node() : nullptr;
  return make_result<T>(std::move(out), parents, [=](Node<T>& self) {
    if (R == 0) return;
    detail::ConstMatMap<T> dY(self.grad.data(), R, O);
    if (wn->requires_grad) {
      detail::MatMap<T> dW(wn->grad_buffer().data(), O, F);
      detail::ConstMatMap<T> X(xn->value.data(), R, F);
      dW.noalias() += dY.transpose() * X;
    }
    if (bn && bn->requires_grad) {
      T* db = bn->grad_buffer().data();
      for (int o = 0; o < O; ++o) db[o] += detail::ordered_sum(self.grad.data() + o, R, O);
    }
    if (xn->requires_grad) {
      detail::MatMap<T> dX(xn->grad_buffer().data(), R, F);
      detail::ConstMatMap<T> Wm(wn->value.data(), O, F);
      dX.noalias() += dY * Wm;
    }
  });
}

namespace detail {
// Elementwise unary op with derivative expressed through (input, output).
template <class T, class F, class D>
Var<T> unary(const Var<T>& x, F f, D dfdx) {
  Tensor<T> out(x.shape());
  const auto& xv = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto xn = x.node();
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += self.grad[i] * dfdx(xn->value[i], self.value[i]);
  });
}
}  // namespace detail

template <class T>
Var<T> relu(const Var<T>& x) {
  return detail::unary<T>(
      x, [](T v) { return v > 0 || std::isnan(v) ? v : T(0); },  // NaN propagates
      [](T in, T) { return in > 0 ? T(1) : T(0); });
}

template <class T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  return detail::unary<T>(
      x, [slope](T v) { return v > 0 ? v : slope * v; },
      [slope](T in, T) { return in > 0 ? T(1) : slope; });
}

template <class T>
Var<T> sigmoid(const Var<T>& x) {
  return detail::unary<T>(
      x, [](T v) { return detail::sigmoid(v); },
      [](T, T out) { return out * (T(1) - out); });
}

template <class T>
Var<T> tanh(const Var<T>& x) {
  return detail::unary<T>(
      x, [](T v) { return std::tanh(v); },
      [](T, T out) { return T(1) - out * out; });
}

/// log(p / (1 - p)) with p clamped to [eps, 1 - eps]; zero gradient where
/// the clamp is active.
template <class T>
Var<T> logit(const Var<T>& x, T eps) {
  return detail::unary<T>(
      x,
      [eps](T v) {
        const T p = std::clamp(v, eps, T(1) - eps);
        return std::log(p / (T(1) - p));
      },
      [eps](T in, T) {
        if (in < eps || in > T(1) - eps) return T(0);
        return T(1) / (in * (T(1) - in));
      });
}

template <class T>
Var<T> scale(const Var<T>& x, T s) {
  return detail::unary<T>(
      x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

/// Identity forward; backward multiplies the incoming gradient by -lambda.
template <class T>
Var<T> gradient_reversal(const Var<T>& x, T lambda) {
  Tensor<T> out = x.value();
  auto xn = x.node();
  return make_result<T>(std::move(out), {x}, [=](Node<T>& self) {
    auto& g = xn->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= lambda * self.grad[i];
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("add: shape mismatch " + a.value().shape_string() +
                                " vs " + b.value().shape_string());
  Tensor<T> out = a.value();
  out += b.value();
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>(std::move(out), {a, b}, [=](Node<T>& self) {
    if (an->requires_grad) an->grad_buffer() += self.grad;
    if (bn->requires_grad) bn->grad_buffer() += self.grad;
  });
}

/// Sum of scalar Vars; an empty list yields a constant zero.
template <class T>
Var<T> sum_scalars(const std::vector<Var<T>>& terms) {
  T total = 0;
  for (const auto& t : terms) total += t.item();
  auto nodes = std::vector<typename Var<T>::NodePtr>();
  for (const auto& t : terms) nodes.push_back(t.node());
  return make_result<T>(Tensor<T>({1}, total), terms, [nodes](Node<T>& self) {
    for (const auto& n : nodes)
      if (n->requires_grad) n->grad_buffer()[0] += self.grad[0];
  });
}

/// Mean over all elements of |a - b|.
template <class T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("mean_abs_diff: shape mismatch " +
                                a.value().shape_string() + " vs " +
                                b.value().shape_string());
  const std::size_t n = a.value().size();
  if (n == 0) throw std::invalid_argument("mean_abs_diff: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += std::abs(a.value()[i] - b.value()[i]);
  auto an = a.node();
  auto bn = b.node();
  return make_result<T>(Tensor<T>({1}, acc / T(n)), {a, b}, [=](Node<T>& self) {
    const T g = self.grad[0] / T(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T d = an->value[i] - bn->value[i];
      const T s = d > 0 ? g : (d < 0 ? -g : T(0));
      if (an->requires_grad) an->grad_buffer()[i] += s;
      if (bn->requires_grad) bn->grad_buffer()[i] -= s;
    }
  });
}

/// Mean binary cross entropy of logits against a constant target in {0, 1}.
template <class T>
Var<T> bce_with_logits_mean(const Var<T>& logits, T target) {
  const auto& z = logits.value();
  const std::size_t n = z.size();
  if (n == 0) throw std::invalid_argument("bce_with_logits_mean: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i)
    acc += detail::softplus(z[i]) - z[i] * target;
  auto ln = logits.node();
  return make_result<T>(Tensor<T>({1}, acc / T(n)), {logits}, [=](Node<T>& self) {
    const T g = self.grad[0] / T(n);
    auto& dz = ln->grad_buffer();
    for (std::size_t i = 0; i < n; ++i)
      dz[i] += g * (detail::sigmoid(ln->value[i]) - target);
  });
}

/// Mean squared error of raw outputs against a constant target.
template <class T>
Var<T> mse_to_constant(const Var<T>& x, T target) {
  const auto& v = x.value();
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("mse_to_constant: empty input");
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += (v[i] - target) * (v[i] - target);
  auto xn = x.node();
  return make_result<T>(Tensor<T>({1}, acc / T(n)), {x}, [=](Node<T>& self) {
    const T g = self.grad[0] * T(2) / T(n);
    auto& dx = xn->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) dx[i] += g * (xn->value[i] - target);
  });
}

/// Weighted binary cross entropy: sum_i w_i * bce(z_i, t_i). Entries with
/// zero weight are ignored.
template <class T>
Var<T> bce_with_logits_weighted(const Var<T>& logits, std::vector<T> targets,
                                std::vector<T> weights) {
  const auto& z = logits.value();
  if (targets.size() != z.size() || weights.size() != z.size())
    throw std::invalid_argument("bce_with_logits_weighted: size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < z.size(); ++i)
    if (weights[i] != 0)
      acc += weights[i] * (detail::softplus(z[i]) - z[i] * targets[i]);
  auto ln = logits.node();
  return make_result<T>(
      Tensor<T>({1}, acc), {logits},
      [=, targets = std::move(targets), weights = std::move(weights)](Node<T>& self) {
        auto& dz = ln->grad_buffer();
        for (std::size_t i = 0; i < dz.size(); ++i)
          if (weights[i] != 0)
            dz[i] += self.grad[0] * weights[i] *
                     (detail::sigmoid(ln->value[i]) - targets[i]);
      });
}

/// sum_i w_i * smooth_l1(x_i - t_i) with transition point beta.
template <class T>
Var<T> smooth_l1_weighted(const Var<T>& x, std::vector<T> targets,
                          std::vector<T> weights, T beta) {
  const auto& v = x.value();
  if (targets.size() != v.size() || weights.size() != v.size())
    throw std::invalid_argument("smooth_l1_weighted: size mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (weights[i] == 0) continue;
    const T d = std::abs(v[i] - targets[i]);
    acc += weights[i] * (d < beta ? T(0.5) * d * d / beta : d - T(0.5) * beta);
  }
  auto xn = x.node();
  return make_result<T>(
      Tensor<T>({1}, acc), {x},
      [=, targets = std::move(targets), weights = std::move(weights)](Node<T>& self) {
        auto& dx = xn->grad_buffer();
        for (std::size_t i = 0; i < dx.size(); ++i) {
          if (weights[i] == 0) continue;
          const T d = xn->value[i] - targets[i];
          const T gd = std::abs(d) < beta ? d / beta : (d > 0 ? T(1) : T(-1));
          dx[i] += self.grad[0] * weights[i] * gd;
        }
      });
}

/// Row-wise softmax cross entropy of an R x K logit matrix, summed over rows
/// and divided by `divisor`.
template <class T>
Var<T> softmax_cross_entropy_rows(const Var<T>& logits, std::vector<int> labels,
                                  T divisor) {
  const auto& s = logits.shape();
  if (s.size() != 2 || static_cast<std::size_t>(s[0]) != labels.size())
    throw std::invalid_argument("softmax_cross_entropy_rows: bad shapes");
  const int R = s[0], K = s[1];
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(R) * K);
  T acc = 0;
  for (int r = 0; r < R; ++r) {
    const T* row = logits.value().data() + static_cast<std::size_t>(r) * K;
    if (labels[r] < 0 || labels[r] >= K)
      throw std::out_of_range("softmax_cross_entropy_rows: label out of range");
    const T m = *std::max_element(row, row + K);
    T z = 0;
    for (int k = 0; k < K; ++k) z += std::exp(row[k] - m);
    const T lse = m + std::log(z);
    for (int k = 0; k < K; ++k)
      (*probs)[static_cast<std::size_t>(r) * K + k] = std::exp(row[k] - lse);
    acc += lse - row[labels[r]];
  }
  auto ln = logits.node();
  return make_result<T>(
      Tensor<T>({1}, acc / divisor), {logits},
      [=, labels = std::move(labels)](Node<T>& self) {
        const T g = self.grad[0] / divisor;
        auto& dz = ln->grad_buffer();
        for (int r = 0; r < R; ++r)
          for (int k = 0; k < K; ++k) {
            const std::size_t i = static_cast<std::size_t>(r) * K + k;
            dz[i] += g * ((*probs)[i] - (k == labels[r] ? T(1) : T(0)));
          }
      });
}

/// Per-location softmax cross entropy of a K x H x W logit map against one
/// label shared by every location, summed over locations then divided by
/// `divisor`.
template <class T>
Var<T> softmax_cross_entropy_map(const Var<T>& logits, int label, T divisor) {
  const auto& s = logits.shape();
  if (s.size() != 3) throw std::invalid_argument("softmax_cross_entropy_map: rank");
  const int K = s[0], HW = s[1] * s[2];
  if (label < 0 || label >= K)
    throw std::out_of_range("softmax_cross_entropy_map: label " +
                            std::to_string(label) + " outside [0, " +
                            std::to_string(K) + ")");
  auto probs = std::make_shared<std::vector<T>>(static_cast<std::size_t>(K) * HW);
  const T* z = logits.value().data();
  T acc = 0;
  for (int p = 0; p < HW; ++p) {
    T m = -std::numeric_limits<T>::infinity();
    for (int k = 0; k < K; ++k) m = std::max(m, z[static_cast<std::size_t>(k) * HW + p]);
    T sum = 0;
    for (int k = 0; k < K; ++k) sum += std::exp(z[static_cast<std::size_t>(k) * HW + p] - m);
    const T lse = m + std::log(sum);
    for (int k = 0; k < K; ++k) {
      const std::size_t i = static_cast<std::size_t>(k) * HW + p;
      (*probs)[i] = std::exp(z[i] - lse);
    }
    acc += lse - z[static_cast<std::size_t>(label) * HW + p];
  }
  auto ln = logits.node();
  return make_result<T>(Tensor<T>({1}, acc / divisor), {logits}, [=](Node<T>& self) {
    const T g = self.grad[0] / divisor;
    auto& dz = ln->grad_buffer();
    for (int k = 0; k < K; ++k)
      for (int p = 0; p < HW; ++p) {
        const std::size_t i = static_cast<std::size_t>(k) * HW + p;
        dz[i] += g * ((*probs)[i] - (k == label ? T(1) : T(0)));
      }
  });
}

/// Region of interest in feature-map cell coordinates (continuous).
struct FeatureRoi {
  double x0, y0, x1, y1;
};

/// Max pooling of each region into a bins x bins grid. Output is R x (C*bins*bins).
/// Each bin covers the cells overlapping [start, end) with at least one cell.
template <class T>
Var<T> roi_max_pool(const Var<T>& feat, const std::vector<FeatureRoi>& rois,
                    int bins) {
  const auto& s = feat.shape();
  if (s.size() != 3) throw std::invalid_argument("roi_max_pool: rank");
  const int C = s[0], H = s[1], W = s[2];
  const int R = static_cast<int>(rois.size());
  const int F = C * bins * bins;
  Tensor<T> out({R, F});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(R) * F, -1);
  auto cell_range = [&](double a, double b, int limit, int bin) {
    const double len = std::max(b - a, 1e-6);
    const double lo = a + len * bin / bins;
    const double hi = a + len * (bin + 1) / bins;
    int i0 = static_cast<int>(std::floor(lo));
    int i1 = static_cast<int>(std::ceil(hi));
    i0 = std::clamp(i0, 0, limit - 1);
    i1 = std::clamp(i1, i0 + 1, limit);
    return std::pair<int, int>{i0, i1};
  };
  const T* f = feat.value().data();
  for (int r = 0; r < R; ++r) {
    const auto& roi = rois[static_cast<std::size_t>(r)];
    for (int by = 0; by < bins; ++by) {
      const auto [y0, y1] = cell_range(roi.y0, roi.y1, H, by);
      for (int bx = 0; bx < bins; ++bx) {
        const auto [x0, x1] = cell_range(roi.x0, roi.x1, W, bx);
        for (int c = 0; c < C; ++c) {
          T best = -std::numeric_limits<T>::infinity();
          int best_idx = -1;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) {
              const int idx = (c * H + y) * W + x;
              if (f[idx] > best) {
                best = f[idx];
                best_idx = idx;
              }
            }
          const std::size_t o = static_cast<std::size_t>(r) * F + (c * bins + by) * bins + bx;
          out[o] = best;
          (*argmax)[o] = best_idx;
        }
      }
    }
  }
  auto fn = feat.node();
  return make_result<T>(std::move(out), {feat}, [=](Node<T>& self) {
    auto& g = fn->grad_buffer();
    for (std::size_t o = 0; o < argmax->size(); ++o)
      g[static_cast<std::size_t>((*argmax)[o])] += self.grad[o];
  });
}

}  // namespace dam::nn

#endif  // DAM_NN_OPS_HPP
