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

#ifndef DAM_SHIFTER_LOSSES_HPP
#define DAM_SHIFTER_LOSSES_HPP

#include <cmath>
#include <stdexcept>

#include "dam/shifter/bundle.hpp"

namespace dam::shifter {

struct GanLossValues {
  double disc_loss = 0;
  double gen_loss = 0;
};

/// Adversarial losses from discriminator logit grids.
///   log_loss:      disc = -mean log s(real) - mean log(1 - s(fake)),
///                  gen  = -mean log s(fake)            (non-saturating)
///   least_squares: disc = mean (real - 1)^2 + mean fake^2,
///                  gen  = mean (fake - 1)^2
template <class T>
GanLossValues gan_loss(const nn::Tensor<T>& real_logits, const nn::Tensor<T>& fake_logits,
                       GanMode mode = GanMode::log_loss) {
  if (real_logits.empty() || fake_logits.empty())
    throw std::invalid_argument("gan_loss: empty logit grid");
  if (!real_logits.all_finite() || !fake_logits.all_finite())
    throw std::invalid_argument("gan_loss: non-finite logits");
  nn::NoGradGuard guard;
  auto real = Var<T>::constant(real_logits);
  auto fake = Var<T>::constant(fake_logits);
  GanLossValues v;
  if (mode == GanMode::log_loss) {
    v.disc_loss = static_cast<double>(nn::bce_with_logits_mean(real, T(1)).item() +
                                      nn::bce_with_logits_mean(fake, T(0)).item());
    v.gen_loss = static_cast<double>(nn::bce_with_logits_mean(fake, T(1)).item());
  } else {
    v.disc_loss = static_cast<double>(nn::mse_to_constant(real, T(1)).item() +
                                      nn::mse_to_constant(fake, T(0)).item());
    v.gen_loss = static_cast<double>(nn::mse_to_constant(fake, T(1)).item());
  }
  return v;
}

/// Discriminator side of the adversarial loss; `fake` should be detached.
template <class T>
Var<T> discriminator_loss(const PatchDiscriminator<T>& d, const Var<T>& real, const Var<T>& fake,
                          GanMode mode) {
  auto r = d(real);
  auto f = d(fake);
  if (mode == GanMode::log_loss)
    return nn::add(nn::bce_with_logits_mean(r, T(1)), nn::bce_with_logits_mean(f, T(0)));
  return nn::add(nn::mse_to_constant(r, T(1)), nn::mse_to_constant(f, T(0)));
}

/// Generator side of the adversarial loss for an already translated image.
template <class T>
Var<T> generator_adversarial_loss(const PatchDiscriminator<T>& d, const Var<T>& fake, GanMode mode) {
  auto f = d(fake);
  return mode == GanMode::log_loss ? nn::bce_with_logits_mean(f, T(1)) : nn::mse_to_constant(f, T(1));
}

/// Mean |G(x_t) - x_t| over pixels and channels, on target-domain input.
template <class T>
Var<T> color_preservation_loss(const Generator<T>& g, const Var<T>& x_t) {
  auto y = g(x_t);
  if (y.shape() != x_t.shape())
    throw std::invalid_argument("color_preservation_loss: generator changed the image shape");
  return nn::mean_abs_diff(y, x_t);
}

template <class T>
struct ReconstructionTerms {
  Var<T> inverse_adversarial;  // generator side for G' against D'
  Var<T> inverse_disc;         // D' side, on a detached G'(x_t)
  Var<T> cycle_source;         // mean |G'(G(x_s)) - x_s|
  Var<T> cycle_target;         // mean |G(G'(x_t)) - x_t|
  Var<T> total;                // inverse_adversarial + cycle_source + cycle_target
};

/// Reconstruction constraint: the inverse pair's adversarial terms plus both
/// cycle terms. `total` is the part that trains G and G'; D' trains on
/// `inverse_disc`.
template <class T>
ReconstructionTerms<T> reconstruction_loss(const ShifterBundle<T>& b, const Var<T>& x_s,
                                           const Var<T>& x_t) {
  if (!b.has_inverse())
    throw std::logic_error(std::string("reconstruction_loss: bundle of kind ") +
                           std::string(to_string(b.config.kind)) + " has no inverse pair");
  const auto& g = b.forward;
  const auto& gi = *b.inverse;
  const auto& di = *b.inverse_disc;
  ReconstructionTerms<T> t;
  auto inv_t = gi(x_t);
  t.inverse_adversarial = generator_adversarial_loss(di, inv_t, b.gan_mode);
  t.inverse_disc = discriminator_loss(di, x_s, Var<T>::constant(inv_t.value()), b.gan_mode);
  t.cycle_source = nn::mean_abs_diff(gi(g(x_s)), x_s);
  t.cycle_target = nn::mean_abs_diff(g(inv_t), x_t);
  t.total = nn::sum_scalars<T>({t.inverse_adversarial, t.cycle_source, t.cycle_target});
  return t;
}

template <class T>
struct ShifterTerms {
  Var<T> gan;         // generator side of the forward adversarial loss
  Var<T> disc;        // D side, on a detached G(x_s)
  Var<T> constraint;  // dispatched by kind
  Var<T> total;       // gan + beta * constraint
  double color_preservation = 0;
  double reconstruction = 0;
  std::optional<ReconstructionTerms<T>> recon;
};

/// Domain-shifter objective L_DS = L_GAN + beta * L_con.
template <class T>
ShifterTerms<T> shifter_objective(const ShifterBundle<T>& b, const Var<T>& x_s, const Var<T>& x_t) {
  b.check_invariants();
  ShifterTerms<T> out;
  auto fake = b.forward(x_s);
  out.gan = generator_adversarial_loss(b.forward_disc, fake, b.gan_mode);
  out.disc = discriminator_loss(b.forward_disc, x_t, Var<T>::constant(fake.value()), b.gan_mode);
  std::vector<Var<T>> parts;
  if (b.config.kind != ConstraintKind::reconstruction) {
    auto cp = color_preservation_loss(b.forward, x_t);
    out.color_preservation = static_cast<double>(cp.item());
    parts.push_back(cp);
  }
  if (b.config.kind != ConstraintKind::color_preservation) {
    out.recon = reconstruction_loss(b, x_s, x_t);
    out.reconstruction = static_cast<double>(out.recon->total.item());
    parts.push_back(out.recon->total);
  }
  out.constraint = nn::sum_scalars<T>(parts);
  out.total = nn::add(out.gan, nn::scale(out.constraint, static_cast<T>(b.config.beta)));
  return out;
}

}  // namespace dam::shifter

#endif  // DAM_SHIFTER_LOSSES_HPP
