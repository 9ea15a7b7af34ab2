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

#ifndef DAM_SHIFTER_TRAIN_HPP
#define DAM_SHIFTER_TRAIN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "dam/core/errors.hpp"
#include "dam/nn/optim.hpp"
#include "dam/shifter/losses.hpp"

namespace dam::shifter {

struct ShifterSchedule {
  int iterations = 2000;
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  // Square random crop side; 0 trains on whole images.
  int crop = 32;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;
};

struct ShifterLossRecord {
  int iteration = 0;
  double gan = 0;
  double disc = 0;
  double constraint = 0;
  double total = 0;
};

namespace detail {

inline Image random_crop(const Image& im, int crop, std::mt19937_64& rng) {
  const int C = image_channels(im), H = image_height(im), W = image_width(im);
  if (crop <= 0 || (crop >= H && crop >= W)) return im;
  const int ch = std::min(crop, H), cw = std::min(crop, W);
  const int y0 = static_cast<int>(rng() % static_cast<std::uint64_t>(H - ch + 1));
  const int x0 = static_cast<int>(rng() % static_cast<std::uint64_t>(W - cw + 1));
  Image out({C, ch, cw});
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < cw; ++x) out.at(c, y, x) = im.at(c, y0 + y, x0 + x);
  return out;
}

template <class T>
void check_finite(double v, int iteration) {
  if (!std::isfinite(v)) throw DivergenceError("shifter", iteration);
}

}  // namespace detail

/// Alternating generator / discriminator updates (1:1), Adam on both sides.
/// `on_checkpoint` fires every schedule.checkpoint_every iterations.
template <class T>
std::vector<ShifterLossRecord> train_shifter(
    ShifterBundle<T>& b, const std::vector<Image>& source, const std::vector<Image>& target,
    const ShifterSchedule& schedule,
    const std::function<void(int, const ShifterBundle<T>&)>& on_checkpoint = {}) {
  if (source.empty() || target.empty())
    throw std::invalid_argument("train_shifter: source and target must be non-empty");
  b.check_invariants();
  auto gen_params = b.generator_parameters();
  auto disc_params = b.discriminator_parameters();
  nn::Adam<T> gen_opt(gen_params, schedule.adam_beta1, schedule.adam_beta2);
  nn::Adam<T> disc_opt(disc_params, schedule.adam_beta1, schedule.adam_beta2);
  std::mt19937_64 rng(schedule.seed);
  const T beta = static_cast<T>(b.config.beta);
  std::vector<ShifterLossRecord> history;
  history.reserve(static_cast<std::size_t>(std::max(0, schedule.iterations)));

  for (int it = 0; it < schedule.iterations; ++it) {
    const auto& src = source[static_cast<std::size_t>(rng() % source.size())];
    const auto& tgt = target[static_cast<std::size_t>(rng() % target.size())];
    auto x_s = Var<T>::constant(detail::random_crop(src, schedule.crop, rng).template cast<T>());
    auto x_t = Var<T>::constant(detail::random_crop(tgt, schedule.crop, rng).template cast<T>());

    // Generator step with the discriminators frozen.
    disc_params.set_requires_grad(false);
    gen_opt.zero_grad();
    auto fake = b.forward(x_s);
    Var<T> inv;
    std::vector<Var<T>> con_terms;
    if (b.config.kind != ConstraintKind::reconstruction)
      con_terms.push_back(color_preservation_loss(b.forward, x_t));
    if (b.has_inverse()) {
      inv = (*b.inverse)(x_t);
      con_terms.push_back(generator_adversarial_loss(*b.inverse_disc, inv, b.gan_mode));
      con_terms.push_back(nn::mean_abs_diff((*b.inverse)(fake), x_s));
      con_terms.push_back(nn::mean_abs_diff(b.forward(inv), x_t));
    }
    auto gan = generator_adversarial_loss(b.forward_disc, fake, b.gan_mode);
    auto constraint = nn::sum_scalars<T>(con_terms);
    auto total = nn::add(gan, nn::scale(constraint, beta));
    detail::check_finite<T>(static_cast<double>(total.item()), it);
    nn::backward(total);
    gen_opt.step(schedule.lr);
    disc_params.set_requires_grad(true);

    // Discriminator step on the translations made before the update.
    disc_opt.zero_grad();
    std::vector<Var<T>> disc_terms{discriminator_loss(
        b.forward_disc, x_t, Var<T>::constant(fake.value()), b.gan_mode)};
    if (b.has_inverse())
      disc_terms.push_back(
          discriminator_loss(*b.inverse_disc, x_s, Var<T>::constant(inv.value()), b.gan_mode));
    auto disc = nn::sum_scalars<T>(disc_terms);
    detail::check_finite<T>(static_cast<double>(disc.item()), it);
    nn::backward(disc);
    disc_opt.step(schedule.lr);

    history.push_back({it, static_cast<double>(gan.item()), static_cast<double>(disc.item()),
                       static_cast<double>(constraint.item()), static_cast<double>(total.item())});
    if (on_checkpoint && schedule.checkpoint_every > 0 && (it + 1) % schedule.checkpoint_every == 0)
      on_checkpoint(it + 1, b);
  }
  gen_params.zero_grad();
  disc_params.zero_grad();
  return history;
}

/// Fraction of held-out images the forward discriminator labels correctly:
/// real target images should score a positive mean logit, translated source
/// images a negative one.
template <class T>
double discriminator_accuracy(const ShifterBundle<T>& b, const std::vector<Image>& source,
                              const std::vector<Image>& target) {
  nn::NoGradGuard guard;
  const double threshold = b.gan_mode == GanMode::log_loss ? 0.0 : 0.5;
  std::size_t correct = 0, total = 0;
  auto mean_logit = [&](const Image& im) {
    auto out = b.forward_disc(Var<T>::constant(im.template cast<T>()));
    return static_cast<double>(out.value().sum()) / static_cast<double>(out.value().size());
  };
  for (const auto& im : target) {
    correct += mean_logit(im) > threshold ? 1 : 0;
    ++total;
  }
  for (const auto& im : source) {
    correct += mean_logit(translate(b, im)) <= threshold ? 1 : 0;
    ++total;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace dam::shifter

#endif  // DAM_SHIFTER_TRAIN_HPP
