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

#ifndef DAM_TRAINER_TRAINER_HPP
#define DAM_TRAINER_TRAINER_HPP

// Joint training of the detector and the multi-domain discriminator on
// batches of n+2 images: source, its n shifted copies, and one target image.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/core/errors.hpp"
#include "dam/core/types.hpp"
#include "dam/detector/detector.hpp"
#include "dam/mrl/mrl.hpp"
#include "dam/nn/optim.hpp"
#include "dam/shifter/bundle.hpp"
#include "dam/synthdata/render.hpp"

namespace dam::trainer {

using nn::Var;

struct DomainEntry {
  Image pixels;
  DomainId domain;
  std::optional<std::vector<Annotation>> annotations;  // absent for the target entry
};

struct DomainBatch {
  std::vector<DomainEntry> entries;

  int shifted_count() const { return static_cast<int>(entries.size()) - 2; }

  /// Canonical order 0..n+1; labels on every entry but the last; shifted
  /// entries carry the source's annotations.
  void validate() const {
    if (entries.size() < 2) throw std::invalid_argument("DomainBatch: fewer than two entries");
    const int n = shifted_count();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& e = entries[i];
      if (e.domain.value != static_cast<int>(i))
        throw std::invalid_argument("DomainBatch: entry " + std::to_string(i) + " has domain " +
                                    std::to_string(e.domain.value));
      require_image(e.pixels, "DomainBatch");
      const bool is_target = e.domain.value == DomainId::target(n).value;
      if (is_target && e.annotations)
        throw std::invalid_argument("DomainBatch: target entry must not carry annotations");
      if (!is_target && !e.annotations)
        throw std::invalid_argument("DomainBatch: labelled entry " + std::to_string(i) +
                                    " has no annotations");
    }
    for (int i = 1; i <= n; ++i)
      if (*entries[static_cast<std::size_t>(i)].annotations != *entries[0].annotations)
        throw std::invalid_argument("DomainBatch: shifted entry annotations differ from source");
  }
};

/// Batch from already-translated copies of x_s (one per shifter, in order).
inline DomainBatch compose_batch_from(const LabeledImage& x_s, const std::vector<Image>& shifted,
                                      const UnlabeledImage& x_t) {
  DomainBatch b;
  b.entries.push_back({x_s.pixels, DomainId::source(), x_s.annotations});
  for (std::size_t i = 0; i < shifted.size(); ++i)
    b.entries.push_back({shifted[i], DomainId::shifted(static_cast<int>(i) + 1), x_s.annotations});
  b.entries.push_back({x_t.pixels, DomainId::target(static_cast<int>(shifted.size())), std::nullopt});
  return b;
}

inline DomainBatch compose_batch(const LabeledImage& x_s, const UnlabeledImage& x_t,
                                 const std::vector<shifter::ShifterBundle<float>>& shifters) {
  std::vector<Image> shifted;
  shifted.reserve(shifters.size());
  for (const auto& s : shifters) shifted.push_back(shifter::apply_shifter(s, x_s).pixels);
  return compose_batch_from(x_s, shifted, x_t);
}

struct FrameworkOptions {
  bool use_mrl = true;
  mrl::GradientReversal grl;
  mrl::Reduction reduction = mrl::Reduction::sum;
  double mrl_weight = 1.0;
  double loc_weight = 1.0;
  double cls_weight = 1.0;
};

template <class T>
struct FrameworkLoss {
  Var<T> total;
  Var<T> mrl;
  Var<T> loc;
  Var<T> cls;
};

/// Loss terms contributed by one batch entry. The target entry only feeds
/// the domain discriminator.
template <class T>
FrameworkLoss<T> entry_loss(const DomainEntry& e, int n_shifted, const detector::Detector<T>& det,
                            const mrl::MultiDomainDiscriminator<T>& disc, const FrameworkOptions& opt,
                            double lambda) {
  FrameworkLoss<T> out{detector::zero_scalar<T>(), detector::zero_scalar<T>(),
                       detector::zero_scalar<T>(), detector::zero_scalar<T>()};
  if (!opt.use_mrl && !e.annotations) return out;
  auto f = det.backbone(e.pixels);
  if (!f.value().all_finite()) throw DivergenceError("detector backbone", -1);
  if (opt.use_mrl) {
    if (disc.config().shifted_domains != n_shifted)
      throw std::invalid_argument("framework_loss: discriminator built for " +
                                  std::to_string(disc.config().shifted_domains) +
                                  " shifted domains, batch has " + std::to_string(n_shifted));
    out.mrl = mrl::mrl_loss(mrl::grl(f, lambda), e.domain, disc, opt.reduction);
  }
  if (e.annotations) {
    auto l = det.forward_train(f, *e.annotations, image_width(e.pixels), image_height(e.pixels)).losses;
    out.loc = l.loc;
    out.cls = l.cls;
  }
  out.total = nn::sum_scalars<T>({nn::scale(out.mrl, static_cast<T>(opt.mrl_weight)),
                                  nn::scale(out.loc, static_cast<T>(opt.loc_weight)),
                                  nn::scale(out.cls, static_cast<T>(opt.cls_weight))});
  return out;
}

template <class T>
FrameworkLoss<T> sum_losses(const std::vector<FrameworkLoss<T>>& parts) {
  std::vector<Var<T>> total, m, l, c;
  for (const auto& p : parts) {
    total.push_back(p.total);
    m.push_back(p.mrl);
    l.push_back(p.loc);
    c.push_back(p.cls);
  }
  return {nn::sum_scalars<T>(total), nn::sum_scalars<T>(m), nn::sum_scalars<T>(l),
          nn::sum_scalars<T>(c)};
}

/// L = w_mrl * L_MRL + w_loc * L_LOC + w_cls * L_CLS over the whole batch.
template <class T>
FrameworkLoss<T> framework_loss(const DomainBatch& batch, const detector::Detector<T>& det,
                                const mrl::MultiDomainDiscriminator<T>& disc,
                                const FrameworkOptions& opt = {}, double progress = 0.0) {
  batch.validate();
  std::vector<FrameworkLoss<T>> parts;
  for (const auto& e : batch.entries)
    parts.push_back(entry_loss(e, batch.shifted_count(), det, disc, opt, opt.grl.at(progress)));
  return sum_losses(parts);
}

struct TrainSchedule {
  int total_iters = 3000;
  int iters_stage1 = 2000;
  double lr_stage1 = 1e-3;
  double lr_stage2 = 1e-4;
  std::uint64_t seed = 1;
  int accumulation_chunks = 1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Global gradient-norm cap applied before each update; 0 disables.
  double clip_norm = 0.0;
  int checkpoint_every = 0;

  void validate() const {
    if (total_iters < 0) throw std::invalid_argument("TrainSchedule: total_iters < 0");
    if (iters_stage1 < 0 || iters_stage1 > total_iters)
      throw std::invalid_argument("TrainSchedule: iters_stage1 must lie in [0, total_iters]");
    if (!(lr_stage1 > 0) || !(lr_stage2 > 0))
      throw std::invalid_argument("TrainSchedule: learning rates must be > 0");
    if (accumulation_chunks < 1) throw std::invalid_argument("TrainSchedule: accumulation_chunks < 1");
  }
  double lr_at(int iteration) const { return iteration < iters_stage1 ? lr_stage1 : lr_stage2; }
};

struct LossRecord {
  int iteration = 0;
  double mrl = 0;
  double loc = 0;
  double cls = 0;
  double total = 0;
  double lr = 0;
};

inline void write_history_csv(std::ostream& os, const std::vector<LossRecord>& h) {
  os << "iteration,mrl,loc,cls,total,lr\n";
  char buf[256];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.iteration, r.mrl, r.loc, r.cls,
                  r.total, r.lr);
    os << buf;
  }
}

/// Detector and discriminator parameters in one list (the update set).
template <class T>
nn::ParameterList<T> joint_parameters(const detector::Detector<T>& det,
                                      const mrl::MultiDomainDiscriminator<T>& disc) {
  auto p = det.parameters();
  disc.collect(p, "mrl_disc");
  return p;
}

template <class T>
void clip_gradients(nn::ParameterList<T>& params, double max_norm) {
  if (max_norm <= 0) return;
  double sq = 0;
  for (const auto& [name, v] : params) {
    Var<T> h = v;
    for (T g : h.grad().storage()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const T s = static_cast<T>(max_norm / norm);
  for (const auto& [name, v] : params) {
    Var<T> h = v;
    h.grad() *= s;
  }
}

/// One update. Entries are split into `accumulation_chunks` contiguous
/// groups; each group's loss is back-propagated separately and gradients
/// accumulate before a single optimizer step.
template <class T>
LossRecord train_step(const DomainBatch& batch, const detector::Detector<T>& det,
                      const mrl::MultiDomainDiscriminator<T>& disc, nn::Sgd<T>& opt,
                      const TrainSchedule& schedule, const FrameworkOptions& fw, int iteration = 0) {
  batch.validate();
  const int E = static_cast<int>(batch.entries.size());
  const int chunks = schedule.accumulation_chunks;
  if (chunks < 1 || chunks > E)
    throw std::invalid_argument("train_step: accumulation_chunks must lie in [1, " +
                                std::to_string(E) + "]");
  const double progress =
      schedule.total_iters > 0 ? static_cast<double>(iteration) / schedule.total_iters : 0.0;
  const double lambda = fw.grl.at(progress);
  opt.zero_grad();
  LossRecord rec;
  rec.iteration = iteration;
  rec.lr = schedule.lr_at(iteration);
  for (int c = 0; c < chunks; ++c) {
    const int lo = c * E / chunks, hi = (c + 1) * E / chunks;
    std::vector<FrameworkLoss<T>> parts;
    try {
      for (int i = lo; i < hi; ++i)
        parts.push_back(entry_loss(batch.entries[static_cast<std::size_t>(i)],
                                   batch.shifted_count(), det, disc, fw, lambda));
    } catch (const DivergenceError&) {
      throw DivergenceError("trainer", iteration);
    }
    auto part = sum_losses(parts);
    const double v = static_cast<double>(part.total.item());
    if (!std::isfinite(v)) throw DivergenceError("trainer", iteration);
    nn::backward(part.total);
    rec.mrl += static_cast<double>(part.mrl.item());
    rec.loc += static_cast<double>(part.loc.item());
    rec.cls += static_cast<double>(part.cls.item());
    rec.total += v;
  }
  clip_gradients(opt.params(), schedule.clip_norm);
  opt.step(rec.lr);
  return rec;
}

template <class T>
struct TrainResult {
  detector::Detector<T> detector;
  mrl::MultiDomainDiscriminator<T> disc;
  std::vector<LossRecord> history;
};

struct TrainInputs {
  const LabeledDataset* source = nullptr;
  const UnlabeledDataset* target = nullptr;
  // shifted[i][j] = shifter i applied to source item j.
  std::vector<std::vector<Image>> shifted;
};

/// Translates every source image once with each (frozen) shifter.
inline std::vector<std::vector<Image>> precompute_shifted(
    const LabeledDataset& source, const std::vector<shifter::ShifterBundle<float>>& shifters) {
  std::vector<std::vector<Image>> out;
  for (const auto& s : shifters) {
    std::vector<Image> v;
    v.reserve(source.size());
    for (const auto& item : source.items) v.push_back(shifter::translate(s, item.pixels));
    out.push_back(std::move(v));
  }
  return out;
}

/// Full training loop: uniform sampling with replacement of (x_s, x_t) each
/// iteration, two-stage learning rate. Initial weights derive from the seed.
template <class T>
TrainResult<T> train(
    const TrainInputs& in, const TrainSchedule& schedule, const detector::DetectorConfig& det_cfg,
    const mrl::DiscriminatorConfig& disc_cfg, const FrameworkOptions& fw,
    const std::function<void(int, const TrainResult<T>&)>& on_checkpoint = {},
    const std::function<void(const LossRecord&)>& on_record = {}) {
  schedule.validate();
  if (!in.source || !in.target || in.source->empty() || in.target->empty())
    throw std::invalid_argument("train: source and target datasets must be non-empty");
  for (const auto& s : in.shifted)
    if (s.size() != in.source->size())
      throw std::invalid_argument("train: shifted copies do not match the source set");
  const int n = static_cast<int>(in.shifted.size());
  if (fw.use_mrl && disc_cfg.shifted_domains != n)
    throw std::invalid_argument("train: discriminator configured for a different n");

  TrainResult<T> r{detector::Detector<T>(det_cfg, synth::derive_seed(schedule.seed, 11, 0)), {}, {}};
  {
    nn::Rng disc_rng(synth::derive_seed(schedule.seed, 12, 0));
    r.disc = mrl::MultiDomainDiscriminator<T>(disc_cfg, disc_rng);
  }
  auto params = fw.use_mrl ? joint_parameters(r.detector, r.disc) : r.detector.parameters();
  nn::Sgd<T> opt(params, schedule.momentum, schedule.weight_decay);
  std::mt19937_64 rng(synth::derive_seed(schedule.seed, 13, 0));
  r.history.reserve(static_cast<std::size_t>(schedule.total_iters));

  for (int it = 0; it < schedule.total_iters; ++it) {
    const std::size_t si = static_cast<std::size_t>(rng() % in.source->size());
    const std::size_t ti = static_cast<std::size_t>(rng() % in.target->size());
    std::vector<Image> shifted;
    shifted.reserve(in.shifted.size());
    for (const auto& s : in.shifted) shifted.push_back(s[si]);
    const auto batch = compose_batch_from((*in.source)[si], shifted, (*in.target)[ti]);
    auto rec = train_step(batch, r.detector, r.disc, opt, schedule, fw, it);
    r.history.push_back(rec);
    if (on_record) on_record(rec);
    if (on_checkpoint && schedule.checkpoint_every > 0 && (it + 1) % schedule.checkpoint_every == 0)
      on_checkpoint(it + 1, r);
  }
  params.zero_grad();
  return r;
}

}  // namespace dam::trainer

#endif  // DAM_TRAINER_TRAINER_HPP
