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

#ifndef DAM_SHIFTER_BUNDLE_HPP
#define DAM_SHIFTER_BUNDLE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "dam/core/types.hpp"
#include "dam/nn/checkpoint.hpp"
#include "dam/shifter/networks.hpp"

namespace dam::shifter {

enum class ConstraintKind { color_preservation, reconstruction, both };

inline std::string_view to_string(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::color_preservation: return "color_preservation";
    case ConstraintKind::reconstruction: return "reconstruction";
    case ConstraintKind::both: return "both";
  }
  return "?";
}

/// Accepts the long names and the short forms CP, R and CP+R.
inline ConstraintKind parse_constraint_kind(std::string_view s) {
  if (s == "color_preservation" || s == "CP" || s == "cp") return ConstraintKind::color_preservation;
  if (s == "reconstruction" || s == "R" || s == "r") return ConstraintKind::reconstruction;
  if (s == "both" || s == "CP+R" || s == "cp+r") return ConstraintKind::both;
  throw std::invalid_argument("unknown constraint kind '" + std::string(s) + "'");
}

inline bool needs_inverse_pair(ConstraintKind k) { return k != ConstraintKind::color_preservation; }

/// Default constraint weight per kind.
inline double default_beta(ConstraintKind k) {
  return k == ConstraintKind::color_preservation ? 5.0 : 10.0;
}

enum class GanMode { log_loss, least_squares };

inline std::string_view to_string(GanMode m) {
  return m == GanMode::log_loss ? "log_loss" : "least_squares";
}
inline GanMode parse_gan_mode(std::string_view s) {
  if (s == "log_loss") return GanMode::log_loss;
  if (s == "least_squares") return GanMode::least_squares;
  throw std::invalid_argument("unknown gan mode '" + std::string(s) + "'");
}

struct ConstraintConfig {
  ConstraintKind kind = ConstraintKind::color_preservation;
  double beta = 5.0;

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw std::invalid_argument("ConstraintConfig: beta must be finite and >= 0");
  }
  friend bool operator==(const ConstraintConfig&, const ConstraintConfig&) = default;
};

/// Forward translator G with its discriminator D, plus the inverse pair
/// (G', D') when the constraint needs reconstruction.
template <class T>
struct ShifterBundle {
  Generator<T> forward;
  PatchDiscriminator<T> forward_disc;
  std::optional<Generator<T>> inverse;
  std::optional<PatchDiscriminator<T>> inverse_disc;
  ConstraintConfig config;
  GanMode gan_mode = GanMode::log_loss;
  std::uint64_t seed = 0;

  static ShifterBundle create(const ConstraintConfig& config, const GeneratorConfig& gcfg,
                              const DiscriminatorConfig& dcfg, std::uint64_t seed,
                              GanMode mode = GanMode::log_loss) {
    config.validate();
    Rng rng(seed);
    ShifterBundle b;
    b.config = config;
    b.gan_mode = mode;
    b.seed = seed;
    b.forward = Generator<T>(gcfg, rng);
    b.forward_disc = PatchDiscriminator<T>(dcfg, rng);
    if (needs_inverse_pair(config.kind)) {
      b.inverse = Generator<T>(gcfg, rng);
      b.inverse_disc = PatchDiscriminator<T>(dcfg, rng);
    }
    return b;
  }

  bool has_inverse() const { return inverse.has_value() && inverse_disc.has_value(); }

  void check_invariants() const {
    if (has_inverse() != needs_inverse_pair(config.kind))
      throw std::logic_error(std::string("ShifterBundle: inverse pair presence does not match kind ") +
                             std::string(to_string(config.kind)));
  }

  ParameterList<T> generator_parameters() const {
    ParameterList<T> p;
    forward.collect(p, "forward");
    if (inverse) inverse->collect(p, "inverse");
    return p;
  }
  ParameterList<T> discriminator_parameters() const {
    ParameterList<T> p;
    forward_disc.collect(p, "forward_disc");
    if (inverse_disc) inverse_disc->collect(p, "inverse_disc");
    return p;
  }
  ParameterList<T> all_parameters() const {
    auto p = generator_parameters();
    p.append(discriminator_parameters());
    return p;
  }

  /// Independent copy with its own parameter storage.
  ShifterBundle clone() const {
    auto b = create(config, forward.config(), forward_disc.config(), seed, gan_mode);
    auto dst = b.all_parameters();
    nn::copy_values(all_parameters(), dst);
    return b;
  }
};

template <class T>
void save_shifter(const std::filesystem::path& path, const ShifterBundle<T>& b,
                  const nlohmann::json& extra = nlohmann::json::object()) {
  nn::Checkpoint ck;
  const auto& g = b.forward.config();
  const auto& d = b.forward_disc.config();
  ck.meta = {{"type", "shifter"},
             {"kind", std::string(to_string(b.config.kind))},
             {"beta", b.config.beta},
             {"gan_mode", std::string(to_string(b.gan_mode))},
             {"seed", b.seed},
             {"generator", {{"channels", g.channels}, {"width", g.width},
                            {"residual_blocks", g.residual_blocks},
                            {"identity_init", g.identity_init}}},
             {"discriminator", {{"channels", d.channels}, {"width", d.width}}},
             {"extra", extra}};
  nn::store_parameters(ck, b.all_parameters(), "");
  nn::write_checkpoint(path, ck);
}

template <class T>
ShifterBundle<T> load_shifter(const std::filesystem::path& path) {
  const auto ck = nn::read_checkpoint(path);
  if (ck.meta.value("type", "") != "shifter")
    throw std::runtime_error(path.string() + " is not a shifter checkpoint");
  ConstraintConfig cc{parse_constraint_kind(ck.meta.at("kind").get<std::string>()),
                      ck.meta.at("beta").get<double>()};
  GeneratorConfig g;
  const auto& gj = ck.meta.at("generator");
  g.channels = gj.at("channels");
  g.width = gj.at("width");
  g.residual_blocks = gj.at("residual_blocks");
  g.identity_init = gj.at("identity_init");
  DiscriminatorConfig d;
  d.channels = ck.meta.at("discriminator").at("channels");
  d.width = ck.meta.at("discriminator").at("width");
  auto b = ShifterBundle<T>::create(cc, g, d, ck.meta.at("seed").get<std::uint64_t>(),
                                    parse_gan_mode(ck.meta.at("gan_mode").get<std::string>()));
  auto params = b.all_parameters();
  nn::load_parameters(ck, params, "");
  return b;
}

/// Translates the pixels; annotations are copied unchanged.
template <class T>
LabeledImage apply_shifter(const ShifterBundle<T>& b, const LabeledImage& x) {
  nn::NoGradGuard guard;
  auto out = b.forward(Var<T>::constant(x.pixels.template cast<T>()));
  LabeledImage y;
  y.pixels = out.value().template cast<float>();
  for (auto& v : y.pixels.storage()) v = std::clamp(v, 0.0f, 1.0f);
  y.annotations = x.annotations;
  y.id = x.id;
  return y;
}

template <class T>
Image translate(const ShifterBundle<T>& b, const Image& x) {
  nn::NoGradGuard guard;
  auto out = b.forward(Var<T>::constant(x.template cast<T>())).value().template cast<float>();
  for (auto& v : out.storage()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace dam::shifter

#endif  // DAM_SHIFTER_BUNDLE_HPP
