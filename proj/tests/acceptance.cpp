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

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Usage: dam_acceptance [work_dir] [--config file.json]
// Criteria 7-11 run the full pipeline with the default experiment config.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dam/cli/commands.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dam;
namespace fs = std::filesystem;
using dam::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1: GRL

Outcome grl_contract() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  nn::Rng init(3);
  nn::Conv2d<double> stub(1, 2, 3, 1, 1, init);
  nn::Rng dinit(4);
  mrl::MultiDomainDiscriminator<double> disc({2, 1, 1}, dinit);
  nn::ParameterList<double> backbone;
  stub.collect(backbone, "stub");
  auto dp = disc.parameters();
  const std::size_t count = backbone.scalar_count() + dp.scalar_count();
  dam::testing::jitter(backbone, rng);
  dam::testing::jitter(dp, rng);
  const auto x = nn::Var<double>::constant(random_tensor({1, 5, 5}, rng));
  double worst = 0;
  for (double lambda : {1.0, 0.5, 0.1}) {
    const auto plain = dam::testing::grad_check(backbone, [&] { return mrl::mrl_loss(stub(x), DomainId{2}, disc); });
    backbone.zero_grad();
    nn::backward(mrl::mrl_loss(mrl::grl(stub(x), lambda), DomainId{2}, disc));
    const auto reversed = backbone.flat_grads();
    double diff = 0, norm = 0;
    for (std::size_t i = 0; i < reversed.size(); ++i) {
      const double want = -lambda * plain.numeric[i];
      diff += (reversed[i] - want) * (reversed[i] - want);
      norm += want * want;
    }
    worst = std::max(worst, std::sqrt(diff / norm));
    backbone.zero_grad();
  }
  const double t = seconds_since(t0);
  return {count <= 100 && worst < 1e-3 && t < 10,
          std::to_string(count) + " params, max rel err " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t)};
}

// ------------------------------------------------------------ 2: MRL loss

Outcome mrl_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> n_dist(0, 3), hw(1, 8);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = n_dist(rng) + 2, H = hw(rng), W = hw(rng);
    const auto l = random_tensor({K, H, W}, rng, -8, 8);
    const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
    const double got = mrl::mrl_loss_from_logits(nn::Var<double>::constant(l), DomainId{label}).item();
    worst = std::max(worst, std::abs(got - dam::testing::reference_mrl_loss(l, label)));
  }
  double uniform = 0;
  for (int n = 0; n <= 3; ++n)
    for (int H : {1, 4, 7})
      for (int W : {1, 5, 8}) {
        nn::Tensor<double> u({n + 2, H, W});
        u.fill(-1.25);
        const double got = mrl::mrl_loss_from_logits(nn::Var<double>::constant(u), DomainId{n}).item();
        uniform = std::max(uniform, std::abs(got - H * W * std::log(n + 2.0)));
      }
  const double t = seconds_since(t0);
  return {worst < 1e-6 && uniform < 1e-6 && t < 30,
          "max err " + fmt("%.2e", worst) + ", uniform err " + fmt("%.2e", uniform) + ", " + fmt("%.2f s", t)};
}

// ----------------------------------------------------- 3: loss composition

Outcome loss_composition() {
  std::mt19937_64 rng(5);
  auto image_var = [&] { return nn::Var<double>::constant(random_tensor({3, 8, 8}, rng, 0.05, 0.95)); };
  double worst = 0;
  using shifter::ConstraintKind;
  for (auto kind : {ConstraintKind::color_preservation, ConstraintKind::reconstruction, ConstraintKind::both})
    for (int trial = 0; trial < 10; ++trial) {
      std::uniform_real_distribution<double> u(0, 20);
      const double beta = u(rng);
      shifter::GeneratorConfig g;
      g.width = 4;
      g.residual_blocks = 1;
      g.identity_init = false;
      shifter::DiscriminatorConfig d;
      d.width = 4;
      auto b = shifter::ShifterBundle<double>::create({kind, beta}, g, d, 100 + trial);
      const auto xs = image_var(), xt = image_var();
      const auto t = shifter::shifter_objective(b, xs, xt);
      const double gan = shifter::generator_adversarial_loss(b.forward_disc, b.forward(xs), b.gan_mode).item();
      const double cp = kind != ConstraintKind::reconstruction ? shifter::color_preservation_loss(b.forward, xt).item() : 0;
      const double r = kind != ConstraintKind::color_preservation ? shifter::reconstruction_loss(b, xs, xt).total.item() : 0;
      worst = std::max({worst, std::abs(t.constraint.item() - (cp + r)),
                        std::abs(t.total.item() - (gan + beta * (cp + r)))});
    }
  detector::DetectorConfig dc;
  dc.backbone_widths = {8, 8, 8, 8};
  dc.rpn_hidden = 8;
  dc.head_hidden = 16;
  auto img = [&] { return random_tensor({3, 32, 32}, rng, 0, 1).cast<float>(); };
  for (int n = 0; n <= 3; ++n) {
    detector::Detector<double> det(dc, 20 + n);
    nn::Rng dr(30 + n);
    mrl::MultiDomainDiscriminator<double> disc({8, 4, n}, dr);
    std::vector<Image> shifted;
    for (int i = 0; i < n; ++i) shifted.push_back(img());
    const auto batch = trainer::compose_batch_from(
        {img(), {{{3, 4, 20, 22}, 1}, {{14, 10, 30, 28}, 3}}, "s"}, shifted, {img(), "t"});
    for (auto red : {mrl::Reduction::sum, mrl::Reduction::mean}) {
      trainer::FrameworkOptions fw;
      fw.reduction = red;
      fw.mrl_weight = 0.7;
      const auto l = trainer::framework_loss(batch, det, disc, fw);
      std::vector<std::pair<nn::Var<double>, DomainId>> feats;
      double loc = 0, cls = 0;
      for (const auto& e : batch.entries) {
        feats.push_back({det.backbone(e.pixels), e.domain});
        if (e.annotations) {
          const auto dl = det.detection_losses(LabeledImage{e.pixels, *e.annotations, ""});
          loc += dl.loc.item();
          cls += dl.cls.item();
        }
      }
      const double m = mrl::mrl_total(feats, disc, red).item();
      worst = std::max(worst, std::abs(l.total.item() - (0.7 * m + loc + cls)));
    }
  }
  return {worst < 1e-9, "max err " + fmt("%.2e", worst)};
}

// ------------------------------------------------------------------ 4: AP

Outcome ap_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = dam::testing::random_instance(rng);
    if (eval::average_precision(in.dets, in.gts) != dam::testing::oracle_ap11(in)) ++mismatches;
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 60, std::to_string(mismatches) + "/500 mismatches, " + fmt("%.2f s", t)};
}

// ------------------------------------------------------ 5: error taxonomy

Outcome error_taxonomy() {
  using eval::ErrorCategory;
  const std::vector<eval::GroundTruth> gts{{"x", {{{0, 0, 10, 10}, 2}}}};
  const auto counts = eval::classify_errors(
      {{2, 0.9, {0, 0, 10, 6}, "x"}, {2, 0.8, {0, 0, 10, 3}, "x"}, {2, 0.7, {0, 0, 10, 0.5}, "x"}}, gts);
  bool ok = counts == eval::ErrorCounts{1, 1, 1} &&
            eval::categorize_detection({2, 0.9, {0, 0, 10, 6}, "x"}, gts) == ErrorCategory::correct &&
            eval::categorize_detection({2, 0.9, {0, 0, 10, 3}, "x"}, gts) == ErrorCategory::mislocalization &&
            eval::categorize_detection({2, 0.9, {0, 0, 10, 0.5}, "x"}, gts) == ErrorCategory::background;
  std::mt19937_64 rng(7);
  int bad = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<eval::GroundTruth> g;
    std::vector<Detection> dets;
    for (int c = 0; c < 3; ++c) {
      auto in = dam::testing::random_instance(rng);
      for (const auto& [id, boxes] : in.gts) {
        eval::GroundTruth t{id, {}};
        for (const auto& b : boxes) t.annotations.push_back({b, c});
        g.push_back(t);
      }
      for (auto d : in.dets) {
        d.class_id = static_cast<int>(rng() % 3);
        dets.push_back(d);
      }
    }
    const std::size_t k = rng() % 30;
    const auto c = eval::classify_errors(dets, g, k);
    // Each ranked detection must land in exactly one bucket.
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dets[a].confidence > dets[b].confidence; });
    eval::ErrorCounts want;
    for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
      const auto& d = dets[order[r]];
      double best = 0;
      for (const auto& gt : g)
        if (gt.image_id == d.image_id)
          for (const auto& a : gt.annotations)
            if (a.class_id == d.class_id) best = std::max(best, iou(a.box, d.box));
      const int hits = (best >= 0.5) + (best >= 0.1 && best < 0.5) + (best < 0.1);
      if (hits != 1) ++bad;
      ++want[best >= 0.5 ? ErrorCategory::correct : best >= 0.1 ? ErrorCategory::mislocalization : ErrorCategory::background];
    }
    if (!(c == want) || c.total() != std::min(k, dets.size())) ++bad;
  }
  return {ok && bad == 0, std::string("fixtures ") + (ok ? "ok" : "wrong") + ", " + std::to_string(bad) + "/300 partition failures"};
}

// ------------------------------------------------ 6: gradient accumulation

Outcome accumulation() {
  std::mt19937_64 rng(7);
  detector::DetectorConfig dc;
  dc.backbone_widths = {8, 8, 8, 8};
  dc.rpn_hidden = 8;
  dc.head_hidden = 16;
  auto img = [&] { return random_tensor({3, 32, 32}, rng, 0, 1).cast<float>(); };
  double worst = 0;
  for (int n = 0; n <= 3; ++n) {
    std::vector<Image> shifted;
    for (int i = 0; i < n; ++i) shifted.push_back(img());
    const auto batch = trainer::compose_batch_from(
        {img(), {{{3, 4, 20, 22}, 1}, {{14, 10, 30, 28}, 3}}, "s"}, shifted, {img(), "t"});
    const detector::Detector<double> det0(dc, 70 + n);
    std::vector<double> reference;
    for (int chunks : {1, 2, n + 2}) {
      auto det = det0.clone();
      nn::Rng dr(80);
      mrl::MultiDomainDiscriminator<double> disc({8, 4, n}, dr);
      auto params = trainer::joint_parameters(det, disc);
      const auto start = params.flat_values();
      nn::Sgd<double> opt(params, 0.9, 5e-4);
      trainer::TrainSchedule s;
      s.lr_stage1 = 1e-2;
      s.accumulation_chunks = chunks;
      trainer::train_step(batch, det, disc, opt, s, {}, 0);
      const auto after = params.flat_values();
      std::vector<double> delta(after.size());
      for (std::size_t i = 0; i < after.size(); ++i) delta[i] = after[i] - start[i];
      if (chunks == 1) {
        reference = delta;
        continue;
      }
      double diff = 0, norm = 0;
      for (std::size_t i = 0; i < delta.size(); ++i) {
        diff += (delta[i] - reference[i]) * (delta[i] - reference[i]);
        norm += reference[i] * reference[i];
      }
      worst = std::max(worst, std::sqrt(diff / norm));
    }
  }
  return {worst < 1e-5, "n = 0..3, max rel diff " + fmt("%.2e", worst)};
}

// ------------------------------------------------------- 7-9: the ablation

double cell_median(const nlohmann::json& row, const char* method, const char* key) {
  const auto& c = row.at(method);
  if (!c.contains(key)) return std::nan("");
  return c.at(key).get<double>();
}

Outcome trend_main(const nlohmann::json& abl) {
  const auto& rows = abl.at("rows");
  const double base = cell_median(rows.at(0), "dd", "median_map");
  const double dd3 = cell_median(rows.at(3), "dd", "median_map");
  const double mrl3 = cell_median(rows.at(3), "dd_mrl", "median_map");
  const bool ok = base < dd3 && dd3 < mrl3 && mrl3 - base >= 0.05;
  return {ok, "mAP baseline " + fmt("%.3f", base) + " < DD(3) " + fmt("%.3f", dd3) + " < DD+MRL(3) " +
                  fmt("%.3f", mrl3) + ", gain " + fmt("%+.1f pts", 100 * (mrl3 - base))};
}

Outcome trend_offsets(const nlohmann::json& abl) {
  const auto& rows = abl.at("rows");
  bool ok = true;
  std::string d = "offsets";
  std::vector<double> off(4, std::nan(""));
  for (int n = 1; n <= 3; ++n) {
    const auto& r = rows.at(static_cast<std::size_t>(n));
    if (r.contains("offset")) off[static_cast<std::size_t>(n)] = r["offset"].get<double>();
    ok = ok && off[static_cast<std::size_t>(n)] >= 0;
    d += " n=" + std::to_string(n) + ":" + fmt("%+.1f", 100 * off[static_cast<std::size_t>(n)]);
  }
  ok = ok && off[3] >= off[1];
  return {ok, d + " pts"};
}

Outcome trend_acc_miou(const nlohmann::json& abl) {
  const auto& rows = abl.at("rows");
  bool ok = true;
  std::string d;
  for (const char* key : {"median_gt_box_accuracy", "median_rpn_best_overlap_miou"}) {
    const double base = cell_median(rows.at(0), "dd", key);
    const double dd = cell_median(rows.at(3), "dd", key);
    const double mrl = cell_median(rows.at(3), "dd_mrl", key);
    ok = ok && mrl >= dd && dd >= base;
    d += std::string(d.empty() ? "" : "; ") + (std::string(key).find("acc") != std::string::npos ? "acc " : "mIoU ") +
         fmt("%.3f", base) + " <= " + fmt("%.3f", dd) + " <= " + fmt("%.3f", mrl);
  }
  return {ok, d};
}

// ---------------------------------------------------- 10: distinctiveness

double mean_l1(const Image& a, const Image& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(static_cast<double>(a[i]) - b[i]);
  return s / static_cast<double>(a.size());
}

// Mean over images and channels of |mean colour of G(x) - mean colour of x|.
double colour_drift(const shifter::ShifterBundle<float>& b, const std::vector<Image>& xs) {
  double s = 0;
  for (const auto& x : xs) {
    const auto y = shifter::translate(b, x);
    const int C = x.dim(0), P = x.dim(1) * x.dim(2);
    for (int c = 0; c < C; ++c) {
      double mx = 0, my = 0;
      for (int p = 0; p < P; ++p) {
        mx += x[static_cast<std::size_t>(c * P + p)];
        my += y[static_cast<std::size_t>(c * P + p)];
      }
      s += std::abs(mx - my) / P;
    }
  }
  return s / (3.0 * static_cast<double>(xs.size()));
}

Outcome distinctiveness(const cli::ExperimentConfig& cfg, const cli::LoadedData& data) {
  const auto shifters = cli::load_shifters(cfg, cfg.n());
  std::vector<Image> probe;
  for (std::size_t i = 0; i < std::min<std::size_t>(50, data.source_test.size()); ++i)
    probe.push_back(data.source_test[i].pixels);
  bool ok = probe.size() == 50 && shifters.size() == 3;
  std::string d;
  double min_l1 = 1e9;
  for (std::size_t a = 0; a < shifters.size(); ++a)
    for (std::size_t b = a + 1; b < shifters.size(); ++b) {
      double l1 = 0;
      for (const auto& x : probe) l1 += mean_l1(shifter::translate(shifters[a], x), shifter::translate(shifters[b], x));
      l1 /= static_cast<double>(probe.size());
      min_l1 = std::min(min_l1, l1);
      ok = ok && l1 > 0.01;
    }
  d = "min pairwise L1 " + fmt("%.4f", min_l1);

  // Unconstrained GAN: the colour-preservation shifter with beta = 0.
  std::size_t cp = 0;
  while (cp < cfg.kinds.size() && cfg.kinds[cp] != shifter::ConstraintKind::color_preservation) ++cp;
  if (cp == cfg.kinds.size()) return {false, d + "; no colour-preservation shifter configured"};
  std::vector<Image> S, T;
  for (const auto& x : data.source_train.items) S.push_back(x.pixels);
  for (const auto& x : data.target_train.items) T.push_back(x.pixels);
  const int i = static_cast<int>(cp) + 1;
  auto free = shifter::ShifterBundle<float>::create({shifter::ConstraintKind::color_preservation, 0.0}, cfg.generator,
                                                    cfg.shifter_disc, cfg.shifter_init_seed(i), cfg.gan_mode);
  auto sched = cfg.shifter_schedule;
  sched.seed = cfg.shifter_train_seed(i);
  shifter::train_shifter(free, S, T, sched);
  const double drift_cp = colour_drift(shifters[cp], probe), drift_free = colour_drift(free, probe);
  ok = ok && drift_cp < drift_free;
  return {ok, d + "; colour drift CP " + fmt("%.4f", drift_cp) + " vs unconstrained " + fmt("%.4f", drift_free)};
}

// -------------------------------------------------------- 11: determinism

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// gen-data, train-shifters, train (DD+MRL) and eval on a reduced config.
fs::path small_pipeline(const cli::ExperimentConfig& base, const fs::path& dir) {
  auto c = base;
  c.data_root = (dir / "data").string();
  c.output_dir = (dir / "runs").string();
  c.source_train = c.target_train = 60;
  c.source_test = c.target_test = 30;
  c.shifter_schedule.iterations = 100;
  c.train.total_iters = 300;
  c.train.iters_stage1 = 200;
  std::ostringstream log;
  cli::cmd_gen_data(c, log);
  cli::cmd_train_shifters(c, log);
  const auto ckpt = cli::cmd_train(c, cli::Method::dd_mrl, std::nullopt, log);
  cli::cmd_eval(c, ckpt, std::nullopt, log);
  return ckpt.parent_path();
}

Outcome determinism(const cli::ExperimentConfig& cfg, const cli::LoadedData& data, const fs::path& work) {
  bool ok = true;
  std::string d;
  fs::remove_all(work / "repeat_a");
  fs::remove_all(work / "repeat_b");
  const auto a = small_pipeline(cfg, work / "repeat_a"), b = small_pipeline(cfg, work / "repeat_b");
  for (const char* f : {"metrics.json", "report.txt", "detections.txt"}) {
    const auto x = slurp(a / f), y = slurp(b / f);
    ok = ok && !x.empty() && x == y;
  }
  d = std::string("repeated pipeline ") + (ok ? "identical" : "differs");

  // Re-train one full-scale ablation cell and compare its metric file.
  const int n = cfg.ablation_max_n;
  const auto seed = cfg.ablation_seeds.front();
  const std::string label = "dd_mrl_n" + std::to_string(n) + "_s" + std::to_string(seed);
  const auto shifters = cli::load_shifters(cfg, n);
  const auto shifted = trainer::precompute_shifted(data.source_train, shifters);
  auto run = cli::train_detector(cfg, data, shifted, cli::Method::dd_mrl, n, seed);
  const auto redo = work / "repeat_cell";
  cli::evaluate_and_write(run.detector, data.eval_set(cfg.eval_split), cfg.eval, redo, label);
  const auto orig = slurp(fs::path(cfg.output_dir) / "ablation" / label / "metrics.json");
  const bool same = !orig.empty() && orig == slurp(redo / "metrics.json");
  ok = ok && same;
  return {ok, d + "; ablation cell " + label + (same ? " identical" : " differs")};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = "acceptance_work";
  std::optional<fs::path> config_file;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) config_file = argv[++i];
    else work = a;
  }

  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %-28s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  report(1, "GRL contract", grl_contract);
  report(2, "MRL loss oracle", mrl_oracle);
  report(3, "loss composition", loss_composition);
  report(4, "AP oracle", ap_oracle);
  report(5, "error taxonomy", error_taxonomy);
  report(6, "gradient accumulation", accumulation);

  // Full pipeline on the experiment config.
  cli::ExperimentConfig cfg;
  nlohmann::json abl;
  std::optional<cli::LoadedData> data;
  std::string setup_error;
  try {
    if (config_file) cfg = cli::load_config(*config_file);
    cfg.data_root = (work / "data").string();
    cfg.output_dir = (work / "runs").string();
    cfg.validate();
    if (cfg.ablation_max_n != 3 || cfg.n() != 3) throw std::invalid_argument("acceptance needs three shifters");
    fs::remove_all(work);
    const auto t0 = std::chrono::steady_clock::now();
    cli::cmd_gen_data(cfg);
    cli::cmd_train_shifters(cfg);
    std::fprintf(stderr, "data and shifters ready after %.0f s\n", seconds_since(t0));
    abl = cli::cmd_ablation(cfg);
    std::fprintf(stderr, "ablation done after %.0f s\n", seconds_since(t0));
    data = cli::load_data(cfg);
  } catch (const std::exception& e) {
    setup_error = e.what();
  }
  auto needs_pipeline = [&](const std::function<Outcome()>& f) {
    return [&, f] { return setup_error.empty() ? f() : Outcome{false, "pipeline failed: " + setup_error}; };
  };
  report(7, "DD / DD+MRL trend", needs_pipeline([&] { return trend_main(abl); }));
  report(8, "offset growth", needs_pipeline([&] { return trend_offsets(abl); }));
  report(9, "accuracy / mIoU trend", needs_pipeline([&] { return trend_acc_miou(abl); }));
  report(10, "shifter distinctiveness", needs_pipeline([&] { return distinctiveness(cfg, *data); }));
  report(11, "determinism", needs_pipeline([&] { return determinism(cfg, *data, work); }));

  std::printf("%d of 11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
