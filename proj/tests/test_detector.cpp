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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "dam/detector/detector.hpp"
#include "dam/synthdata/benchmark.hpp"
#include "dam/trainer/trainer.hpp"
#include "test_util.hpp"

using namespace dam;
using namespace dam::detector;
using dam::testing::grad_check;
using dam::testing::random_tensor;
using nn::Tensor;

namespace {

Image random_image(std::mt19937_64& rng, int h = 64, int w = 64) {
  return random_tensor({3, h, w}, rng, 0, 1).cast<float>();
}

// Miniature configuration for finite-difference checks.
DetectorConfig tiny_config() {
  DetectorConfig c;
  c.backbone_widths = {2};
  c.backbone_strides = {8};
  c.rpn_hidden = 2;
  c.roi_bins = 2;
  c.head_hidden = 4;
  c.num_classes = 2;
  return c;
}

Box random_box(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(0, extent), s(2, extent / 3);
  const double x = u(rng), y = u(rng);
  return {x, y, x + s(rng), y + s(rng)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Source-only training through the same loop the experiments use.
Detector<float> train_source_only(const LabeledDataset& source, const DetectorConfig& cfg,
                                  std::uint64_t seed, int iterations) {
  const auto target = strip_labels(source);
  trainer::TrainInputs in{&source, &target, {}};
  trainer::TrainSchedule s;
  s.total_iters = iterations;
  s.iters_stage1 = iterations * 2 / 3;
  s.lr_stage1 = 3e-3;
  s.lr_stage2 = 3e-4;
  s.seed = seed;
  trainer::FrameworkOptions fw;
  fw.use_mrl = false;
  return trainer::train<float>(in, s, cfg, {cfg.feature_channels(), 8, 0}, fw).detector;
}

DetectorConfig experiment_config() {
  DetectorConfig c;
  c.backbone_widths = {32, 64, 64, 64};
  c.rpn_hidden = 64;
  return c;
}

}  // namespace

TEST(Backbone, OutputIsCeilOfInputOverStride) {
  std::mt19937_64 rng(1);
  Detector<float> det(DetectorConfig{}, 1);
  EXPECT_EQ(det.config().stride(), 8);
  EXPECT_EQ(det.backbone(random_image(rng)).shape(), (std::vector<int>{32, 8, 8}));
  EXPECT_EQ(det.backbone(random_image(rng, 50, 30)).shape(), (std::vector<int>{32, 7, 4}));
}

TEST(Backbone, DeterministicAndConstantWithZeroFinalLayer) {
  std::mt19937_64 rng(2);
  Detector<float> det(DetectorConfig{}, 2);
  const auto im = random_image(rng);
  EXPECT_EQ(det.backbone(im).value().storage(), det.backbone(im).value().storage());
  det.zero_final_backbone_layer();
  const auto f = det.backbone(im).value();
  for (float v : f.storage()) EXPECT_EQ(v, f[0]);
}

TEST(Backbone, NonFiniteActivationsAbort) {
  std::mt19937_64 rng(3);
  Detector<float> det(DetectorConfig{}, 3);
  auto im = random_image(rng);
  im[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(det.detect(im), DivergenceError);
  LabeledImage li{im, {}, "x"};
  EXPECT_THROW(det.detection_losses(li), DivergenceError);
}

TEST(Config, Validation) {
  DetectorConfig c;
  c.backbone_strides = {2, 2};
  EXPECT_THROW(Detector<float>(c, 1), std::invalid_argument);
  DetectorConfig d;
  d.num_classes = 0;
  EXPECT_THROW(Detector<float>(d, 1), std::invalid_argument);
  const auto j = detector_config_to_json(experiment_config());
  const auto back = detector_config_from_json(j);
  EXPECT_EQ(detector_config_to_json(back), j);
}

TEST(Propose, BudgetSortingAndClipping) {
  std::mt19937_64 rng(4);
  Detector<float> det(DetectorConfig{}, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto im = random_image(rng);
    auto f = det.backbone(im);
    EXPECT_TRUE(det.rpn_propose(f, 64, 64, 0).empty());
    for (int k : {1, 5, 32, 100}) {
      const auto p = det.rpn_propose(f, 64, 64, k);
      EXPECT_LE(p.size(), static_cast<std::size_t>(k));
      EXPECT_FALSE(p.empty());
      for (std::size_t i = 0; i < p.size(); ++i) {
        EXPECT_TRUE(p[i].box.valid());
        EXPECT_GE(p[i].box.xmin, 0);
        EXPECT_GE(p[i].box.ymin, 0);
        EXPECT_LE(p[i].box.xmax, 64);
        EXPECT_LE(p[i].box.ymax, 64);
        if (i) EXPECT_GE(p[i - 1].objectness, p[i].objectness);
        for (std::size_t j = 0; j < i; ++j) EXPECT_LE(iou(p[i].box, p[j].box), 0.7);
      }
    }
  }
}

TEST(Nms, MatchesExhaustiveSuppressionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(0, 50);
  std::uniform_real_distribution<double> score(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = count(rng);
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (int i = 0; i < n; ++i) {
      boxes.push_back(random_box(rng, 40));
      // Coarse scores create ties, which must resolve to the lower index.
      scores.push_back(std::round(score(rng) * 8) / 8);
    }
    // Oracle: rank by (score desc, index asc); box i survives iff no
    // higher-ranked survivor overlaps it above the threshold.
    std::vector<std::vector<double>> m(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m[i][j] = iou(boxes[i], boxes[j]);
    std::vector<int> rank(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) rank[i] = i;
    std::sort(rank.begin(), rank.end(), [&](int a, int b) {
      return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    std::vector<int> expected;
    std::vector<bool> alive(static_cast<std::size_t>(n), false);
    for (int r = 0; r < n; ++r) {
      const int i = rank[r];
      bool ok = true;
      for (int q = 0; q < r; ++q)
        if (alive[rank[q]] && m[rank[q]][i] > 0.7) ok = false;
      alive[i] = ok;
      if (ok) expected.push_back(i);
    }
    EXPECT_EQ(nms(boxes, scores, 0.7), expected);
    const auto limited = nms(boxes, scores, 0.7, 3);
    EXPECT_EQ(limited, std::vector<int>(expected.begin(), expected.begin() + std::min<std::size_t>(3, expected.size())));
  }
}

TEST(BoxCoding, EncodeDecodeRoundTrip) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const Box a = random_box(rng, 60), b = random_box(rng, 60);
    const Box back = decode_box(a, encode_box(a, b, kHeadDeltaStds), kHeadDeltaStds);
    EXPECT_NEAR(back.xmin, b.xmin, 1e-9);
    EXPECT_NEAR(back.ymax, b.ymax, 1e-9);
  }
  const auto anchors = make_anchors(2, 3, 8, 20);
  ASSERT_EQ(anchors.size(), 6u);
  EXPECT_EQ(anchors[4], (Box{2, 2, 22, 22}));  // cell (y=1, x=1)
  EXPECT_DOUBLE_EQ(anchors[5].center_x(), 20);
  EXPECT_DOUBLE_EQ(anchors[5].center_y(), 12);
}

TEST(Losses, ExactTargetsGiveZeroLocalisationLoss) {
  std::mt19937_64 rng(7);
  const std::size_t A = 12;
  std::vector<int> labels{1, 0, -1, 1, 0, 0, 1, -1, 0, 0, 0, 1};
  std::vector<BoxDelta> targets(A);
  Tensor<double> deltas({4, 3, 4});
  for (std::size_t a = 0; a < A; ++a)
    for (std::size_t k = 0; k < 4; ++k) {
      targets[a][k] = std::uniform_real_distribution<double>(-1, 1)(rng);
      deltas[k * A + a] = labels[a] == 1 ? targets[a][k] : 5.0;  // non-positives are ignored
    }
  auto obj = Var<double>::constant(random_tensor({1, 3, 4}, rng));
  auto [cls, loc] = rpn_losses(obj, Var<double>::constant(deltas), labels, targets, 1.0 / 9);
  EXPECT_EQ(loc.item(), 0.0);
  EXPECT_GT(cls.item(), 0.0);

  Tensor<double> hd({3, 4});
  std::vector<int> rl{2, 0, 5};
  std::vector<BoxDelta> rt(3);
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) rt[r][k] = hd.at(r, k) = 0.1 * (r + 1) * (k - 1.5);
  auto [hc, hl] = head_losses(Var<double>::constant(random_tensor({3, 6}, rng)), Var<double>::constant(hd), rl, rt, 1.0);
  EXPECT_EQ(hl.item(), 0.0);
}

TEST(Losses, UniformScoresGiveLogSixPerRegion) {
  std::vector<int> labels{0, 1, 5, 3};
  auto [cls, loc] = head_losses(Var<double>::constant(Tensor<double>({4, 6})),
                                Var<double>::constant(Tensor<double>({4, 4})), labels,
                                std::vector<BoxDelta>(4, BoxDelta{0, 0, 0, 0}), 1.0);
  EXPECT_NEAR(cls.item(), std::log(6.0), 1e-12);
  EXPECT_EQ(loc.item(), 0.0);
}

TEST(Losses, MatchIndependentPerRegionReference) {
  std::mt19937_64 rng(8);
  auto smooth = [](double d, double beta) {
    const double a = std::abs(d);
    return a < beta ? 0.5 * a * a / beta : a - 0.5 * beta;
  };
  for (int trial = 0; trial < 50; ++trial) {
    // RPN.
    const int Hf = 3, Wf = 5, A = Hf * Wf;
    const auto obj = random_tensor({1, Hf, Wf}, rng, -3, 3);
    const auto del = random_tensor({4, Hf, Wf}, rng, -2, 2);
    std::vector<int> labels(A);
    std::vector<BoxDelta> targets(A);
    for (int a = 0; a < A; ++a) {
      labels[a] = static_cast<int>(rng() % 3) - 1;
      for (auto& t : targets[a]) t = std::uniform_real_distribution<double>(-2, 2)(rng);
    }
    double bce = 0, l1 = 0;
    int labelled = 0, pos = 0;
    for (int a = 0; a < A; ++a) {
      if (labels[a] < 0) continue;
      ++labelled;
      const double z = obj[a], y = labels[a];
      bce += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
      if (labels[a] == 1) {
        ++pos;
        for (int k = 0; k < 4; ++k) l1 += smooth(del[k * A + a] - targets[a][k], 1.0 / 9);
      }
    }
    auto [rc, rl] = rpn_losses(Var<double>::constant(obj), Var<double>::constant(del), labels, targets, 1.0 / 9);
    EXPECT_NEAR(rc.item(), labelled ? bce / labelled : 0.0, 1e-6);
    EXPECT_NEAR(rl.item(), pos ? l1 / pos : 0.0, 1e-6);

    // Region head.
    const int R = 7, K = 6;
    const auto logits = random_tensor({R, K}, rng, -4, 4);
    const auto bd = random_tensor({R, 4}, rng, -2, 2);
    std::vector<int> rlab(R);
    std::vector<BoxDelta> rt(R);
    double ce = 0, hl1 = 0;
    int fg = 0;
    for (int r = 0; r < R; ++r) {
      rlab[r] = static_cast<int>(rng() % K);
      for (auto& t : rt[r]) t = std::uniform_real_distribution<double>(-2, 2)(rng);
      double m = -1e300, z = 0;
      for (int k = 0; k < K; ++k) m = std::max(m, logits.at(r, k));
      for (int k = 0; k < K; ++k) z += std::exp(logits.at(r, k) - m);
      ce += -(logits.at(r, rlab[r]) - m - std::log(z));
      if (rlab[r] > 0) {
        ++fg;
        for (int k = 0; k < 4; ++k) hl1 += smooth(bd.at(r, k) - rt[r][k], 1.0);
      }
    }
    auto [hc, hl] = head_losses(Var<double>::constant(logits), Var<double>::constant(bd), rlab, rt, 1.0);
    EXPECT_NEAR(hc.item(), ce / R, 1e-6);
    EXPECT_NEAR(hl.item(), fg ? hl1 / fg : 0.0, 1e-6);
  }
}

TEST(Losses, ImageWithoutAnnotationsIsBackgroundOnly) {
  std::mt19937_64 rng(9);
  Detector<float> det(DetectorConfig{}, 9);
  LabeledImage im{random_image(rng), {}, "empty"};
  auto f = det.backbone(im.pixels);
  const auto out = det.forward_train(f, {}, 64, 64);
  for (int l : out.anchor_labels) EXPECT_EQ(l, 0);
  for (int l : out.roi_labels) EXPECT_EQ(l, 0);
  const auto l = det.detection_losses(im);
  EXPECT_EQ(l.loc.item(), 0.0f);
  EXPECT_GT(l.cls.item(), 0.0f);
  EXPECT_GE(l.rpn_cls.item(), 0.0f);
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  Detector<double> det(tiny_config(), 10);
  auto params = det.parameters();
  ASSERT_LE(params.scalar_count(), 500u);
  dam::testing::jitter(params, rng);
  const auto image = random_tensor({3, 32, 32}, rng, 0, 1);
  const std::vector<Annotation> gts{{{4, 5, 22, 21}, 1}, {{18, 2, 30, 14}, 0}};
  const std::vector<Box> rois{{3, 4, 20, 22}, {17, 3, 29, 15}, {0, 0, 12, 30}, {10, 10, 31, 31}};
  auto loss = [&] {
    auto f = det.backbone(Var<double>::constant(image));
    auto l = det.forward_train(f, gts, 32, 32, &rois).losses;
    return nn::add(l.loc, l.cls);
  };
  EXPECT_LT(grad_check(params, loss).relative_error(), 1e-3);
}

TEST(Matching, LossesBitReproducibleAcrossInstances) {
  std::mt19937_64 rng(11);
  const LabeledImage im{random_image(rng), {{{10, 10, 30, 30}, 1}, {{12, 11, 31, 29}, 2}, {{40, 40, 60, 58}, 0}}, "a"};
  Detector<float> a(DetectorConfig{}, 5), b(DetectorConfig{}, 5);
  const auto la = a.detection_losses(im), lb = b.detection_losses(im);
  EXPECT_EQ(la.loc.item(), lb.loc.item());
  EXPECT_EQ(la.cls.item(), lb.cls.item());
  // Two identical boxes: the lower anchor / box index wins every tie.
  auto f = a.backbone(im.pixels);
  const std::vector<Annotation> twins{{{16, 16, 36, 36}, 3}, {{16, 16, 36, 36}, 4}};
  const auto o = a.forward_train(f, twins, 64, 64);
  for (std::size_t r = 0; r < o.rois.size(); ++r)
    if (o.roi_labels[r] > 0) EXPECT_EQ(o.roi_labels[r], 4);
}

TEST(Detect, ThresholdSortingAndBounds) {
  std::mt19937_64 rng(12);
  DetectorConfig cfg;
  Detector<float> det(cfg, 12);
  for (int trial = 0; trial < 4; ++trial) {
    const auto im = random_image(rng);
    const auto d = det.detect(im, "img");
    EXPECT_FALSE(d.empty());
    EXPECT_LE(d.size(), static_cast<std::size_t>(cfg.max_detections));
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (i) EXPECT_GE(d[i - 1].confidence, d[i].confidence);
      EXPECT_EQ(d[i].image_id, "img");
      EXPECT_GT(d[i].confidence, cfg.score_threshold);
      EXPECT_GE(d[i].box.xmin, 0);
      EXPECT_GE(d[i].box.ymin, 0);
      EXPECT_LE(d[i].box.xmax, 64);
      EXPECT_LE(d[i].box.ymax, 64);
      EXPECT_TRUE(d[i].box.valid());
      EXPECT_GE(d[i].class_id, 0);
      EXPECT_LT(d[i].class_id, cfg.num_classes);
    }
    EXPECT_TRUE(det.detect(im, "img", 0).empty());
  }
  cfg.score_threshold = 1.0;
  Detector<float> strict(cfg, 12);
  EXPECT_TRUE(strict.detect(random_image(rng)).empty());
}

TEST(ClassifyRegion, ProbabilityVector) {
  std::mt19937_64 rng(13);
  Detector<float> det(DetectorConfig{}, 13);
  const auto im = random_image(rng);
  const Box b{5, 7, 30, 40};
  const auto p = det.classify_region(im, b);
  ASSERT_EQ(p.size(), 6u);
  double s = 0;
  for (double v : p) {
    EXPECT_GE(v, 0);
    s += v;
  }
  EXPECT_NEAR(s, 1.0, 1e-6);
  EXPECT_EQ(det.classify_region(im, b), p);
  const auto both = det.classify_regions(im, {b, b});
  EXPECT_EQ(both[0], both[1]);
  EXPECT_THROW(det.classify_region(im, Box{5, 5, 5, 9}), std::invalid_argument);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  std::mt19937_64 rng(14);
  Detector<float> det(experiment_config(), 14);
  const auto path = std::filesystem::temp_directory_path() / "dam_detector.ckpt";
  save_detector(path, det, {{"note", "x"}});
  nlohmann::json extra;
  const auto back = load_detector<float>(path, &extra);
  EXPECT_EQ(extra.at("note"), "x");
  EXPECT_EQ(back.parameters().flat_values(), det.parameters().flat_values());
  const auto im = random_image(rng);
  const auto a = det.detect(im), b = back.detect(im);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].box, b[i].box);
  std::filesystem::remove(path);
}

// Trained smoke test on one-object scenes: the top detection localises the object.
TEST(Trained, OneObjectSceneTopDetectionOverlapsGroundTruth) {
  synth::BenchmarkConfig bc;
  bc.scene.min_objects = bc.scene.max_objects = 1;
  bc.source_train = 150;
  bc.source_test = 40;
  bc.target_train = bc.target_test = 1;
  const auto bench = synth::generate_benchmark(bc);
  std::vector<double> per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto det = train_source_only(bench.source_train, experiment_config(), seed, 1500);
    std::vector<double> ious;
    for (const auto& item : bench.source_test.items) {
      const auto d = det.detect(item.pixels);
      ious.push_back(d.empty() ? 0.0 : iou(d.front().box, item.annotations.front().box));
    }
    per_seed.push_back(median(ious));
  }
  EXPECT_GT(median(per_seed), 0.5);
}

// After source-only training, ground-truth boxes are classified correctly on
// most source-domain test instances.
TEST(Trained, SourceDomainGroundTruthBoxAccuracy) {
  synth::BenchmarkConfig bc;
  bc.source_train = 400;
  bc.source_test = 100;
  bc.target_train = bc.target_test = 1;
  const auto bench = synth::generate_benchmark(bc);
  std::vector<double> per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto det = train_source_only(bench.source_train, experiment_config(), seed, 3000);
    std::size_t correct = 0, total = 0;
    for (const auto& item : bench.source_test.items) {
      std::vector<Box> boxes;
      for (const auto& a : item.annotations) boxes.push_back(a.box);
      const auto probs = det.classify_regions(item.pixels, boxes);
      for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto arg = std::max_element(probs[i].begin(), probs[i].end()) - probs[i].begin();
        correct += arg == item.annotations[i].class_id + 1 ? 1 : 0;
        ++total;
      }
    }
    per_seed.push_back(static_cast<double>(correct) / static_cast<double>(total));
  }
  EXPECT_GE(median(per_seed), 0.70);
}
