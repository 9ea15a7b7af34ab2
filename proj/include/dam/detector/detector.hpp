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

#ifndef DAM_DETECTOR_DETECTOR_HPP
#define DAM_DETECTOR_DETECTOR_HPP

// Miniature two-stage detector: a strided convolutional backbone, a
// one-anchor-per-cell region proposal network, and a region head that
// max-pools each proposal into a fixed grid and predicts C+1 class scores
// (index 0 is background) plus one class-agnostic box refinement.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dam/core/errors.hpp"
#include "dam/core/types.hpp"
#include "dam/detector/geometry.hpp"
#include "dam/nn/checkpoint.hpp"
#include "dam/nn/layers.hpp"

namespace dam::detector {

using nn::Tensor;
using nn::Var;

struct DetectorConfig {
  int channels = 3;
  std::vector<int> backbone_widths{16, 32, 32, 32};
  std::vector<int> backbone_strides{2, 2, 2, 1};
  int rpn_hidden = 32;
  double anchor_size = 20.0;
  int num_classes = 5;
  int roi_bins = 4;
  int head_hidden = 64;
  double rpn_positive_iou = 0.5;
  double rpn_negative_iou = 0.3;
  double roi_foreground_iou = 0.5;
  int train_proposals = 32;
  int test_proposals = 32;
  double proposal_nms = 0.7;
  double detection_nms = 0.3;
  double score_threshold = 0.05;
  int max_detections = 100;
  double rpn_smooth_l1_beta = 1.0 / 9.0;
  double head_smooth_l1_beta = 1.0;
  // Minimum side of a proposal after clipping, in pixels.
  double min_proposal_size = 1.0;

  int stride() const {
    int s = 1;
    for (int v : backbone_strides) s *= v;
    return s;
  }
  int feature_channels() const { return backbone_widths.back(); }

  void validate() const {
    if (backbone_widths.empty() || backbone_widths.size() != backbone_strides.size())
      throw std::invalid_argument("DetectorConfig: backbone widths and strides must pair up");
    for (int w : backbone_widths)
      if (w < 1) throw std::invalid_argument("DetectorConfig: backbone width < 1");
    for (int s : backbone_strides)
      if (s < 1) throw std::invalid_argument("DetectorConfig: backbone stride < 1");
    if (num_classes < 1) throw std::invalid_argument("DetectorConfig: num_classes < 1");
    if (roi_bins < 1 || head_hidden < 1 || rpn_hidden < 1)
      throw std::invalid_argument("DetectorConfig: invalid head sizes");
    if (!(anchor_size > 0)) throw std::invalid_argument("DetectorConfig: anchor_size <= 0");
  }
};

/// Region-head regression targets are divided by these.
inline constexpr BoxDelta kHeadDeltaStds{0.1, 0.1, 0.2, 0.2};

struct Proposal {
  Box box;
  double objectness = 0;
};

template <class T>
struct DetectionLosses {
  Var<T> rpn_cls;
  Var<T> rpn_loc;
  Var<T> head_cls;
  Var<T> head_loc;
  Var<T> loc;  // rpn_loc + head_loc
  Var<T> cls;  // rpn_cls + head_cls
};

template <class T>
Var<T> zero_scalar() {
  return Var<T>::constant(Tensor<T>({1}));
}

/// RPN losses from raw outputs. labels: 1 positive, 0 negative, -1 ignored.
///   cls = mean over labelled anchors of BCE(objectness, label)
///   loc = sum over positives of smooth-L1(delta - target) / max(1, #positives)
template <class T>
std::pair<Var<T>, Var<T>> rpn_losses(const Var<T>& objectness, const Var<T>& deltas,
                                     const std::vector<int>& labels,
                                     const std::vector<BoxDelta>& targets, double beta) {
  const std::size_t A = labels.size();
  if (objectness.value().size() != A || deltas.value().size() != 4 * A || targets.size() != A)
    throw std::invalid_argument("rpn_losses: output/label size mismatch");
  std::size_t labelled = 0, positives = 0;
  for (int l : labels) {
    labelled += l >= 0 ? 1 : 0;
    positives += l == 1 ? 1 : 0;
  }
  std::vector<T> cls_t(A, T(0)), cls_w(A, T(0));
  for (std::size_t a = 0; a < A; ++a)
    if (labels[a] >= 0) {
      cls_t[a] = labels[a] == 1 ? T(1) : T(0);
      cls_w[a] = T(1) / static_cast<T>(labelled);
    }
  std::vector<T> loc_t(4 * A, T(0)), loc_w(4 * A, T(0));
  const T pw = T(1) / static_cast<T>(std::max<std::size_t>(1, positives));
  for (std::size_t a = 0; a < A; ++a)
    if (labels[a] == 1)
      for (std::size_t k = 0; k < 4; ++k) {
        loc_t[k * A + a] = static_cast<T>(targets[a][k]);
        loc_w[k * A + a] = pw;
      }
  auto cls = labelled ? nn::bce_with_logits_weighted(objectness, std::move(cls_t), std::move(cls_w))
                      : zero_scalar<T>();
  auto loc = positives ? nn::smooth_l1_weighted(deltas, std::move(loc_t), std::move(loc_w),
                                                static_cast<T>(beta))
                       : zero_scalar<T>();
  return {cls, loc};
}

/// Region-head losses. labels: 0 background, c+1 for class c.
///   cls = mean over regions of softmax cross entropy
///   loc = sum over foreground regions of smooth-L1 / max(1, #foreground)
template <class T>
std::pair<Var<T>, Var<T>> head_losses(const Var<T>& cls_logits, const Var<T>& box_deltas,
                                      const std::vector<int>& labels,
                                      const std::vector<BoxDelta>& targets, double beta) {
  const std::size_t R = labels.size();
  if (R == 0) return {zero_scalar<T>(), zero_scalar<T>()};
  if (static_cast<std::size_t>(cls_logits.shape()[0]) != R || targets.size() != R ||
      box_deltas.value().size() != 4 * R)
    throw std::invalid_argument("head_losses: output/label size mismatch");
  auto cls = nn::softmax_cross_entropy_rows(cls_logits, labels, static_cast<T>(R));
  std::size_t fg = 0;
  for (int l : labels) fg += l > 0 ? 1 : 0;
  if (fg == 0) return {cls, zero_scalar<T>()};
  std::vector<T> loc_t(4 * R, T(0)), loc_w(4 * R, T(0));
  const T w = T(1) / static_cast<T>(fg);
  for (std::size_t r = 0; r < R; ++r)
    if (labels[r] > 0)
      for (std::size_t k = 0; k < 4; ++k) {
        loc_t[r * 4 + k] = static_cast<T>(targets[r][k]);
        loc_w[r * 4 + k] = w;
      }
  auto loc = nn::smooth_l1_weighted(box_deltas, std::move(loc_t), std::move(loc_w),
                                    static_cast<T>(beta));
  return {cls, loc};
}

/// Everything a training forward pass produces, for losses and inspection.
template <class T>
struct TrainOutputs {
  Var<T> rpn_objectness;  // 1 x Hf x Wf
  Var<T> rpn_deltas;      // 4 x Hf x Wf
  std::vector<Box> anchors;
  std::vector<int> anchor_labels;
  std::vector<BoxDelta> anchor_targets;
  std::vector<Box> rois;
  std::vector<int> roi_labels;
  std::vector<BoxDelta> roi_targets;
  Var<T> cls_logits;  // R x (C+1)
  Var<T> box_deltas;  // R x 4
  DetectionLosses<T> losses;
};

template <class T>
class Detector {
 public:
  Detector() = default;
  Detector(const DetectorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    nn::Rng rng(seed);
    int in = cfg.channels;
    for (std::size_t i = 0; i < cfg.backbone_widths.size(); ++i) {
      backbone_.emplace_back(in, cfg.backbone_widths[i], 3, cfg.backbone_strides[i], 1, rng);
      in = cfg.backbone_widths[i];
    }
    rpn_conv_ = nn::Conv2d<T>(in, cfg.rpn_hidden, 3, 1, 1, rng);
    rpn_obj_ = nn::Conv2d<T>(cfg.rpn_hidden, 1, 1, 1, 0, rng, 0.1);
    rpn_box_ = nn::Conv2d<T>(cfg.rpn_hidden, 4, 1, 1, 0, rng, 0.1);
    const int pooled = in * cfg.roi_bins * cfg.roi_bins;
    fc_ = nn::Linear<T>(pooled, cfg.head_hidden, rng, std::sqrt(2.0 / pooled));
    cls_ = nn::Linear<T>(cfg.head_hidden, cfg.num_classes + 1, rng, 0.01);
    box_ = nn::Linear<T>(cfg.head_hidden, 4, rng, 0.001);
  }

  const DetectorConfig& config() const { return cfg_; }

  /// Backbone features, relu'd, of spatial size ceil(H / stride).
  Var<T> backbone(const Var<T>& image) const {
    Var<T> h = image;
    for (const auto& conv : backbone_) h = nn::relu(conv(h));
    return h;
  }
  Var<T> backbone(const Image& image) const {
    return backbone(Var<T>::constant(image.template cast<T>()));
  }

  /// Objectness (1 x Hf x Wf) and deltas (4 x Hf x Wf).
  std::pair<Var<T>, Var<T>> rpn_head(const Var<T>& features) const {
    auto h = nn::relu(rpn_conv_(features));
    return {rpn_obj_(h), rpn_box_(h)};
  }

  /// Top-k proposals after clipping and NMS, by objectness descending.
  std::vector<Proposal> proposals_from_outputs(const Tensor<T>& objectness, const Tensor<T>& deltas,
                                               int image_w, int image_h, int k) const {
    if (k <= 0) return {};
    const int Hf = objectness.dim(1), Wf = objectness.dim(2);
    const auto anchors = make_anchors(Hf, Wf, cfg_.stride(), cfg_.anchor_size);
    const std::size_t A = anchors.size();
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (std::size_t a = 0; a < A; ++a) {
      const BoxDelta d{static_cast<double>(deltas[a]), static_cast<double>(deltas[A + a]),
                       static_cast<double>(deltas[2 * A + a]), static_cast<double>(deltas[3 * A + a])};
      Box b = decode_box(anchors[a], d);
      if (!b.valid()) continue;
      try {
        b = clip_box(b, image_w, image_h);
      } catch (const BoxOutsideImage&) {
        continue;
      }
      if (b.width() < cfg_.min_proposal_size || b.height() < cfg_.min_proposal_size) continue;
      boxes.push_back(b);
      scores.push_back(static_cast<double>(objectness[a]));
    }
    const auto keep = nms(boxes, scores, cfg_.proposal_nms, k);
    std::vector<Proposal> out;
    out.reserve(keep.size());
    for (int i : keep)
      out.push_back({boxes[static_cast<std::size_t>(i)], scores[static_cast<std::size_t>(i)]});
    return out;
  }

  std::vector<Proposal> rpn_propose(const Var<T>& features, int image_w, int image_h, int k) const {
    nn::NoGradGuard guard;
    auto [obj, del] = rpn_head(features);
    return proposals_from_outputs(obj.value(), del.value(), image_w, image_h, k);
  }

  /// Region head on the given boxes (image coordinates).
  std::pair<Var<T>, Var<T>> region_head(const Var<T>& features, const std::vector<Box>& rois) const {
    std::vector<nn::FeatureRoi> froi;
    froi.reserve(rois.size());
    const double s = cfg_.stride();
    for (const auto& b : rois) froi.push_back({b.xmin / s, b.ymin / s, b.xmax / s, b.ymax / s});
    auto pooled = nn::roi_max_pool(features, froi, cfg_.roi_bins);
    auto h = nn::relu(fc_(pooled));
    return {cls_(h), box_(h)};
  }

  /// Anchor labels (1 / 0 / -1) and regression targets. An anchor is
  /// positive at IoU >= rpn_positive_iou with some box, negative below
  /// rpn_negative_iou with all; each box's best anchor (lowest index on ties)
  /// is also positive.
  void label_anchors(const std::vector<Box>& anchors, const std::vector<Annotation>& gts,
                     std::vector<int>& labels, std::vector<BoxDelta>& targets) const {
    const std::size_t A = anchors.size();
    labels.assign(A, 0);
    targets.assign(A, BoxDelta{0, 0, 0, 0});
    if (gts.empty()) return;
    std::vector<int> best_gt(A, -1);
    std::vector<double> best_iou(A, 0.0);
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double v = iou(anchors[a], gts[g].box);
        if (v > best_iou[a]) {
          best_iou[a] = v;
          best_gt[a] = static_cast<int>(g);
        }
      }
    for (std::size_t a = 0; a < A; ++a) {
      if (best_iou[a] >= cfg_.rpn_positive_iou) labels[a] = 1;
      else if (best_iou[a] >= cfg_.rpn_negative_iou) labels[a] = -1;
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
      double top = 0;
      int arg = -1;
      for (std::size_t a = 0; a < A; ++a) {
        const double v = iou(anchors[a], gts[g].box);
        if (v > top) {
          top = v;
          arg = static_cast<int>(a);
        }
      }
      if (arg >= 0) {
        labels[static_cast<std::size_t>(arg)] = 1;
        best_gt[static_cast<std::size_t>(arg)] = static_cast<int>(g);
      }
    }
    for (std::size_t a = 0; a < A; ++a)
      if (labels[a] == 1)
        targets[a] = encode_box(anchors[a], gts[static_cast<std::size_t>(best_gt[a])].box);
  }

  /// Labels regions against ground truth: class + 1 at IoU >= roi_foreground_iou
  /// with the best-overlapping box (lowest index on ties), else background.
  void label_rois(const std::vector<Box>& rois, const std::vector<Annotation>& gts,
                  std::vector<int>& labels, std::vector<BoxDelta>& targets) const {
    labels.assign(rois.size(), 0);
    targets.assign(rois.size(), BoxDelta{0, 0, 0, 0});
    for (std::size_t r = 0; r < rois.size(); ++r) {
      double top = 0;
      int arg = -1;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        const double v = iou(rois[r], gts[g].box);
        if (v > top) {
          top = v;
          arg = static_cast<int>(g);
        }
      }
      if (arg >= 0 && top >= cfg_.roi_foreground_iou) {
        const auto& gt = gts[static_cast<std::size_t>(arg)];
        labels[r] = gt.class_id + 1;
        targets[r] = encode_box(rois[r], gt.box, kHeadDeltaStds);
      }
    }
  }

  /// Training forward pass from backbone features. Training regions are the
  /// top proposals (computed without gradient) plus the ground-truth boxes.
  /// Passing `fixed_rois` replaces the proposal step.
  TrainOutputs<T> forward_train(const Var<T>& features, const std::vector<Annotation>& gts,
                                int image_w, int image_h,
                                const std::vector<Box>* fixed_rois = nullptr) const {
    TrainOutputs<T> out;
    std::tie(out.rpn_objectness, out.rpn_deltas) = rpn_head(features);
    const int Hf = features.shape()[1], Wf = features.shape()[2];
    out.anchors = make_anchors(Hf, Wf, cfg_.stride(), cfg_.anchor_size);
    label_anchors(out.anchors, gts, out.anchor_labels, out.anchor_targets);
    auto [rpn_cls, rpn_loc] = rpn_losses(out.rpn_objectness, out.rpn_deltas, out.anchor_labels,
                                         out.anchor_targets, cfg_.rpn_smooth_l1_beta);
    if (fixed_rois) {
      out.rois = *fixed_rois;
    } else {
      for (const auto& p : proposals_from_outputs(out.rpn_objectness.value(), out.rpn_deltas.value(),
                                                  image_w, image_h, cfg_.train_proposals))
        out.rois.push_back(p.box);
      for (const auto& g : gts) out.rois.push_back(g.box);
    }
    label_rois(out.rois, gts, out.roi_labels, out.roi_targets);
    Var<T> head_cls = zero_scalar<T>(), head_loc = zero_scalar<T>();
    if (!out.rois.empty()) {
      std::tie(out.cls_logits, out.box_deltas) = region_head(features, out.rois);
      std::tie(head_cls, head_loc) = head_losses(out.cls_logits, out.box_deltas, out.roi_labels,
                                                 out.roi_targets, cfg_.head_smooth_l1_beta);
    }
    out.losses.rpn_cls = rpn_cls;
    out.losses.rpn_loc = rpn_loc;
    out.losses.head_cls = head_cls;
    out.losses.head_loc = head_loc;
    out.losses.loc = nn::add(rpn_loc, head_loc);
    out.losses.cls = nn::add(rpn_cls, head_cls);
    return out;
  }

  /// (l_loc, l_cls) of one labelled image.
  DetectionLosses<T> detection_losses(const LabeledImage& image) const {
    auto f = backbone(image.pixels);
    check_finite(f.value(), "backbone");
    return forward_train(f, image.annotations, image_width(image.pixels),
                         image_height(image.pixels))
        .losses;
  }

  /// Score-thresholded, per-class NMS'd detections sorted by confidence.
  std::vector<Detection> detect(const Image& image, const std::string& image_id = {},
                                int proposal_budget = -1) const {
    nn::NoGradGuard guard;
    const int W = image_width(image), H = image_height(image);
    auto f = backbone(image);
    check_finite(f.value(), "backbone");
    const int k = proposal_budget >= 0 ? proposal_budget : cfg_.test_proposals;
    const auto props = rpn_propose(f, W, H, k);
    if (props.empty()) return {};
    std::vector<Box> rois;
    for (const auto& p : props) rois.push_back(p.box);
    auto [logits, deltas] = region_head(f, rois);
    const int K = cfg_.num_classes + 1;
    const auto probs = softmax_rows(logits.value());
    std::vector<Detection> all;
    for (int c = 1; c < K; ++c) {
      std::vector<Box> boxes;
      std::vector<double> scores;
      for (std::size_t r = 0; r < rois.size(); ++r) {
        const double s = probs[r * static_cast<std::size_t>(K) + static_cast<std::size_t>(c)];
        if (!(s > cfg_.score_threshold)) continue;
        const BoxDelta d{static_cast<double>(deltas.value().at(static_cast<int>(r), 0)),
                         static_cast<double>(deltas.value().at(static_cast<int>(r), 1)),
                         static_cast<double>(deltas.value().at(static_cast<int>(r), 2)),
                         static_cast<double>(deltas.value().at(static_cast<int>(r), 3))};
        Box b = decode_box(rois[r], d, kHeadDeltaStds);
        if (!b.valid()) continue;
        try {
          b = clip_box(b, W, H);
        } catch (const BoxOutsideImage&) {
          continue;
        }
        boxes.push_back(b);
        scores.push_back(s);
      }
      for (int i : nms(boxes, scores, cfg_.detection_nms))
        all.push_back({c - 1, scores[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(i)],
                       image_id});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; });
    if (cfg_.max_detections >= 0 && static_cast<int>(all.size()) > cfg_.max_detections)
      all.resize(static_cast<std::size_t>(cfg_.max_detections));
    return all;
  }

  /// Class probabilities (C+1, background first) for each given box.
  std::vector<std::vector<double>> classify_regions(const Image& image,
                                                    const std::vector<Box>& boxes) const {
    nn::NoGradGuard guard;
    for (const auto& b : boxes) require_valid(b, "classify_region");
    if (boxes.empty()) return {};
    auto f = backbone(image);
    auto [logits, deltas] = region_head(f, boxes);
    const auto flat = softmax_rows(logits.value());
    const std::size_t K = static_cast<std::size_t>(cfg_.num_classes + 1);
    std::vector<std::vector<double>> out(boxes.size());
    for (std::size_t r = 0; r < boxes.size(); ++r)
      out[r].assign(flat.begin() + static_cast<std::ptrdiff_t>(r * K),
                    flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * K));
    return out;
  }

  std::vector<double> classify_region(const Image& image, const Box& box) const {
    return classify_regions(image, {box}).front();
  }

  void collect_backbone(nn::ParameterList<T>& p) const {
    for (std::size_t i = 0; i < backbone_.size(); ++i)
      backbone_[i].collect(p, "backbone.conv" + std::to_string(i));
  }
  void collect_heads(nn::ParameterList<T>& p) const {
    rpn_conv_.collect(p, "rpn.conv");
    rpn_obj_.collect(p, "rpn.objectness");
    rpn_box_.collect(p, "rpn.deltas");
    fc_.collect(p, "head.fc");
    cls_.collect(p, "head.cls");
    box_.collect(p, "head.box");
  }
  nn::ParameterList<T> parameters() const {
    nn::ParameterList<T> p;
    collect_backbone(p);
    collect_heads(p);
    return p;
  }
  nn::ParameterList<T> head_parameters() const {
    nn::ParameterList<T> p;
    collect_heads(p);
    return p;
  }

  Detector clone(std::uint64_t seed = 0) const {
    Detector d(cfg_, seed);
    auto dst = d.parameters();
    nn::copy_values(parameters(), dst);
    return d;
  }

  /// Zeroes the last backbone layer (weights and bias).
  void zero_final_backbone_layer() {
    Var<T> w = backbone_.back().weight();
    Var<T> b = backbone_.back().bias();
    w.mutable_value().zero();
    b.mutable_value().zero();
  }

 private:
  static void check_finite(const Tensor<T>& t, const char* where) {
    if (!t.all_finite()) throw DivergenceError(std::string("detector ") + where, -1);
  }

  static std::vector<double> softmax_rows(const Tensor<T>& logits) {
    const int R = logits.dim(0), K = logits.dim(1);
    std::vector<double> out(static_cast<std::size_t>(R) * K);
    for (int r = 0; r < R; ++r) {
      double m = -1e300;
      for (int k = 0; k < K; ++k) m = std::max(m, static_cast<double>(logits.at(r, k)));
      double z = 0;
      for (int k = 0; k < K; ++k) z += std::exp(static_cast<double>(logits.at(r, k)) - m);
      for (int k = 0; k < K; ++k)
        out[static_cast<std::size_t>(r) * K + k] = std::exp(static_cast<double>(logits.at(r, k)) - m) / z;
    }
    return out;
  }

  DetectorConfig cfg_;
  std::vector<nn::Conv2d<T>> backbone_;
  nn::Conv2d<T> rpn_conv_, rpn_obj_, rpn_box_;
  nn::Linear<T> fc_, cls_, box_;
};

inline nlohmann::json detector_config_to_json(const DetectorConfig& c) {
  return {{"channels", c.channels},
          {"backbone_widths", c.backbone_widths},
          {"backbone_strides", c.backbone_strides},
          {"rpn_hidden", c.rpn_hidden},
          {"anchor_size", c.anchor_size},
          {"num_classes", c.num_classes},
          {"roi_bins", c.roi_bins},
          {"head_hidden", c.head_hidden},
          {"rpn_positive_iou", c.rpn_positive_iou},
          {"rpn_negative_iou", c.rpn_negative_iou},
          {"roi_foreground_iou", c.roi_foreground_iou},
          {"train_proposals", c.train_proposals},
          {"test_proposals", c.test_proposals},
          {"proposal_nms", c.proposal_nms},
          {"detection_nms", c.detection_nms},
          {"score_threshold", c.score_threshold},
          {"max_detections", c.max_detections},
          {"rpn_smooth_l1_beta", c.rpn_smooth_l1_beta},
          {"head_smooth_l1_beta", c.head_smooth_l1_beta},
          {"min_proposal_size", c.min_proposal_size}};
}

inline DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig c;
  c.channels = j.value("channels", c.channels);
  c.backbone_widths = j.value("backbone_widths", c.backbone_widths);
  c.backbone_strides = j.value("backbone_strides", c.backbone_strides);
  c.rpn_hidden = j.value("rpn_hidden", c.rpn_hidden);
  c.anchor_size = j.value("anchor_size", c.anchor_size);
  c.num_classes = j.value("num_classes", c.num_classes);
  c.roi_bins = j.value("roi_bins", c.roi_bins);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.rpn_positive_iou = j.value("rpn_positive_iou", c.rpn_positive_iou);
  c.rpn_negative_iou = j.value("rpn_negative_iou", c.rpn_negative_iou);
  c.roi_foreground_iou = j.value("roi_foreground_iou", c.roi_foreground_iou);
  c.train_proposals = j.value("train_proposals", c.train_proposals);
  c.test_proposals = j.value("test_proposals", c.test_proposals);
  c.proposal_nms = j.value("proposal_nms", c.proposal_nms);
  c.detection_nms = j.value("detection_nms", c.detection_nms);
  c.score_threshold = j.value("score_threshold", c.score_threshold);
  c.max_detections = j.value("max_detections", c.max_detections);
  c.rpn_smooth_l1_beta = j.value("rpn_smooth_l1_beta", c.rpn_smooth_l1_beta);
  c.head_smooth_l1_beta = j.value("head_smooth_l1_beta", c.head_smooth_l1_beta);
  c.min_proposal_size = j.value("min_proposal_size", c.min_proposal_size);
  c.validate();
  return c;
}

/// Writes the detector (and any extra parameter lists, e.g. the domain
/// discriminator) with its config in the header.
template <class T>
void save_detector(const std::filesystem::path& path, const Detector<T>& det,
                   const nlohmann::json& extra = nlohmann::json::object(),
                   const nn::ParameterList<T>* more = nullptr) {
  nn::Checkpoint ck;
  ck.meta = {{"type", "detector"}, {"config", detector_config_to_json(det.config())}, {"extra", extra}};
  nn::store_parameters(ck, det.parameters(), "");
  if (more) nn::store_parameters(ck, *more, "");
  nn::write_checkpoint(path, ck);
}

template <class T>
Detector<T> load_detector(const std::filesystem::path& path, nlohmann::json* extra = nullptr) {
  const auto ck = nn::read_checkpoint(path);
  if (ck.meta.value("type", "") != "detector")
    throw std::runtime_error(path.string() + " is not a detector checkpoint");
  Detector<T> det(detector_config_from_json(ck.meta.at("config")), 0);
  auto params = det.parameters();
  nn::load_parameters(ck, params, "");
  if (extra) *extra = ck.meta.value("extra", nlohmann::json::object());
  return det;
}

}  // namespace dam::detector

#endif  // DAM_DETECTOR_DETECTOR_HPP
