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

#ifndef DAM_EVAL_METRICS_HPP
#define DAM_EVAL_METRICS_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/core/box.hpp"
#include "dam/core/types.hpp"

namespace dam::eval {

/// Ground truth of one image.
struct GroundTruth {
  std::string image_id;
  std::vector<Annotation> annotations;
};

inline std::vector<GroundTruth> ground_truth_of(const LabeledDataset& d) {
  std::vector<GroundTruth> out;
  out.reserve(d.size());
  for (const auto& item : d.items) out.push_back({item.id, item.annotations});
  return out;
}

/// Boxes of one class keyed by image id.
using ClassGroundTruth = std::map<std::string, std::vector<Box>>;

inline ClassGroundTruth boxes_of_class(const std::vector<GroundTruth>& gts, int class_id) {
  ClassGroundTruth out;
  for (const auto& g : gts) {
    auto& v = out[g.image_id];
    for (const auto& a : g.annotations)
      if (a.class_id == class_id) v.push_back(a.box);
  }
  return out;
}

enum class Verdict { true_positive, false_positive };

struct MatchResult {
  std::size_t detection = 0;  // index into the input list
  std::optional<std::size_t> matched_gt;
  double iou_best = 0;
  Verdict verdict = Verdict::false_positive;
};

/// Greedy VOC matching. Detections are visited by confidence descending
/// (stable on input order); each takes its highest-IoU ground-truth box in
/// the same image (first on ties) and is a true positive iff that IoU is at
/// least `iou_thr` and the box is still unclaimed.
inline std::vector<MatchResult> match_detections(const std::vector<Detection>& dets,
                                                 const ClassGroundTruth& gts, double iou_thr = 0.5) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  std::map<std::string, std::vector<bool>> claimed;
  for (const auto& [id, boxes] : gts) claimed[id].assign(boxes.size(), false);
  std::vector<MatchResult> out;
  out.reserve(dets.size());
  for (std::size_t i : order) {
    MatchResult m;
    m.detection = i;
    auto it = gts.find(dets[i].image_id);
    if (it != gts.end()) {
      double best = -1;
      std::size_t arg = 0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        const double v = iou(dets[i].box, it->second[g]);
        if (v > best) {
          best = v;
          arg = g;
        }
      }
      if (best >= 0) {
        m.iou_best = best;
        m.matched_gt = arg;
        auto& c = claimed[dets[i].image_id];
        if (best >= iou_thr && !c[arg]) {
          c[arg] = true;
          m.verdict = Verdict::true_positive;
        }
      }
    }
    out.push_back(m);
  }
  return out;
}

/// Average precision for one class at the given IoU threshold. Default is
/// the 11-point interpolated form (recall thresholds i/10, i = 0..10); with
/// `all_points` the area under the monotone precision envelope is used.
/// Returns 0 when the class has no ground truth.
inline double average_precision(const std::vector<Detection>& dets, const ClassGroundTruth& gts,
                                double iou_thr = 0.5, bool all_points = false) {
  std::size_t npos = 0;
  for (const auto& [id, boxes] : gts) npos += boxes.size();
  if (npos == 0 || dets.empty()) return 0.0;
  const auto matches = match_detections(dets, gts, iou_thr);
  std::vector<double> rec, prec;
  std::size_t tp = 0, fp = 0;
  for (const auto& m : matches) {
    if (m.verdict == Verdict::true_positive) ++tp;
    else ++fp;
    rec.push_back(static_cast<double>(tp) / static_cast<double>(npos));
    prec.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  if (!all_points) {
    double ap = 0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0;
      for (std::size_t k = 0; k < rec.size(); ++k)
        if (rec[k] >= t) p = std::max(p, prec[k]);
      ap += p;
    }
    return ap / 11.0;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), rec.begin(), rec.end());
  mpre.insert(mpre.end(), prec.begin(), prec.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0;
  for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

struct MapResult {
  std::vector<std::optional<double>> per_class_ap;  // nullopt: class has no ground truth
  double map = 0;
};

/// Per-class AP and their mean over classes that have ground truth.
inline MapResult mean_average_precision(const std::vector<Detection>& dets,
                                        const std::vector<GroundTruth>& gts, int num_classes,
                                        double iou_thr = 0.5, bool all_points = false) {
  if (num_classes < 1) throw std::invalid_argument("mean_average_precision: num_classes < 1");
  std::vector<std::vector<Detection>> by_class(static_cast<std::size_t>(num_classes));
  for (const auto& d : dets) {
    if (d.class_id < 0 || d.class_id >= num_classes)
      throw std::out_of_range("mean_average_precision: detection class " +
                              std::to_string(d.class_id) + " out of range");
    by_class[static_cast<std::size_t>(d.class_id)].push_back(d);
  }
  MapResult r;
  double sum = 0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto cg = boxes_of_class(gts, c);
    std::size_t n = 0;
    for (const auto& [id, b] : cg) n += b.size();
    if (n == 0) {
      r.per_class_ap.push_back(std::nullopt);
      continue;
    }
    const double ap = average_precision(by_class[static_cast<std::size_t>(c)], cg, iou_thr, all_points);
    r.per_class_ap.push_back(ap);
    sum += ap;
    ++present;
  }
  if (present == 0) throw std::invalid_argument("mean_average_precision: ground truth is empty");
  r.map = sum / present;
  return r;
}

/// Mean over ground-truth instances of the best IoU any proposal of the same
/// image reaches (0 for an image without proposals).
inline double rpn_best_overlap_miou(const std::vector<std::vector<Box>>& proposals,
                                    const std::vector<std::vector<Box>>& gts) {
  if (proposals.size() != gts.size())
    throw std::invalid_argument("rpn_best_overlap_miou: per-image lists differ in length");
  double sum = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gts.size(); ++i)
    for (const auto& g : gts[i]) {
      double best = 0;
      for (const auto& p : proposals[i]) best = std::max(best, iou(p, g));
      sum += best;
      ++n;
    }
  if (n == 0) throw std::invalid_argument("rpn_best_overlap_miou: no ground-truth instances");
  return sum / static_cast<double>(n);
}

/// Fraction of ground-truth boxes whose region classification (argmax over
/// C+1 scores, background first) is the true class. `Classifier` must
/// provide classify_regions(image, boxes) -> per-box score vectors.
template <class Classifier>
double gt_box_accuracy(const Classifier& model, const LabeledDataset& test) {
  std::size_t correct = 0, total = 0;
  for (const auto& item : test.items) {
    if (item.annotations.empty()) continue;
    std::vector<Box> boxes;
    for (const auto& a : item.annotations) boxes.push_back(a.box);
    const auto scores = model.classify_regions(item.pixels, boxes);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const auto& s = scores[i];
      const auto arg = static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
      correct += arg == item.annotations[i].class_id + 1 ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("gt_box_accuracy: empty test set");
  return static_cast<double>(correct) / static_cast<double>(total);
}

enum class ErrorCategory { correct, mislocalization, background };

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::correct: return "correct";
    case ErrorCategory::mislocalization: return "mislocalization";
    case ErrorCategory::background: return "background";
  }
  return "?";
}

/// correct iff IoU >= 0.5; mislocalization iff 0.1 <= IoU < 0.5; otherwise
/// background. The 0.5 and 0.1 boundaries fall into the higher category.
inline ErrorCategory categorize_iou(double best_iou) {
  if (best_iou >= 0.5) return ErrorCategory::correct;
  if (best_iou >= 0.1) return ErrorCategory::mislocalization;
  return ErrorCategory::background;
}

struct ErrorCounts {
  std::size_t correct = 0;
  std::size_t mislocalization = 0;
  std::size_t background = 0;

  std::size_t total() const { return correct + mislocalization + background; }
  std::size_t& operator[](ErrorCategory c) {
    return c == ErrorCategory::correct ? correct
           : c == ErrorCategory::mislocalization ? mislocalization
                                                 : background;
  }
  bool operator==(const ErrorCounts&) const = default;
};

/// Category of one detection: best IoU against same-class ground truth in
/// its image, without claiming (a wrong class has no same-class overlap and
/// so lands in background unless a same-class box also overlaps).
inline ErrorCategory categorize_detection(const Detection& d, const std::vector<GroundTruth>& gts) {
  double best = 0;
  for (const auto& g : gts)
    if (g.image_id == d.image_id)
      for (const auto& a : g.annotations)
        if (a.class_id == d.class_id) best = std::max(best, iou(d.box, a.box));
  return categorize_iou(best);
}

/// Categorizes the k most confident detections (stable on input order).
inline ErrorCounts classify_errors(const std::vector<Detection>& dets,
                                   const std::vector<GroundTruth>& gts, std::size_t k = 1000) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  if (order.size() > k) order.resize(k);
  std::map<std::string, std::vector<GroundTruth>> by_image;
  for (const auto& g : gts) by_image[g.image_id].push_back(g);
  static const std::vector<GroundTruth> kNone;
  ErrorCounts c;
  for (std::size_t i : order) {
    auto it = by_image.find(dets[i].image_id);
    ++c[categorize_detection(dets[i], it == by_image.end() ? kNone : it->second)];
  }
  return c;
}

}  // namespace dam::eval

#endif  // DAM_EVAL_METRICS_HPP
