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

#ifndef DAM_EVAL_REPORT_HPP
#define DAM_EVAL_REPORT_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dam/detector/detector.hpp"
#include "dam/eval/metrics.hpp"

namespace dam::eval {

inline constexpr const char* kMetricsSchema = "dam-metrics/1";

struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<std::optional<double>> per_class_ap;
  double map = 0;
  double miou = 0;
  double gt_box_accuracy = 0;
  ErrorCounts errors;
  std::string label;  // free-form run tag
};

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json ap = nlohmann::json::object();
  for (std::size_t c = 0; c < r.per_class_ap.size(); ++c) {
    const std::string name = c < r.class_names.size() ? r.class_names[c] : std::to_string(c);
    ap[name] = r.per_class_ap[c] ? nlohmann::json(*r.per_class_ap[c]) : nlohmann::json(nullptr);
  }
  return {{"schema", kMetricsSchema},
          {"label", r.label},
          {"map", r.map},
          {"per_class_ap", ap},
          {"class_names", r.class_names},
          {"rpn_best_overlap_miou", r.miou},
          {"gt_box_accuracy", r.gt_box_accuracy},
          {"errors",
           {{"correct", r.errors.correct},
            {"mislocalization", r.errors.mislocalization},
            {"background", r.errors.background}}}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  if (j.value("schema", std::string{}) != kMetricsSchema)
    throw std::runtime_error("metrics file: unknown schema tag");
  MetricsReport r;
  r.label = j.value("label", std::string{});
  r.map = j.at("map").get<double>();
  r.class_names = j.at("class_names").get<std::vector<std::string>>();
  for (const auto& name : r.class_names) {
    const auto& v = j.at("per_class_ap").at(name);
    r.per_class_ap.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  r.miou = j.at("rpn_best_overlap_miou").get<double>();
  r.gt_box_accuracy = j.at("gt_box_accuracy").get<double>();
  r.errors.correct = j.at("errors").at("correct").get<std::size_t>();
  r.errors.mislocalization = j.at("errors").at("mislocalization").get<std::size_t>();
  r.errors.background = j.at("errors").at("background").get<std::size_t>();
  return r;
}

inline void write_metrics_file(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << report_to_json(r).dump(2) << "\n";
}

inline MetricsReport read_metrics_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read metrics file " + path.string());
  return report_from_json(nlohmann::json::parse(is));
}

inline std::string format_report(const MetricsReport& r) {
  std::ostringstream os;
  char buf[128];
  if (!r.label.empty()) os << "run: " << r.label << "\n";
  std::snprintf(buf, sizeof buf, "mAP@0.5 (11-point): %.4f\n", r.map);
  os << buf;
  for (std::size_t c = 0; c < r.per_class_ap.size(); ++c) {
    const std::string name = c < r.class_names.size() ? r.class_names[c] : std::to_string(c);
    if (r.per_class_ap[c]) std::snprintf(buf, sizeof buf, "  AP %-10s %.4f\n", name.c_str(), *r.per_class_ap[c]);
    else std::snprintf(buf, sizeof buf, "  AP %-10s n/a (no ground truth)\n", name.c_str());
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "RPN best-overlap mIoU: %.4f\n", r.miou);
  os << buf;
  std::snprintf(buf, sizeof buf, "GT-box accuracy: %.4f\n", r.gt_box_accuracy);
  os << buf;
  os << "errors (top-k): correct " << r.errors.correct << ", mislocalization "
     << r.errors.mislocalization << ", background " << r.errors.background << "\n";
  return os.str();
}

/// Detection dump: `image_id class_id confidence xmin ymin xmax ymax` per line.
inline void write_detections(std::ostream& os, const std::vector<Detection>& dets) {
  char buf[256];
  for (const auto& d : dets) {
    if (d.image_id.empty() || d.image_id.find_first_of(" \t\n") != std::string::npos)
      throw std::invalid_argument("write_detections: image id must be a non-empty token");
    std::snprintf(buf, sizeof buf, " %d %.9g %.9g %.9g %.9g %.9g\n", d.class_id, d.confidence,
                  d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax);
    os << d.image_id << buf;
  }
}

inline std::vector<Detection> read_detections(std::istream& is) {
  std::vector<Detection> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Detection d;
    if (!(ls >> d.image_id >> d.class_id >> d.confidence >> d.box.xmin >> d.box.ymin >> d.box.xmax >>
          d.box.ymax))
      throw std::runtime_error("detection dump line " + std::to_string(lineno) + ": malformed");
    std::string extra;
    if (ls >> extra)
      throw std::runtime_error("detection dump line " + std::to_string(lineno) + ": trailing fields");
    require_valid(d.box, "read_detections");
    out.push_back(d);
  }
  return out;
}

struct EvalOptions {
  std::size_t error_top_k = 1000;
  bool all_points_ap = false;
  int miou_proposals = -1;  // -1: the detector's test budget
};

/// Runs every protocol on a labelled test set. Also returns the raw detections.
template <class T>
MetricsReport evaluate(const detector::Detector<T>& det, const LabeledDataset& test,
                       const EvalOptions& opt = {}, std::vector<Detection>* dets_out = nullptr) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  std::vector<Detection> dets;
  std::vector<std::vector<Box>> props, gtb;
  const int k = opt.miou_proposals >= 0 ? opt.miou_proposals : det.config().test_proposals;
  for (const auto& item : test.items) {
    auto d = det.detect(item.pixels, item.id);
    dets.insert(dets.end(), d.begin(), d.end());
    nn::NoGradGuard guard;
    auto f = det.backbone(item.pixels);
    std::vector<Box> p;
    for (const auto& pr : det.rpn_propose(f, image_width(item.pixels), image_height(item.pixels), k))
      p.push_back(pr.box);
    props.push_back(std::move(p));
    std::vector<Box> g;
    for (const auto& a : item.annotations) g.push_back(a.box);
    gtb.push_back(std::move(g));
  }
  const auto gts = ground_truth_of(test);
  MetricsReport r;
  r.class_names = test.class_names;
  const auto m = mean_average_precision(dets, gts, det.config().num_classes, 0.5, opt.all_points_ap);
  r.per_class_ap = m.per_class_ap;
  r.map = m.map;
  r.miou = rpn_best_overlap_miou(props, gtb);
  r.gt_box_accuracy = gt_box_accuracy(det, test);
  r.errors = classify_errors(dets, gts, opt.error_top_k);
  if (dets_out) *dets_out = std::move(dets);
  return r;
}

}  // namespace dam::eval

#endif  // DAM_EVAL_REPORT_HPP
