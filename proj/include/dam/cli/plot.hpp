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

#ifndef DAM_CLI_PLOT_HPP
#define DAM_CLI_PLOT_HPP

// Grouped bar charts as standalone SVG documents.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "dam/eval/report.hpp"

namespace dam::cli {

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one per group
};

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

inline std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& groups,
                                 const std::vector<BarSeries>& series, double y_max,
                                 const std::string& y_label) {
  static const char* kColours[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                   "#59a14f", "#edc948", "#b07aa1", "#9c755f"};
  const double left = 60, top = 40, plot_h = 240, group_w = 40.0 + 22.0 * series.size();
  const double plot_w = std::max(200.0, group_w * groups.size());
  const double width = left + plot_w + 160, height = top + plot_h + 60;
  if (!(y_max > 0)) y_max = 1;
  std::string s;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "font-family=\"sans-serif\" font-size=\"11\">\n",
                width, height);
  s += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"20\" font-size=\"14\">%s</text>\n", left,
                xml_escape(title).c_str());
  s += buf;
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0, y = top + plot_h - plot_h * t / 4.0;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>\n",
                  left, y, left + plot_w, y, left - 4, y + 4, v);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text transform=\"translate(14,%.1f) rotate(-90)\" text-anchor=\"middle\">%s</text>\n",
                top + plot_h / 2, xml_escape(y_label).c_str());
  s += buf;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = left + g * group_w + 20;
    for (std::size_t k = 0; k < series.size(); ++k) {
      const double v = g < series[k].values.size() ? std::clamp(series[k].values[g], 0.0, y_max) : 0.0;
      const double h = plot_h * v / y_max;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%.1f\" y=\"%.1f\" width=\"20\" height=\"%.1f\" fill=\"%s\"/>\n",
                    gx + 22.0 * k, top + plot_h - h, h, kColours[k % 8]);
      s += buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n",
                  gx + 11.0 * series.size(), top + plot_h + 16, xml_escape(groups[g]).c_str());
    s += buf;
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double ly = top + 14.0 * k;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"10\" height=\"10\" fill=\"%s\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                  left + plot_w + 20, ly, kColours[k % 8], left + plot_w + 34, ly + 9,
                  xml_escape(series[k].name).c_str());
    s += buf;
  }
  s += "</svg>\n";
  return s;
}

/// Class-wise AP, one bar series per report; classes without ground truth plot as 0.
inline std::string class_ap_chart(const std::vector<eval::MetricsReport>& reports) {
  std::vector<std::string> groups = reports.front().class_names;
  std::vector<BarSeries> series;
  for (const auto& r : reports) {
    BarSeries b{r.label, {}};
    for (const auto& ap : r.per_class_ap) b.values.push_back(ap.value_or(0.0));
    series.push_back(std::move(b));
  }
  return bar_chart_svg("Class-wise AP@0.5", groups, series, 1.0, "AP");
}

/// Error taxonomy counts of the top-ranked detections.
inline std::string error_chart(const std::vector<eval::MetricsReport>& reports) {
  std::vector<BarSeries> series;
  double top = 1;
  for (const auto& r : reports) {
    series.push_back({r.label,
                      {static_cast<double>(r.errors.correct), static_cast<double>(r.errors.mislocalization),
                       static_cast<double>(r.errors.background)}});
    top = std::max({top, series.back().values[0], series.back().values[1], series.back().values[2]});
  }
  return bar_chart_svg("Top-ranked detection errors", {"correct", "mislocalization", "background"},
                       series, top, "detections");
}

}  // namespace dam::cli

#endif  // DAM_CLI_PLOT_HPP
