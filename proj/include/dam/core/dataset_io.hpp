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

#ifndef DAM_CORE_DATASET_IO_HPP
#define DAM_CORE_DATASET_IO_HPP

// On-disk split layout:
//   <split>/classes.txt     one class name per line, line index = class id
//   <split>/<id>.png        8-bit RGB image
//   <split>/<id>.txt        one "class_id xmin ymin xmax ymax" line per box
//                           (labeled splits only)

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dam/core/png_io.hpp"
#include "dam/core/types.hpp"

namespace dam {

namespace fs = std::filesystem;

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string format_annotation(const Annotation& a) {
  return std::to_string(a.class_id) + ' ' + format_number(a.box.xmin) + ' ' +
         format_number(a.box.ymin) + ' ' + format_number(a.box.xmax) + ' ' +
         format_number(a.box.ymax);
}

inline std::vector<Annotation> parse_annotations(std::istream& in, const std::string& origin) {
  std::vector<Annotation> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Annotation a;
    if (!(ss >> a.class_id >> a.box.xmin >> a.box.ymin >> a.box.xmax >> a.box.ymax))
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed annotation");
    out.push_back(a);
  }
  return out;
}

inline void write_class_manifest(const fs::path& dir, const std::vector<std::string>& names) {
  std::ofstream out(dir / "classes.txt", std::ios::trunc);
  for (const auto& n : names) out << n << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "classes.txt").string());
}

inline std::vector<std::string> read_class_manifest(const fs::path& dir) {
  std::ifstream in(dir / "classes.txt");
  if (!in) throw std::runtime_error("missing class manifest " + (dir / "classes.txt").string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

inline std::vector<std::string> list_image_ids(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("no such split directory " + dir.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline void write_labeled_dataset(const fs::path& dir, const LabeledDataset& d) {
  fs::create_directories(dir);
  write_class_manifest(dir, d.class_names);
  for (const auto& item : d.items) {
    write_png(dir / (item.id + ".png"), item.pixels);
    std::ofstream out(dir / (item.id + ".txt"), std::ios::trunc);
    for (const auto& a : item.annotations) out << format_annotation(a) << '\n';
    if (!out) throw std::runtime_error("cannot write annotations for " + item.id);
  }
}

inline void write_unlabeled_dataset(const fs::path& dir, const UnlabeledDataset& d) {
  fs::create_directories(dir);
  write_class_manifest(dir, d.class_names);
  for (const auto& item : d.items) write_png(dir / (item.id + ".png"), item.pixels);
}

inline LabeledDataset read_labeled_dataset(const fs::path& dir) {
  LabeledDataset d;
  d.class_names = read_class_manifest(dir);
  d.split = dir.filename().string();
  for (const auto& id : list_image_ids(dir)) {
    LabeledImage item;
    item.id = id;
    item.pixels = read_png(dir / (id + ".png"));
    std::ifstream in(dir / (id + ".txt"));
    if (!in) throw std::runtime_error("missing annotation sidecar for " + id + " in " + dir.string());
    item.annotations = parse_annotations(in, (dir / (id + ".txt")).string());
    item.validate(d.class_count());
    d.items.push_back(std::move(item));
  }
  return d;
}

/// Loads pixels only; sidecar files, if any, are never opened.
inline UnlabeledDataset read_unlabeled_dataset(const fs::path& dir) {
  UnlabeledDataset d;
  d.class_names = read_class_manifest(dir);
  d.split = dir.filename().string();
  for (const auto& id : list_image_ids(dir)) d.items.push_back({read_png(dir / (id + ".png")), id});
  return d;
}

}  // namespace dam

#endif  // DAM_CORE_DATASET_IO_HPP
