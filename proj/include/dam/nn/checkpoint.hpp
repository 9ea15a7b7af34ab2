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

#ifndef DAM_NN_CHECKPOINT_HPP
#define DAM_NN_CHECKPOINT_HPP

// Checkpoint layout (little-endian):
//   8 bytes  magic "DAMCKPT1"
//   u64      header length N
//   N bytes  JSON header: {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
//   float32 payload, tensors back to back in header order

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dam/nn/layers.hpp"

namespace dam::nn {

inline constexpr char kCheckpointMagic[9] = "DAMCKPT1";

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor<float>> tensors;
};

template <class T>
void store_parameters(Checkpoint& ckpt, const ParameterList<T>& params,
                      const std::string& prefix) {
  for (const auto& [name, v] : params) ckpt.tensors[prefix + name] = v.value().template cast<float>();
}

template <class T>
void load_parameters(const Checkpoint& ckpt, ParameterList<T>& params,
                     const std::string& prefix) {
  for (auto& [name, v] : params) {
    auto it = ckpt.tensors.find(prefix + name);
    if (it == ckpt.tensors.end())
      throw std::runtime_error("checkpoint is missing tensor '" + prefix + name + "'");
    if (it->second.shape() != v.value().shape())
      throw std::runtime_error("checkpoint tensor '" + prefix + name + "' has shape " +
                               it->second.shape_string() + ", expected " +
                               v.value().shape_string());
    Var<T> var = v;
    var.mutable_value() = it->second.template cast<T>();
  }
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json header;
  header["meta"] = ckpt.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, 8);
  const std::uint64_t len = h.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : ckpt.tensors)
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(float)));
  if (!out) throw std::runtime_error("short write on checkpoint " + path.string());
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw std::runtime_error(path.string() + " is not a dam checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string h(len, '\0');
  in.read(h.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("truncated checkpoint header in " + path.string());
  const auto header = nlohmann::json::parse(h);
  Checkpoint ckpt;
  ckpt.meta = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    Tensor<float> t(entry.at("shape").get<std::vector<int>>());
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!in) throw std::runtime_error("truncated checkpoint payload in " + path.string());
    ckpt.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return ckpt;
}

}  // namespace dam::nn

#endif  // DAM_NN_CHECKPOINT_HPP
