// Copyright 2026 The DNA Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DNA_CHECKPOINT_HPP_
#define DNA_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dna/errors.hpp"
#include "dna/nets.hpp"
#include "dna/policy.hpp"

namespace dna {

// Checkpoint file layout: magic "DNACKPT1", u32 little-endian length of a
// JSON section (configs, tensor names and shapes), then the raw 32-bit
// little-endian weight payloads in declared order. Round-trips bit-exactly.

inline constexpr char kCheckpointMagic[8] = {'D', 'N', 'A', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json net_config_to_json(const NetConfig& c) {
  nlohmann::json j;
  j["in_h"] = c.in_h;
  j["in_w"] = c.in_w;
  j["in_c"] = c.in_c;
  j["out_dim"] = c.out_dim;
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : c.blocks)
    j["blocks"].push_back({{"out_channels", b.out_channels},
                           {"kernel", b.kernel},
                           {"stride", b.stride},
                           {"pool", b.pool}});
  return j;
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.in_h = j.at("in_h");
  c.in_w = j.at("in_w");
  c.in_c = j.at("in_c");
  c.out_dim = j.at("out_dim");
  c.blocks.clear();
  for (const auto& b : j.at("blocks"))
    c.blocks.push_back(
        {b.at("out_channels"), b.at("kernel"), b.at("stride"), b.at("pool")});
  return c;
}

struct NetSnapshot {
  NetConfig config;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::vector<float>> values;

  template <typename T>
  static NetSnapshot from(const Network<T>& net) {
    NetSnapshot s;
    s.config = net.config();
    for (const auto& p : net.params()) {
      s.names.push_back(p->name);
      s.shapes.push_back(p->shape);
      std::vector<float> vals(p->numel());
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(p->v[i]);
      s.values.push_back(std::move(vals));
    }
    return s;
  }

  template <typename T>
  void into(Network<T>& net) const {
    auto& params = net.params();
    if (params.size() != values.size())
      throw FormatError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->shape != shapes[i] || params[i]->name != names[i])
        throw FormatError("checkpoint: tensor " + names[i] + " mismatch");
      for (std::size_t j = 0; j < values[i].size(); ++j)
        params[i]->v[j] = static_cast<T>(values[i][j]);
      params[i]->zero_grad();
    }
  }

  std::uint64_t hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& t : values)
      for (float f : t) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        h = (h ^ bits) * 0x100000001B3ull;
      }
    return h;
  }
};

struct Checkpoint {
  std::string phase = "searched";  // "searched" | "trained"
  std::uint64_t seed = 0;
  std::string policy_space_version = kPolicySpaceVersion;
  nlohmann::json search_config;  // snapshot of the search-phase settings
  NetSnapshot aug_net;
  NetSnapshot cls_net;
};

namespace ckpt_detail {

inline nlohmann::json snapshot_meta(const NetSnapshot& s) {
  nlohmann::json j;
  j["config"] = net_config_to_json(s.config);
  j["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < s.names.size(); ++i)
    j["tensors"].push_back({{"name", s.names[i]}, {"shape", s.shapes[i]}});
  return j;
}

inline void snapshot_from_meta(const nlohmann::json& j, NetSnapshot* s) {
  s->config = net_config_from_json(j.at("config"));
  for (const auto& t : j.at("tensors")) {
    s->names.push_back(t.at("name"));
    s->shapes.push_back(t.at("shape").get<std::vector<std::size_t>>());
  }
}

}  // namespace ckpt_detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["format_version"] = kCheckpointFormatVersion;
  meta["phase"] = ckpt.phase;
  meta["seed"] = ckpt.seed;
  meta["policy_space_version"] = ckpt.policy_space_version;
  meta["search_config"] = ckpt.search_config;
  meta["aug_net"] = ckpt_detail::snapshot_meta(ckpt.aug_net);
  meta["cls_net"] = ckpt_detail::snapshot_meta(ckpt.cls_net);
  std::string json_bytes = meta.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw FormatError("cannot open for write: " + tmp);
    f.write(kCheckpointMagic, 8);
    std::uint32_t len = static_cast<std::uint32_t>(json_bytes.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(json_bytes.data(), static_cast<std::streamsize>(json_bytes.size()));
    for (const auto* net : {&ckpt.aug_net, &ckpt.cls_net})
      for (const auto& t : net->values)
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
    if (!f) throw FormatError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint: " + path);
  char magic[8];
  if (!f.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError(path + ": bad checkpoint magic");
  std::uint32_t len = 0;
  if (!f.read(reinterpret_cast<char*>(&len), 4)) throw FormatError(path + ": truncated header");
  std::string json_bytes(len, '\0');
  if (!f.read(json_bytes.data(), len)) throw FormatError(path + ": truncated metadata");
  nlohmann::json meta = nlohmann::json::parse(json_bytes);
  if (meta.at("format_version").get<int>() != kCheckpointFormatVersion)
    throw FormatError(path + ": unsupported format version");

  Checkpoint ckpt;
  ckpt.phase = meta.at("phase");
  ckpt.seed = meta.at("seed");
  ckpt.policy_space_version = meta.at("policy_space_version");
  if (ckpt.policy_space_version != kPolicySpaceVersion)
    throw FormatError(path + ": policy-space version " + ckpt.policy_space_version +
                      " does not match " + kPolicySpaceVersion);
  ckpt.search_config = meta.at("search_config");
  ckpt_detail::snapshot_from_meta(meta.at("aug_net"), &ckpt.aug_net);
  ckpt_detail::snapshot_from_meta(meta.at("cls_net"), &ckpt.cls_net);
  for (auto* net : {&ckpt.aug_net, &ckpt.cls_net})
    for (const auto& shape : net->shapes) {
      std::vector<float> vals(shape_numel(shape));
      if (!f.read(reinterpret_cast<char*>(vals.data()),
                  static_cast<std::streamsize>(vals.size() * sizeof(float))))
        throw FormatError(path + ": truncated weight payload");
      net->values.push_back(std::move(vals));
    }
  return ckpt;
}

}  // namespace dna

#endif  // DNA_CHECKPOINT_HPP_
