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

#ifndef DNA_CONFIG_HPP_
#define DNA_CONFIG_HPP_

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dna/dataset.hpp"
#include "dna/errors.hpp"
#include "dna/nets.hpp"
#include "dna/pipeline.hpp"

namespace dna {

// Plain-text sectioned key=value run configuration. Unknown keys are
// rejected with a line diagnostic; the fully resolved config is echoed into
// the output directory by every command.

struct RunConfig {
  std::string dataset = "cifar10";  // cifar10 | cifar100 | svhn | synth
  std::string data_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t reduce_n = 0;  // stratified reduction for search; 0 = full set
  std::string aug_blocks = "32,64,64";
  std::string cls_blocks = "32,64,64";
  SearchConfig search;
  TrainConfig train;
  SyntheticSpec synth;
  std::size_t top_k = 5;
};

namespace config_detail {

inline double to_double(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw FormatError("config line " + std::to_string(line) + ": bad numeric value for " + key);
  }
}

inline std::uint64_t to_u64(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw FormatError("config line " + std::to_string(line) + ": bad integer value for " + key);
  }
}

inline bool to_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw FormatError("config line " + std::to_string(line) + ": bad boolean value for " + key);
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace config_detail

inline void apply_config_key(RunConfig* cfg, const std::string& section, const std::string& key,
                             const std::string& value, int line) {
  using config_detail::to_bool;
  using config_detail::to_double;
  using config_detail::to_u64;
  auto unknown = [&]() {
    throw FormatError("config line " + std::to_string(line) + ": unknown key '" + key +
                      "' in section [" + (section.empty() ? "global" : section) + "]");
  };
  if (section.empty()) {
    if (key == "dataset") cfg->dataset = value;
    else if (key == "data_path") cfg->data_path = value;
    else if (key == "out_dir") cfg->out_dir = value;
    else if (key == "seed") cfg->seed = to_u64(value, key, line);
    else if (key == "reduce_n") cfg->reduce_n = to_u64(value, key, line);
    else if (key == "aug_blocks") cfg->aug_blocks = value;
    else if (key == "cls_blocks") cfg->cls_blocks = value;
    else unknown();
  } else if (section == "search") {
    auto& s = cfg->search;
    if (key == "epochs") s.epochs = to_u64(value, key, line);
    else if (key == "tau") s.tau = to_double(value, key, line);
    else if (key == "lambda") s.lambda = to_double(value, key, line);
    else if (key == "aug_lr") s.aug_lr = to_double(value, key, line);
    else if (key == "aug_beta1") s.aug_beta1 = to_double(value, key, line);
    else if (key == "aug_beta2") s.aug_beta2 = to_double(value, key, line);
    else if (key == "aug_wd") s.aug_wd = to_double(value, key, line);
    else if (key == "cls_lr") s.cls_lr = to_double(value, key, line);
    else if (key == "cls_momentum") s.cls_momentum = to_double(value, key, line);
    else if (key == "cls_wd") s.cls_wd = to_double(value, key, line);
    else if (key == "batch_size") s.batch_size = to_u64(value, key, line);
    else unknown();
  } else if (section == "train") {
    auto& t = cfg->train;
    if (key == "epochs") t.epochs = to_u64(value, key, line);
    else if (key == "lr") t.lr = to_double(value, key, line);
    else if (key == "momentum") t.momentum = to_double(value, key, line);
    else if (key == "wd") t.wd = to_double(value, key, line);
    else if (key == "nesterov") t.nesterov = to_bool(value, key, line);
    else if (key == "batch_size") t.batch_size = to_u64(value, key, line);
    else unknown();
  } else if (section == "synth") {
    auto& sp = cfg->synth;
    if (key == "num_per_class") sp.num_per_class = to_u64(value, key, line);
    else if (key == "image_size") sp.image_size = to_u64(value, key, line);
    else if (key == "channels") sp.channels = to_u64(value, key, line);
    else if (key == "noise") sp.noise = to_double(value, key, line);
    else unknown();
  } else if (section == "report") {
    if (key == "top_k") cfg->top_k = to_u64(value, key, line);
    else unknown();
  } else {
    throw FormatError("config line " + std::to_string(line) + ": unknown section [" + section +
                      "]");
  }
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = config_detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw FormatError("config line " + std::to_string(line) + ": malformed section header");
      section = s.substr(1, s.size() - 2);
      continue;
    }
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw FormatError("config line " + std::to_string(line) + ": expected key=value");
    std::string key = config_detail::trim(s.substr(0, eq));
    std::string value = config_detail::trim(s.substr(eq + 1));
    apply_config_key(&cfg, section, key, value, line);
  }
  return cfg;
}

/// Presets for the search/training settings the paper reports plus
/// CPU-feasible desk-scale variants.
inline const std::map<std::string, std::string>& config_presets() {
  static const std::map<std::string, std::string> presets = {
      {"paper-cifar10",
       "dataset = cifar10\nreduce_n = 4000\n"
       "[search]\nepochs = 20\nbatch_size = 128\ncls_lr = 0.1\n"
       "[train]\nepochs = 200\nbatch_size = 512\nlr = 0.1\n"},
      {"paper-cifar100",
       "dataset = cifar100\nreduce_n = 4000\n"
       "[search]\nepochs = 20\nbatch_size = 32\ncls_lr = 0.025\n"
       "[train]\nepochs = 200\nbatch_size = 512\nlr = 0.1\n"},
      {"paper-svhn",
       "dataset = svhn\nreduce_n = 1000\n"
       "[search]\nepochs = 20\nbatch_size = 32\ncls_lr = 0.025\n"
       "[train]\nepochs = 200\nbatch_size = 512\nlr = 0.01\n"},
      {"desk-cifar10",
       "dataset = cifar10\nreduce_n = 4000\n"
       "aug_blocks = 16,32\ncls_blocks = 16,32\n"
       "[search]\nepochs = 20\nbatch_size = 128\ncls_lr = 0.05\naug_wd = 0.001\n"
       "[train]\nepochs = 30\nbatch_size = 128\nlr = 0.05\n"},
      {"desk-synth",
       "dataset = synth\naug_blocks = 8,16\ncls_blocks = 8,16\n"
       "[search]\nepochs = 20\nbatch_size = 64\ncls_lr = 0.05\n"
       "[train]\nepochs = 15\nbatch_size = 64\nlr = 0.05\n"
       "[synth]\nnum_per_class = 1000\nimage_size = 16\n"},
  };
  return presets;
}

/// Loads a config from a file path or a preset name.
inline RunConfig load_config(const std::string& path_or_preset) {
  auto it = config_presets().find(path_or_preset);
  if (it != config_presets().end()) return parse_config_text(it->second);
  std::ifstream f(path_or_preset);
  if (!f) throw FormatError("cannot open config: " + path_or_preset);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

inline std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  os << "dataset = " << c.dataset << "\n";
  os << "data_path = " << c.data_path << "\n";
  os << "out_dir = " << c.out_dir << "\n";
  os << "seed = " << c.seed << "\n";
  os << "reduce_n = " << c.reduce_n << "\n";
  os << "aug_blocks = " << c.aug_blocks << "\n";
  os << "cls_blocks = " << c.cls_blocks << "\n";
  os << "[search]\n";
  os << "epochs = " << c.search.epochs << "\ntau = " << c.search.tau
     << "\nlambda = " << c.search.lambda << "\naug_lr = " << c.search.aug_lr
     << "\naug_beta1 = " << c.search.aug_beta1 << "\naug_beta2 = " << c.search.aug_beta2
     << "\naug_wd = " << c.search.aug_wd << "\ncls_lr = " << c.search.cls_lr
     << "\ncls_momentum = " << c.search.cls_momentum << "\ncls_wd = " << c.search.cls_wd
     << "\nbatch_size = " << c.search.batch_size << "\n";
  os << "[train]\n";
  os << "epochs = " << c.train.epochs << "\nlr = " << c.train.lr
     << "\nmomentum = " << c.train.momentum << "\nwd = " << c.train.wd
     << "\nnesterov = " << (c.train.nesterov ? "true" : "false")
     << "\nbatch_size = " << c.train.batch_size << "\n";
  os << "[synth]\n";
  os << "num_per_class = " << c.synth.num_per_class << "\nimage_size = " << c.synth.image_size
     << "\nchannels = " << c.synth.channels << "\nnoise = " << c.synth.noise << "\n";
  os << "[report]\ntop_k = " << c.top_k << "\n";
  return os.str();
}

inline std::vector<ConvBlock> parse_blocks(const std::string& spec) {
  std::vector<ConvBlock> blocks;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (item.empty()) continue;
    blocks.push_back({static_cast<std::size_t>(std::stoul(item)), 3, 1, true});
  }
  if (blocks.empty()) throw FormatError("empty conv block spec: " + spec);
  return blocks;
}

/// Input geometry + class count for the configured dataset.
struct DatasetGeometry {
  std::size_t h = 32, w = 32, c = 3;
  std::size_t num_classes = 10;
  DatasetKind kind = DatasetKind::kCifar;
};

inline DatasetGeometry dataset_geometry(const RunConfig& cfg) {
  DatasetGeometry g;
  if (cfg.dataset == "cifar10") {
    g = {32, 32, 3, 10, DatasetKind::kCifar};
  } else if (cfg.dataset == "cifar100") {
    g = {32, 32, 3, 100, DatasetKind::kCifar};
  } else if (cfg.dataset == "svhn") {
    g = {32, 32, 3, 10, DatasetKind::kSvhn};
  } else if (cfg.dataset == "synth") {
    g = {cfg.synth.image_size, cfg.synth.image_size, cfg.synth.channels, 2,
         DatasetKind::kSynthetic};
  } else {
    throw FormatError("unknown dataset: " + cfg.dataset);
  }
  return g;
}

inline NetConfig make_net_config(const RunConfig& cfg, bool augmentation_net) {
  DatasetGeometry g = dataset_geometry(cfg);
  NetConfig nc;
  nc.in_h = g.h;
  nc.in_w = g.w;
  nc.in_c = g.c;
  nc.blocks = parse_blocks(augmentation_net ? cfg.aug_blocks : cfg.cls_blocks);
  nc.out_dim = augmentation_net ? kAugOutputDim : g.num_classes;
  nc.flat_dim();  // validate chaining now, not at first forward
  return nc;
}

}  // namespace dna

#endif  // DNA_CONFIG_HPP_
