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

#ifndef DNA_PIPELINE_HPP_
#define DNA_PIPELINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dna/checkpoint.hpp"
#include "dna/dataset.hpp"
#include "dna/errors.hpp"
#include "dna/nets.hpp"
#include "dna/optim.hpp"
#include "dna/policy.hpp"
#include "dna/tensor.hpp"

namespace dna {

// Two-phase protocol: joint search (one loss, two optimizers), freeze the
// augmentation network, train a fresh classifier under the frozen policy,
// then evaluate on the clean path. Per-batch augmentation pipeline for
// CIFAR/SVHN: flip + pad-crop -> learned sub-policy -> terminal 16x16
// Cutout; synthetic data sees only the learned sub-policy.

struct SearchConfig {
  std::size_t epochs = 20;
  double tau = 0.5;
  double lambda = 0.5;
  double aug_lr = 0.005;
  double aug_beta1 = 0.5;
  double aug_beta2 = 0.999;
  double aug_wd = 0.0;
  double cls_lr = 0.1;
  double cls_momentum = 0.9;
  double cls_wd = 2e-4;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
};

struct TrainConfig {
  std::size_t epochs = 30;
  double lr = 0.1;
  double momentum = 0.9;
  double wd = 2e-4;
  bool nesterov = true;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
};

inline nlohmann::json search_config_to_json(const SearchConfig& c) {
  return {{"epochs", c.epochs},       {"tau", c.tau},
          {"lambda", c.lambda},       {"aug_lr", c.aug_lr},
          {"aug_beta1", c.aug_beta1}, {"aug_beta2", c.aug_beta2},
          {"aug_wd", c.aug_wd},       {"cls_lr", c.cls_lr},
          {"cls_momentum", c.cls_momentum}, {"cls_wd", c.cls_wd},
          {"batch_size", c.batch_size}, {"seed", c.seed}};
}

struct HistoryRow {
  std::size_t epoch;
  std::string split;
  double value;
};

inline void write_history_csv(const std::string& path, const std::vector<HistoryRow>& rows) {
  std::ofstream f(path + ".tmp");
  if (!f) throw FormatError("cannot open for write: " + path);
  f << "epoch,split,value\n";
  for (const auto& r : rows) f << r.epoch << "," << r.split << "," << r.value << "\n";
  f.close();
  std::filesystem::rename(path + ".tmp", path);
}

namespace pipeline_detail {

template <typename T>
Tensor<T> batch_to_tensor(const std::vector<Image>& imgs) {
  const Image& first = imgs.front();
  auto x = make_tensor<T>({imgs.size(), first.c, first.h, first.w});
  const std::size_t d = first.v.size();
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    auto planar = policy_detail::to_planar<T>(imgs[i]);
    std::copy(planar.begin(), planar.end(), x->v.begin() + i * d);
  }
  return x;
}

template <typename T>
double grad_norm(const std::vector<Tensor<T>>& params) {
  double acc = 0;
  for (const auto& p : params)
    for (std::size_t i = 0; i < p->grad.size(); ++i)
      acc += static_cast<double>(p->grad[i]) * static_cast<double>(p->grad[i]);
  return std::sqrt(acc);
}

/// Planar mask for a terminal 16x16 Cutout at a derived uniform center.
template <typename T>
std::shared_ptr<std::vector<T>> cutout16_mask(std::size_t c, std::size_t h, std::size_t w,
                                              RngStream& rng) {
  auto mask = std::make_shared<std::vector<T>>(c * h * w, T(1));
  long cy = static_cast<long>(rng.next_below(h));
  long cx = static_cast<long>(rng.next_below(w));
  long y0 = cy - 8, x0 = cx - 8;
  for (long y = std::max(0l, y0); y < std::min(static_cast<long>(h), y0 + 16); ++y)
    for (long x = std::max(0l, x0); x < std::min(static_cast<long>(w), x0 + 16); ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        (*mask)[(ch * h + static_cast<std::size_t>(y)) * w + static_cast<std::size_t>(x)] = T(0);
  return mask;
}

inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed,
                                            std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(RngPurpose::kShuffle),
                                    epoch + 1);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
  return order;
}

}  // namespace pipeline_detail

/// Joint policy search: one cross-entropy loss, one backward, Adam on the
/// augmentation network and SGD on the classifier from the same batch.
template <typename T = float>
Checkpoint search_run(const Dataset& data, DatasetKind kind, const SearchConfig& cfg,
                      const NetConfig& aug_cfg, const NetConfig& cls_cfg,
                      std::vector<HistoryRow>* history = nullptr) {
  Network<T> aug(aug_cfg), cls(cls_cfg);
  aug.init(RngStream::derive(cfg.seed, 0xA06).next_u64());
  cls.init(RngStream::derive(cfg.seed, 0xC15).next_u64());

  AdamOptimizer<T> aug_opt(static_cast<T>(cfg.aug_beta1), static_cast<T>(cfg.aug_beta2),
                           static_cast<T>(cfg.aug_wd));
  SgdOptimizer<T> cls_opt(static_cast<T>(cfg.cls_momentum), static_cast<T>(cfg.cls_wd),
                          /*nesterov=*/false);
  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = n == 0 ? 0 : (n + cfg.batch_size - 1) / cfg.batch_size;
  auto cls_sched = LrSchedule<T>::cosine(static_cast<T>(cfg.cls_lr),
                                         std::max<std::size_t>(1, cfg.epochs * steps_per_epoch));
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = pipeline_detail::epoch_order(n, cfg.seed, epoch);
    double epoch_loss = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, n - b0);
      std::vector<Image> inputs(bsz);
      std::vector<int> labels(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        std::size_t gi = order[b0 + i];
        RngStream pre = sample_stream(cfg.seed, epoch, gi, RngPurpose::kPreprocess);
        inputs[i] = preprocess_geometric(data.images[gi], kind, pre);
        labels[i] = data.labels[gi];
      }
      Tape<T> tape;
      auto x = pipeline_detail::batch_to_tensor<T>(inputs);
      auto params = aug_forward(&tape, aug, x);
      std::vector<Tensor<T>> aug_rows(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        std::size_t gi = order[b0 + i];
        auto alpha_row = row_slice(&tape, params.alpha, i);
        RngStream gum = sample_stream(cfg.seed, epoch, gi, RngPurpose::kGumbel);
        RngStream bern = sample_stream(cfg.seed, epoch, gi, RngPurpose::kBernoulli);
        std::uint64_t cut_seed =
            sample_stream(cfg.seed, epoch, gi, RngPurpose::kCutout).next_u64();
        auto res = select_and_apply(&tape, inputs[i], alpha_row, params.p, i, params.m,
                                    cfg.tau, cfg.lambda, gum, bern, cut_seed,
                                    PolicyMode::kSearch);
        Tensor<T> pix = res.pixels;
        if (kind != DatasetKind::kSynthetic) {
          RngStream tc = sample_stream(cfg.seed, epoch, gi, RngPurpose::kTerminalCutout);
          auto mask = pipeline_detail::cutout16_mask<T>(inputs[i].c, inputs[i].h, inputs[i].w, tc);
          pix = affine_mask(&tape, pix, mask, T(0.5));
        }
        aug_rows[i] = pix;
      }
      auto xin = stack_rows(&tape, aug_rows);
      auto logits = cls.forward(&tape, xin);
      auto loss = cross_entropy(&tape, logits, labels);
      if (!std::isfinite(static_cast<double>(loss->v[0]))) {
        std::ostringstream os;
        os << "search_run: non-finite loss at epoch " << epoch << " batch " << b0 / cfg.batch_size
           << " (cls lr " << cls_sched.at(step) << ")";
        throw NumericError(os.str());
      }
      tape.backward(loss);
      aug_opt.step(aug.params(), static_cast<T>(cfg.aug_lr));
      cls_opt.step(cls.params(), cls_sched.at(step));
      ++step;
      epoch_loss += static_cast<double>(loss->v[0]) * static_cast<double>(bsz);
    }
    if (history && n > 0)
      history->push_back({epoch, "search", epoch_loss / static_cast<double>(n)});
  }

  Checkpoint ckpt;
  ckpt.phase = "searched";
  ckpt.seed = cfg.seed;
  ckpt.search_config = search_config_to_json(cfg);
  ckpt.aug_net = NetSnapshot::from(aug);
  ckpt.cls_net = NetSnapshot::from(cls);
  return ckpt;
}

/// Classifier training under the frozen policy. The augmentation network's
/// weights are carried through bit-identically; the classifier restarts
/// from a fresh init drawn from cfg.seed.
template <typename T = float>
Checkpoint train_run(const Dataset& data, DatasetKind kind, const Checkpoint& in,
                     const TrainConfig& cfg, std::vector<HistoryRow>* history = nullptr) {
  if (in.phase != "searched") throw ContractError("train_run: checkpoint phase must be searched");
  Network<T> aug(in.aug_net.config);
  in.aug_net.into(aug);
  for (auto& p : aug.params()) p->requires_grad = false;  // frozen
  Network<T> cls(in.cls_net.config);
  cls.init(RngStream::derive(cfg.seed, 0xC15).next_u64());

  const double tau = in.search_config.value("tau", 0.5);
  const double lambda = in.search_config.value("lambda", 0.5);
  SgdOptimizer<T> opt(static_cast<T>(cfg.momentum), static_cast<T>(cfg.wd), cfg.nesterov);
  const std::size_t n = data.size();
  const std::size_t steps_per_epoch = n == 0 ? 0 : (n + cfg.batch_size - 1) / cfg.batch_size;
  auto sched = LrSchedule<T>::cosine(static_cast<T>(cfg.lr),
                                     std::max<std::size_t>(1, cfg.epochs * steps_per_epoch));
  std::size_t step = 0;
  // Offset epochs so train-phase streams never collide with search-phase ones.
  const std::uint64_t kEpochBase = 1u << 20;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto order = pipeline_detail::epoch_order(n, cfg.seed, kEpochBase + epoch);
    double epoch_loss = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t bsz = std::min(cfg.batch_size, n - b0);
      std::vector<Image> inputs(bsz);
      std::vector<int> labels(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        std::size_t gi = order[b0 + i];
        RngStream pre = sample_stream(cfg.seed, kEpochBase + epoch, gi, RngPurpose::kPreprocess);
        inputs[i] = preprocess_geometric(data.images[gi], kind, pre);
        labels[i] = data.labels[gi];
      }
      auto x = pipeline_detail::batch_to_tensor<T>(inputs);
      auto params = aug_forward<T>(nullptr, aug, x);
      std::vector<Image> augmented(bsz);
      for (std::size_t i = 0; i < bsz; ++i) {
        std::size_t gi = order[b0 + i];
        auto alpha_row = row_slice<T>(nullptr, params.alpha, i);
        RngStream gum = sample_stream(cfg.seed, kEpochBase + epoch, gi, RngPurpose::kGumbel);
        RngStream bern = sample_stream(cfg.seed, kEpochBase + epoch, gi, RngPurpose::kBernoulli);
        std::uint64_t cut_seed =
            sample_stream(cfg.seed, kEpochBase + epoch, gi, RngPurpose::kCutout).next_u64();
        auto res = select_and_apply<T>(nullptr, inputs[i], alpha_row, params.p, i, params.m,
                                       tau, lambda, gum, bern, cut_seed, PolicyMode::kFrozen);
        augmented[i] = res.image;
        if (kind != DatasetKind::kSynthetic) {
          RngStream tc =
              sample_stream(cfg.seed, kEpochBase + epoch, gi, RngPurpose::kTerminalCutout);
          cutout16(augmented[i], tc);
        }
      }
      Tape<T> tape;
      auto xin = pipeline_detail::batch_to_tensor<T>(augmented);
      auto logits = cls.forward(&tape, xin);
      auto loss = cross_entropy(&tape, logits, labels);
      if (!std::isfinite(static_cast<double>(loss->v[0]))) {
        std::ostringstream os;
        os << "train_run: non-finite loss at epoch " << epoch << " batch " << b0 / cfg.batch_size
           << " (lr " << sched.at(step) << ")";
        throw NumericError(os.str());
      }
      tape.backward(loss);
      opt.step(cls.params(), sched.at(step));
      ++step;
      epoch_loss += static_cast<double>(loss->v[0]) * static_cast<double>(bsz);
    }
    if (history && n > 0)
      history->push_back({epoch, "train", epoch_loss / static_cast<double>(n)});
  }

  Checkpoint out;
  out.phase = "trained";
  out.seed = cfg.seed;
  out.search_config = in.search_config;
  out.aug_net = in.aug_net;  // bit-identical freeze contract
  out.cls_net = NetSnapshot::from(cls);
  return out;
}

struct EvalResult {
  double accuracy = 0;
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_count;
};

/// Clean test path: images flow only through the classifier. No rng.
template <typename T = float>
EvalResult evaluate(const Dataset& data, const Checkpoint& ckpt) {
  if (ckpt.phase != "trained") throw ContractError("evaluate: checkpoint phase must be trained");
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  Network<T> cls(ckpt.cls_net.config);
  ckpt.cls_net.into(cls);
  const std::size_t k = data.num_classes();
  EvalResult res;
  res.per_class_accuracy.assign(k, 0);
  res.per_class_count.assign(k, 0);
  std::vector<std::size_t> correct(k, 0);
  const std::size_t batch = 256;
  for (std::size_t b0 = 0; b0 < data.size(); b0 += batch) {
    const std::size_t bsz = std::min(batch, data.size() - b0);
    std::vector<Image> imgs(data.images.begin() + static_cast<std::ptrdiff_t>(b0),
                            data.images.begin() + static_cast<std::ptrdiff_t>(b0 + bsz));
    auto x = pipeline_detail::batch_to_tensor<T>(imgs);
    auto logits = cls.forward(nullptr, x);
    for (std::size_t i = 0; i < bsz; ++i) {
      const T* row = logits->v.data() + i * ckpt.cls_net.config.out_dim;
      std::size_t arg = 0;
      for (std::size_t j = 1; j < ckpt.cls_net.config.out_dim; ++j)
        if (row[j] > row[arg]) arg = j;
      std::size_t label = static_cast<std::size_t>(data.labels[b0 + i]);
      res.per_class_count[label]++;
      if (arg == label) correct[label]++;
    }
  }
  std::size_t total_correct = 0;
  for (std::size_t cls_i = 0; cls_i < k; ++cls_i) {
    total_correct += correct[cls_i];
    res.per_class_accuracy[cls_i] = res.per_class_count[cls_i]
                                        ? static_cast<double>(correct[cls_i]) /
                                              static_cast<double>(res.per_class_count[cls_i])
                                        : 0.0;
  }
  res.accuracy = static_cast<double>(total_correct) / static_cast<double>(data.size());
  return res;
}

struct PolicyReport {
  std::vector<std::string> class_names;
  std::vector<bool> class_present;
  std::vector<std::vector<double>> mean_pi;                  // per class, 105 wide
  std::vector<std::vector<std::pair<int, double>>> top;      // per class, top_k entries
  std::vector<std::pair<int, double>> overall_top;
};

/// Per-class average policy E[pi(x) | Y = y] with top-k sub-policies,
/// ties broken by sub-policy index.
template <typename T = float>
PolicyReport policy_report(const Dataset& data, const Checkpoint& ckpt, std::size_t top_k) {
  if (ckpt.phase != "searched" && ckpt.phase != "trained")
    throw ContractError("policy_report: unknown checkpoint phase " + ckpt.phase);
  Network<T> aug(ckpt.aug_net.config);
  ckpt.aug_net.into(aug);
  const std::size_t k = data.num_classes();
  PolicyReport rep;
  rep.class_names = data.class_names;
  rep.class_present.assign(k, false);
  rep.mean_pi.assign(k, std::vector<double>(kNumSubPolicies, 0.0));
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> overall(kNumSubPolicies, 0.0);

  const std::size_t batch = 256;
  for (std::size_t b0 = 0; b0 < data.size(); b0 += batch) {
    const std::size_t bsz = std::min(batch, data.size() - b0);
    std::vector<Image> imgs(data.images.begin() + static_cast<std::ptrdiff_t>(b0),
                            data.images.begin() + static_cast<std::ptrdiff_t>(b0 + bsz));
    auto x = pipeline_detail::batch_to_tensor<T>(imgs);
    auto params = aug_forward<T>(nullptr, aug, x);
    auto pi = pi_from_alpha(params.alpha);
    for (std::size_t i = 0; i < bsz; ++i) {
      std::size_t label = static_cast<std::size_t>(data.labels[b0 + i]);
      counts[label]++;
      for (int s = 0; s < kNumSubPolicies; ++s) {
        rep.mean_pi[label][static_cast<std::size_t>(s)] += pi[i][static_cast<std::size_t>(s)];
        overall[static_cast<std::size_t>(s)] += pi[i][static_cast<std::size_t>(s)];
      }
    }
  }

  auto top_of = [top_k](const std::vector<double>& v) {
    std::vector<std::pair<int, double>> entries;
    for (int s = 0; s < kNumSubPolicies; ++s)
      entries.push_back({s, v[static_cast<std::size_t>(s)]});
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    entries.resize(std::min<std::size_t>(top_k, entries.size()));
    return entries;
  };

  rep.top.assign(k, {});
  for (std::size_t cls_i = 0; cls_i < k; ++cls_i) {
    if (!counts[cls_i]) continue;
    rep.class_present[cls_i] = true;
    for (auto& v : rep.mean_pi[cls_i]) v /= static_cast<double>(counts[cls_i]);
    rep.top[cls_i] = top_of(rep.mean_pi[cls_i]);
  }
  if (data.size() > 0)
    for (auto& v : overall) v /= static_cast<double>(data.size());
  rep.overall_top = top_of(overall);
  return rep;
}

}  // namespace dna

#endif  // DNA_PIPELINE_HPP_
