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

#ifndef DNA_NETS_HPP_
#define DNA_NETS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dna/errors.hpp"
#include "dna/policy.hpp"
#include "dna/rng.hpp"
#include "dna/tensor.hpp"

namespace dna {

// Small configurable CNNs: a conv trunk, flatten, one dense output layer.
// The augmentation net's output splits into the three policy heads
// (105 alpha logits, 210 sigmoid p, 210 sigmoid m); the classifier's output
// is num_classes logits.

inline constexpr std::size_t kAugOutputDim = 105 + 210 + 210;

struct ConvBlock {
  std::size_t out_channels = 32;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  bool pool = true;  // 2x2 average pool after activation
};

struct NetConfig {
  std::size_t in_h = 32, in_w = 32, in_c = 3;
  std::vector<ConvBlock> blocks = {{32, 3, 1, true}, {64, 3, 1, true}, {64, 3, 1, true}};
  std::size_t out_dim = 10;

  /// Validates shape chaining and returns the flattened trunk width.
  std::size_t flat_dim() const {
    std::size_t h = in_h, w = in_w, c = in_c;
    for (const auto& b : blocks) {
      if (b.kernel % 2 == 0 || (b.stride != 1 && b.stride != 2))
        throw ShapeError("net config: kernel must be odd, stride 1 or 2");
      h = (h - 1) / b.stride + 1;
      w = (w - 1) / b.stride + 1;
      c = b.out_channels;
      if (b.pool) {
        if (h % 2 || w % 2) throw ShapeError("net config: pool needs even dims");
        h /= 2;
        w /= 2;
      }
    }
    return h * w * c;
  }
};

template <typename T>
class Network {
 public:
  explicit Network(NetConfig cfg) : cfg_(std::move(cfg)) {
    std::size_t c = cfg_.in_c;
    for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
      const auto& b = cfg_.blocks[i];
      params_.push_back(make_tensor<T>({b.out_channels, c, b.kernel, b.kernel}, true,
                                       "conv" + std::to_string(i) + ".w"));
      params_.push_back(
          make_tensor<T>({b.out_channels}, true, "conv" + std::to_string(i) + ".b"));
      c = b.out_channels;
    }
    params_.push_back(make_tensor<T>({cfg_.flat_dim(), cfg_.out_dim}, true, "dense.w"));
    params_.push_back(make_tensor<T>({cfg_.out_dim}, true, "dense.b"));
  }

  /// He fan-in scaled normal init for weights, zero biases. Deterministic.
  void init(std::uint64_t seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      bool is_bias = p->shape.size() == 1;
      if (is_bias) {
        std::fill(p->v.begin(), p->v.end(), T(0));
        continue;
      }
      std::size_t fan_in = p->shape.size() == 4
                               ? p->shape[1] * p->shape[2] * p->shape[3]
                               : p->shape[0];
      double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(RngPurpose::kInit), i);
      for (auto& v : p->v) v = static_cast<T>(rng.next_normal() * std);
      p->zero_grad();
    }
  }

  /// Zeroes the output layer so heads start at their symmetric point
  /// (uniform pi, p = m = 0.5 for the augmentation net).
  void zero_output_layer() {
    auto& w = params_[params_.size() - 2];
    auto& b = params_[params_.size() - 1];
    std::fill(w->v.begin(), w->v.end(), T(0));
    std::fill(b->v.begin(), b->v.end(), T(0));
  }

  /// x [N,C,H,W] -> logits [N,out_dim]. Never mutates inputs or weights.
  Tensor<T> forward(Tape<T>* tape, const Tensor<T>& x) const {
    if (x->shape.size() != 4 || x->shape[1] != cfg_.in_c || x->shape[2] != cfg_.in_h ||
        x->shape[3] != cfg_.in_w)
      throw ShapeError("network forward: input " + shape_str(x->shape));
    Tensor<T> cur = x;
    for (std::size_t i = 0; i < cfg_.blocks.size(); ++i) {
      cur = conv2d(tape, cur, params_[2 * i], params_[2 * i + 1], cfg_.blocks[i].stride);
      cur = relu(tape, cur);
      if (cfg_.blocks[i].pool) cur = avg_pool(tape, cur);
    }
    cur = flatten(tape, cur);
    return dense(tape, cur, params_[params_.size() - 2], params_[params_.size() - 1]);
  }

  const NetConfig& config() const { return cfg_; }
  std::vector<Tensor<T>>& params() { return params_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->numel();
    return n;
  }

 private:
  NetConfig cfg_;
  std::vector<Tensor<T>> params_;
};

/// Augmentation-network forward: splits the 525-wide output into the three
/// heads. pi rows are softmax(alpha); p and m are strictly interior.
template <typename T>
PolicyParams<T> aug_forward(Tape<T>* tape, const Network<T>& net, const Tensor<T>& x) {
  if (net.config().out_dim != kAugOutputDim)
    throw ShapeError("aug_forward: net out_dim must be " + std::to_string(kAugOutputDim));
  auto out = net.forward(tape, x);
  PolicyParams<T> params;
  params.alpha = col_slice(tape, out, 0, 105);
  params.p = sigmoid(tape, col_slice(tape, out, 105, 210));
  params.m = sigmoid(tape, col_slice(tape, out, 315, 210));
  return params;
}

/// Softmax over alpha rows -> pi [N,105] (plain values, no tape needed).
template <typename T>
std::vector<std::vector<double>> pi_from_alpha(const Tensor<T>& alpha) {
  const std::size_t n = alpha->shape[0], k = alpha->shape[1];
  std::vector<std::vector<double>> pi(n, std::vector<double>(k));
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = alpha->v.data() + i * k;
    double mx = static_cast<double>(row[0]);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      pi[i][j] = std::exp(static_cast<double>(row[j]) - mx);
      sum += pi[i][j];
    }
    for (std::size_t j = 0; j < k; ++j) pi[i][j] /= sum;
  }
  return pi;
}

}  // namespace dna

#endif  // DNA_NETS_HPP_
