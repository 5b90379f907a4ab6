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

#ifndef DNA_POLICY_HPP_
#define DNA_POLICY_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dna/errors.hpp"
#include "dna/image.hpp"
#include "dna/image_ops.hpp"
#include "dna/rng.hpp"
#include "dna/tensor.hpp"

namespace dna {

// The search space: all C(15,2) = 105 canonical ordered pairs of distinct
// operations, plus the differentiable sampling machinery. Categorical
// selection uses a Gumbel-Softmax relaxation, per-operation application a
// relaxed Bernoulli; both use hard values forward and straight-through
// gradients backward.

inline constexpr int kNumSubPolicies = 105;
inline constexpr int kSubPolicyLength = 2;
inline constexpr const char* kPolicySpaceVersion = "dna-space-v1";

struct SubPolicy {
  int index = 0;
  std::array<OpKind, 2> ops{OpKind::kShearX, OpKind::kShearY};
};

class PolicySpace {
 public:
  static const PolicySpace& get() {
    static PolicySpace space;
    return space;
  }

  const std::vector<SubPolicy>& subpolicies() const { return subs_; }
  const SubPolicy& at(int i) const { return subs_.at(static_cast<std::size_t>(i)); }

  /// Rank of the canonical pair (a,b); -1 when (a,b) is not canonical.
  int index_of(int a, int b) const {
    if (a < 0 || b < 0 || a >= kNumOps || b >= kNumOps || a >= b) return -1;
    int idx = 0;
    for (int i = 0; i < a; ++i) idx += kNumOps - 1 - i;
    return idx + (b - a - 1);
  }

  bool contains(int a, int b) const { return index_of(a, b) >= 0; }

  bool has_op(int index, OpKind op) const {
    const auto& s = at(index);
    return s.ops[0] == op || s.ops[1] == op;
  }

  std::string name(int index) const {
    const auto& s = at(index);
    return std::string("(") + op_name(s.ops[0]) + ", " + op_name(s.ops[1]) + ")";
  }

  /// FNV-1a over the enumeration order; stable across runs and versions.
  std::uint64_t ordering_hash() const {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const auto& s : subs_) {
      h = (h ^ static_cast<std::uint64_t>(static_cast<int>(s.ops[0]))) * 0x100000001B3ull;
      h = (h ^ static_cast<std::uint64_t>(static_cast<int>(s.ops[1]))) * 0x100000001B3ull;
    }
    return h;
  }

 private:
  PolicySpace() {
    int idx = 0;
    for (int a = 0; a < kNumOps; ++a)
      for (int b = a + 1; b < kNumOps; ++b)
        subs_.push_back(SubPolicy{idx++, {static_cast<OpKind>(a), static_cast<OpKind>(b)}});
  }
  std::vector<SubPolicy> subs_;
};

inline const PolicySpace& enumerate_subpolicies() { return PolicySpace::get(); }

/// Per-batch policy heads: alpha [N,105] pre-softmax, p and m [N,210]
/// sigmoid outputs (entry s*2+slot for sub-policy s, slot 0/1).
template <typename T>
struct PolicyParams {
  Tensor<T> alpha;
  Tensor<T> p;
  Tensor<T> m;
};

enum class PolicyMode { kSearch, kFrozen };

template <typename T>
struct GumbelSample {
  Tensor<T> soft;          // relaxed weights, on the tape in search mode
  std::vector<double> u;   // uniforms
  std::vector<double> g;   // Gumbel noises -log(-log u)
  int selected = 0;        // argmax(alpha + g)
};

/// Eq. soft_s = exp((alpha_s+g_s)/tau) / sum, hard selection by Gumbel-max.
template <typename T>
GumbelSample<T> gumbel_softmax_sample(Tape<T>* tape, const Tensor<T>& alpha, double tau,
                                      RngStream& rng) {
  if (!(tau > 0.0)) throw DomainError("gumbel_softmax: tau must be > 0");
  check_finite("gumbel_softmax", alpha);
  const std::size_t k = alpha->numel();
  GumbelSample<T> out;
  out.u.resize(k);
  out.g.resize(k);
  double best = -1e300;
  for (std::size_t s = 0; s < k; ++s) {
    out.u[s] = rng.next_uniform();
    out.g[s] = -std::log(-std::log(out.u[s]));
    double z = static_cast<double>(alpha->v[s]) + out.g[s];
    if (z > best) {
      best = z;
      out.selected = static_cast<int>(s);
    }
  }
  out.soft = make_tensor<T>({k});
  double mx = -1e300;
  std::vector<double> scaled(k);
  for (std::size_t s = 0; s < k; ++s) {
    scaled[s] = (static_cast<double>(alpha->v[s]) + out.g[s]) / tau;
    mx = std::max(mx, scaled[s]);
  }
  double sum = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    scaled[s] = std::exp(scaled[s] - mx);
    sum += scaled[s];
  }
  for (std::size_t s = 0; s < k; ++s) out.soft->v[s] = static_cast<T>(scaled[s] / sum);
  if (tape) {
    tape->record({alpha}, out.soft, [k, tau](typename Tape<T>::Node& nd) {
      auto& ai = nd.inputs[0];
      if (!ai->requires_grad) return;
      ai->ensure_grad();
      const T* soft = nd.output->v.data();
      const T* gy = nd.output->grad.data();
      T dot = 0;
      for (std::size_t s = 0; s < k; ++s) dot += soft[s] * gy[s];
      for (std::size_t s = 0; s < k; ++s)
        ai->grad[s] += soft[s] * (gy[s] - dot) / static_cast<T>(tau);
    });
  }
  return out;
}

template <typename T>
struct BernoulliSample {
  Tensor<T> b_hat;  // scalar relaxed value, on the tape in search mode
  bool b = false;   // hard bit 1{b_hat > 0.5}
  double u = 0.0;
};

inline double clamp_prob(double p) { return std::clamp(p, 1e-6, 1.0 - 1e-6); }

/// Relaxed value for probability p, temperature lambda, uniform u.
inline double relaxed_bernoulli_value(double p, double lambda, double u) {
  p = clamp_prob(p);
  double z = (std::log(p / (1.0 - p)) + std::log(u / (1.0 - u))) / lambda;
  return 1.0 / (1.0 + std::exp(-z));
}

/// Samples b_hat from the relaxed Bernoulli at p = p_tensor[flat_index].
/// Gradient flows to that entry; forward consumers use the hard bit with
/// straight-through db/db_hat = 1.
template <typename T>
BernoulliSample<T> relaxed_bernoulli_sample(Tape<T>* tape, const Tensor<T>& p_tensor,
                                            std::size_t flat_index, double lambda,
                                            RngStream& rng) {
  if (!(lambda > 0.0)) throw DomainError("relaxed_bernoulli: lambda must be > 0");
  BernoulliSample<T> out;
  out.u = rng.next_uniform();
  const double p = clamp_prob(static_cast<double>(p_tensor->v[flat_index]));
  const double bh = relaxed_bernoulli_value(p, lambda, out.u);
  out.b = bh > 0.5;
  out.b_hat = make_tensor<T>({1});
  out.b_hat->v[0] = static_cast<T>(bh);
  if (tape) {
    tape->record({p_tensor}, out.b_hat, [flat_index, lambda, p, bh](typename Tape<T>::Node& nd) {
      auto& pi = nd.inputs[0];
      if (!pi->requires_grad) return;
      pi->ensure_grad();
      // d b_hat / d p = sigma'(z) / (lambda * p * (1-p))
      double d = bh * (1.0 - bh) / (lambda * p * (1.0 - p));
      pi->grad[flat_index] += nd.output->grad[0] * static_cast<T>(d);
    });
  }
  return out;
}

namespace policy_detail {

template <typename T>
std::vector<T> to_planar(const Image& img) {
  // (y,x,c) interleaved -> (c,y,x) planar, the tensor layout the nets use.
  std::vector<T> out(img.v.size());
  for (std::size_t ch = 0; ch < img.c; ++ch)
    for (std::size_t y = 0; y < img.h; ++y)
      for (std::size_t x = 0; x < img.w; ++x)
        out[(ch * img.h + y) * img.w + x] = static_cast<T>(img.at(y, x, ch));
  return out;
}

}  // namespace policy_detail

template <typename T>
struct SelectApplyResult {
  Image image;
  Tensor<T> pixels;  // [C,H,W]; carries straight-through grads in search mode
  int selected = 0;
  std::array<bool, 2> bits{false, false};
  std::array<double, 2> b_hat{0.0, 0.0};
};

/// Samples a sub-policy via Gumbel-max, applies it, and (in search mode)
/// wires the straight-through gradient routes:
///   dL/db_l    = <dL/dout, O(x_(l-1); m_l) - x_(l-1)>   (both branches kept)
///   dL/dm_l    = b_l * sum(dL/dout)                      (identity Jacobian)
///   dL/dsoft_s = <dL/dout, out> at the selected s only   (sparse route)
/// Slot parameters always come from the original input's params row.
template <typename T>
SelectApplyResult<T> select_and_apply(Tape<T>* tape, const Image& x, const Tensor<T>& alpha_row,
                                      const Tensor<T>& p_tensor, std::size_t row,
                                      const Tensor<T>& m_tensor, double tau, double lambda,
                                      RngStream& gumbel_rng, RngStream& bern_rng,
                                      std::uint64_t cutout_seed, PolicyMode mode) {
  const bool search = mode == PolicyMode::kSearch;
  Tape<T>* t = search ? tape : nullptr;

  auto gumbel = gumbel_softmax_sample(t, alpha_row, tau, gumbel_rng);
  const SubPolicy& sub = PolicySpace::get().at(gumbel.selected);
  const std::size_t cols = m_tensor->shape.size() == 2 ? m_tensor->shape[1] : m_tensor->numel();

  SelectApplyResult<T> res;
  res.selected = gumbel.selected;

  std::array<Tensor<T>, 2> b_hats;
  std::array<std::shared_ptr<std::vector<T>>, 2> diffs;
  Image cur = x;
  for (int slot = 0; slot < kSubPolicyLength; ++slot) {
    const std::size_t col = static_cast<std::size_t>(gumbel.selected) * 2 +
                            static_cast<std::size_t>(slot);
    const std::size_t flat = row * cols + col;
    auto bern = relaxed_bernoulli_sample(t, p_tensor, flat, lambda, bern_rng);
    res.bits[static_cast<std::size_t>(slot)] = bern.b;
    res.b_hat[static_cast<std::size_t>(slot)] = static_cast<double>(bern.b_hat->v[0]);
    b_hats[static_cast<std::size_t>(slot)] = bern.b_hat;

    const double mval = clamp_prob(static_cast<double>(m_tensor->v[flat]));
    if (search || bern.b) {
      RngStream cut = RngStream::derive(cutout_seed, static_cast<std::uint64_t>(slot) + 1);
      Image branch = apply_op(sub.ops[static_cast<std::size_t>(slot)], cur, mval, cut);
      if (search) {
        auto diff = std::make_shared<std::vector<T>>(policy_detail::to_planar<T>(branch));
        auto base = policy_detail::to_planar<T>(cur);
        for (std::size_t i = 0; i < diff->size(); ++i) (*diff)[i] -= base[i];
        diffs[static_cast<std::size_t>(slot)] = diff;
      }
      if (bern.b) cur = std::move(branch);
    }
  }
  res.image = cur;

  auto pixels = make_tensor<T>({x.c, x.h, x.w});
  {
    auto planar = policy_detail::to_planar<T>(cur);
    pixels->v = std::move(planar);
  }
  res.pixels = pixels;

  if (search && tape) {
    const std::size_t sel = static_cast<std::size_t>(gumbel.selected);
    const auto bits = res.bits;
    tape->record(
        {gumbel.soft, b_hats[0], b_hats[1], m_tensor}, pixels,
        [sel, bits, diffs, row, cols](typename Tape<T>::Node& nd) {
          auto& soft = nd.inputs[0];
          auto& m = nd.inputs[3];
          const T* gy = nd.output->grad.data();
          const std::size_t npix = nd.output->numel();
          if (soft->requires_grad) {
            soft->ensure_grad();
            T dot = 0;
            for (std::size_t i = 0; i < npix; ++i) dot += gy[i] * nd.output->v[i];
            soft->grad[sel] += dot;
          }
          T gsum = 0;
          for (std::size_t i = 0; i < npix; ++i) gsum += gy[i];
          for (int slot = 0; slot < 2; ++slot) {
            auto& bh = nd.inputs[static_cast<std::size_t>(1 + slot)];
            const auto& diff = diffs[static_cast<std::size_t>(slot)];
            if (bh->requires_grad && diff) {
              bh->ensure_grad();
              T dot = 0;
              for (std::size_t i = 0; i < npix; ++i) dot += gy[i] * (*diff)[i];
              bh->grad[0] += dot;
            }
            if (m->requires_grad && bits[static_cast<std::size_t>(slot)]) {
              m->ensure_grad();
              m->grad[row * cols + sel * 2 + static_cast<std::size_t>(slot)] += gsum;
            }
          }
        });
  }
  return res;
}

/// Test/frozen-path composition of one sub-policy from plain parameter
/// values; semantics match select_and_apply with the selection fixed.
inline Image apply_subpolicy(const SubPolicy& sub, const Image& x, const double p[2],
                             const double m[2], double lambda, RngStream& bern_rng,
                             std::uint64_t cutout_seed) {
  Image cur = x;
  for (int slot = 0; slot < kSubPolicyLength; ++slot) {
    double u = bern_rng.next_uniform();
    bool b = relaxed_bernoulli_value(p[slot], lambda, u) > 0.5;
    if (b) {
      RngStream cut = RngStream::derive(cutout_seed, static_cast<std::uint64_t>(slot) + 1);
      cur = apply_op(sub.ops[static_cast<std::size_t>(slot)], cur,
                     clamp_prob(m[slot]), cut);
    }
  }
  return cur;
}

}  // namespace dna

#endif  // DNA_POLICY_HPP_
