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

#ifndef DNA_OPTIM_HPP_
#define DNA_OPTIM_HPP_

#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "dna/errors.hpp"
#include "dna/tensor.hpp"

namespace dna {

template <typename T>
struct LrSchedule {
  enum class Kind { kConstant, kCosine };
  Kind kind = Kind::kConstant;
  T initial = T(0);
  std::size_t total_steps = 0;

  static LrSchedule constant(T lr) { return {Kind::kConstant, lr, 0}; }
  static LrSchedule cosine(T lr, std::size_t total) { return {Kind::kCosine, lr, total}; }

  /// Rate at step t; cosine anneals from `initial` to 0 over `total_steps`.
  T at(std::size_t t) const {
    if (kind == Kind::kConstant) return initial;
    if (total_steps == 0) return initial;
    double frac = static_cast<double>(t) / static_cast<double>(total_steps);
    if (frac > 1.0) frac = 1.0;
    return static_cast<T>(initial * T(0.5) *
                          static_cast<T>(1.0 + std::cos(3.14159265358979323846 * frac)));
  }
};

namespace detail {

template <typename T>
void require_grads(const std::vector<Tensor<T>>& params, const char* who) {
  bool any = false;
  for (const auto& p : params)
    if (p->grad_ready) any = true;
  if (!any) throw ContractError(std::string(who) + ": step before backward");
}

}  // namespace detail

/// SGD with classical or Nesterov momentum. Weight decay is applied as an
/// L2 gradient term, grad += wd * param.
template <typename T>
class SgdOptimizer {
 public:
  SgdOptimizer(T momentum, T weight_decay, bool nesterov)
      : momentum_(momentum), weight_decay_(weight_decay), nesterov_(nesterov) {}

  void step(const std::vector<Tensor<T>>& params, T lr) {
    detail::require_grads(params, "sgd");
    ++step_count_;
    for (const auto& p : params) {
      p->ensure_grad();
      auto& vel = velocity_[p.get()];
      if (vel.size() != p->numel()) vel.assign(p->numel(), T(0));
      for (std::size_t i = 0; i < p->numel(); ++i) {
        T g = p->grad[i] + weight_decay_ * p->v[i];
        vel[i] = momentum_ * vel[i] + g;
        T update = nesterov_ ? g + momentum_ * vel[i] : vel[i];
        p->v[i] -= lr * update;
      }
      p->zero_grad();
    }
  }

  std::size_t step_count() const { return step_count_; }

 private:
  T momentum_;
  T weight_decay_;
  bool nesterov_;
  std::size_t step_count_ = 0;
  std::unordered_map<TensorData<T>*, std::vector<T>> velocity_;
};

/// Adam with bias correction.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(T beta1, T beta2, T weight_decay, T eps = T(1e-8))
      : beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

  void step(const std::vector<Tensor<T>>& params, T lr) {
    detail::require_grads(params, "adam");
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const T bc1 = static_cast<T>(1.0 - std::pow(static_cast<double>(beta1_), t));
    const T bc2 = static_cast<T>(1.0 - std::pow(static_cast<double>(beta2_), t));
    for (const auto& p : params) {
      p->ensure_grad();
      auto& st = state_[p.get()];
      if (st.m.size() != p->numel()) {
        st.m.assign(p->numel(), T(0));
        st.v.assign(p->numel(), T(0));
      }
      for (std::size_t i = 0; i < p->numel(); ++i) {
        T g = p->grad[i] + weight_decay_ * p->v[i];
        st.m[i] = beta1_ * st.m[i] + (T(1) - beta1_) * g;
        st.v[i] = beta2_ * st.v[i] + (T(1) - beta2_) * g * g;
        T mhat = st.m[i] / bc1;
        T vhat = st.v[i] / bc2;
        p->v[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
      p->zero_grad();
    }
  }

  std::size_t step_count() const { return step_count_; }

 private:
  struct Moments {
    std::vector<T> m, v;
  };
  T beta1_, beta2_, weight_decay_, eps_;
  std::size_t step_count_ = 0;
  std::unordered_map<TensorData<T>*, Moments> state_;
};

}  // namespace dna

#endif  // DNA_OPTIM_HPP_
