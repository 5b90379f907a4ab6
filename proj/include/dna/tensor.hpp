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

#ifndef DNA_TENSOR_HPP_
#define DNA_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dna/errors.hpp"

namespace dna {

// Reverse-mode autodiff over a flat tape. Tensors are shared handles; the
// tape owns nothing but the recorded backward closures. Templated on the
// scalar type: double for gradient-oracle tests, float for training.

template <typename T>
struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<T> v;
  bool requires_grad = false;
  // Set by Tape::backward, cleared by optimizer steps; guards "step before
  // backward" misuse.
  bool grad_ready = false;
  std::vector<T> grad;
  std::string name;

  std::size_t numel() const { return v.size(); }

  void ensure_grad() {
    if (grad.size() != v.size()) grad.assign(v.size(), T(0));
  }
  void zero_grad() {
    grad.assign(v.size(), T(0));
    grad_ready = false;
  }
};

template <typename T>
using Tensor = std::shared_ptr<TensorData<T>>;

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T> make_tensor(std::vector<std::size_t> shape, bool requires_grad = false,
                      std::string name = "") {
  auto t = std::make_shared<TensorData<T>>();
  t->shape = std::move(shape);
  t->v.assign(shape_numel(t->shape), T(0));
  t->requires_grad = requires_grad;
  t->name = std::move(name);
  if (requires_grad) t->ensure_grad();
  return t;
}

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
void check_finite(const char* primitive, const Tensor<T>& t) {
  for (T x : t->v) {
    if (!std::isfinite(static_cast<double>(x)))
      throw NumericError(std::string(primitive) + ": non-finite input value");
  }
}

template <typename T>
class Tape {
 public:
  struct Node {
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void(Node&)> backward;
  };

  /// Records a primitive application if any input participates in gradients.
  /// Returns true when recorded; the output then carries a grad buffer.
  bool record(std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void(Node&)> backward) {
    bool any = false;
    for (const auto& in : inputs)
      if (in && in->requires_grad) any = true;
    if (!any) return false;
    output->requires_grad = true;
    output->ensure_grad();
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward)});
    return true;
  }

  void backward(const Tensor<T>& loss) {
    if (loss->numel() != 1) throw ContractError("backward: loss must be a scalar");
    if (!loss->requires_grad) throw ContractError("backward: loss is not on the tape");
    loss->ensure_grad();
    loss->grad[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward(*it);
    for (auto& node : nodes_) {
      for (auto& in : node.inputs)
        if (in && in->requires_grad) in->grad_ready = true;
      node.output->grad_ready = true;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<Node> nodes_;
};

namespace detail {

template <typename T>
void accum(Tensor<T>& t, std::size_t i, T g) {
  if (t->requires_grad) {
    t->ensure_grad();
    t->grad[i] += g;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives. `tape == nullptr` means pure inference (nothing recorded).
// ---------------------------------------------------------------------------

/// y[N,Out] = x[N,In] * w[In,Out] + b[Out]
template <typename T>
Tensor<T> dense(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x->shape.size() != 2 || w->shape.size() != 2 || b->shape.size() != 1 ||
      x->shape[1] != w->shape[0] || w->shape[1] != b->shape[0])
    throw ShapeError("dense: x" + shape_str(x->shape) + " w" + shape_str(w->shape) + " b" +
                     shape_str(b->shape));
  check_finite("dense", x);
  check_finite("dense", w);
  const std::size_t n = x->shape[0], in = x->shape[1], out = w->shape[1];
  auto y = make_tensor<T>({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    T* yrow = y->v.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) yrow[o] = b->v[o];
    const T* xrow = x->v.data() + i * in;
    for (std::size_t k = 0; k < in; ++k) {
      T xv = xrow[k];
      const T* wrow = w->v.data() + k * out;
      for (std::size_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
    }
  }
  if (tape) {
    tape->record({x, w, b}, y, [n, in, out](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      auto& wi = nd.inputs[1];
      auto& bi = nd.inputs[2];
      const T* gy = nd.output->grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < in; ++k) {
            T acc = 0;
            const T* wrow = wi->v.data() + k * out;
            const T* gyrow = gy + i * out;
            for (std::size_t o = 0; o < out; ++o) acc += gyrow[o] * wrow[o];
            xi->grad[i * in + k] += acc;
          }
      }
      if (wi->requires_grad) {
        wi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
          const T* xrow = xi->v.data() + i * in;
          const T* gyrow = gy + i * out;
          for (std::size_t k = 0; k < in; ++k) {
            T xv = xrow[k];
            T* gwrow = wi->grad.data() + k * out;
            for (std::size_t o = 0; o < out; ++o) gwrow[o] += xv * gyrow[o];
          }
        }
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t o = 0; o < out; ++o) bi->grad[o] += gy[i * out + o];
      }
    });
  }
  return y;
}

/// Zero-padded square convolution, stride 1 or 2, odd kernel.
/// x[N,C,H,W], w[OC,C,K,K], b[OC] -> y[N,OC,OH,OW]
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                 std::size_t stride) {
  if (x->shape.size() != 4 || w->shape.size() != 4 || b->shape.size() != 1)
    throw ShapeError("conv2d: x" + shape_str(x->shape) + " w" + shape_str(w->shape));
  if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
  const std::size_t n = x->shape[0], c = x->shape[1], h = x->shape[2], wd = x->shape[3];
  const std::size_t oc = w->shape[0], k = w->shape[2];
  if (w->shape[1] != c || w->shape[3] != k || k % 2 == 0 || b->shape[0] != oc)
    throw ShapeError("conv2d: x" + shape_str(x->shape) + " w" + shape_str(w->shape) + " b" +
                     shape_str(b->shape));
  check_finite("conv2d", x);
  check_finite("conv2d", w);
  const std::size_t pad = k / 2;
  const std::size_t oh = (h - 1) / stride + 1, ow = (wd - 1) / stride + 1;
  auto y = make_tensor<T>({n, oc, oh, ow});

  auto fwd = [&](std::size_t ni) {
    const T* xn = x->v.data() + ni * c * h * wd;
    T* yn = y->v.data() + ni * oc * oh * ow;
    for (std::size_t o = 0; o < oc; ++o) {
      T* yplane = yn + o * oh * ow;
      for (std::size_t i = 0; i < oh * ow; ++i) yplane[i] = b->v[o];
      for (std::size_t ci = 0; ci < c; ++ci) {
        const T* xplane = xn + ci * h * wd;
        const T* wk = w->v.data() + (o * c + ci) * k * k;
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx) {
            T wv = wk[ky * k + kx];
            for (std::size_t oy = 0; oy < oh; ++oy) {
              std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
              T* yrow = yplane + oy * ow;
              const T* xrow = xplane + iy * wd;
              for (std::size_t ox = 0; ox < ow; ++ox) {
                std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                yrow[ox] += wv * xrow[ix];
              }
            }
          }
      }
    }
  };
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::ptrdiff_t ni = 0; ni < static_cast<std::ptrdiff_t>(n); ++ni)
    fwd(static_cast<std::size_t>(ni));

  if (tape) {
    tape->record({x, w, b}, y, [n, c, h, wd, oc, k, pad, oh, ow,
                                stride](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      auto& wi = nd.inputs[1];
      auto& bi = nd.inputs[2];
      const T* gy = nd.output->grad.data();
      if (xi->requires_grad) {
        xi->ensure_grad();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t nis = 0; nis < static_cast<std::ptrdiff_t>(n); ++nis) {
          std::size_t ni = static_cast<std::size_t>(nis);
          T* gxn = xi->grad.data() + ni * c * h * wd;
          const T* gyn = gy + ni * oc * oh * ow;
          for (std::size_t o = 0; o < oc; ++o) {
            const T* gyplane = gyn + o * oh * ow;
            for (std::size_t ci = 0; ci < c; ++ci) {
              T* gxplane = gxn + ci * h * wd;
              const T* wk = wi->v.data() + (o * c + ci) * k * k;
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  T wv = wk[ky * k + kx];
                  for (std::size_t oy = 0; oy < oh; ++oy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* gyrow = gyplane + oy * ow;
                    T* gxrow = gxplane + iy * wd;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                      std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                          static_cast<std::ptrdiff_t>(pad);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                      gxrow[ix] += wv * gyrow[ox];
                    }
                  }
                }
            }
          }
        }
      }
      if (wi->requires_grad || bi->requires_grad) {
        wi->ensure_grad();
        bi->ensure_grad();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::ptrdiff_t os = 0; os < static_cast<std::ptrdiff_t>(oc); ++os) {
          std::size_t o = static_cast<std::size_t>(os);
          for (std::size_t ni = 0; ni < n; ++ni) {
            const T* gyplane = gy + (ni * oc + o) * oh * ow;
            if (bi->requires_grad)
              for (std::size_t i = 0; i < oh * ow; ++i) bi->grad[o] += gyplane[i];
            if (!wi->requires_grad) continue;
            const T* xn = xi->v.data() + ni * c * h * wd;
            for (std::size_t ci = 0; ci < c; ++ci) {
              const T* xplane = xn + ci * h * wd;
              T* gwk = wi->grad.data() + (o * c + ci) * k * k;
              for (std::size_t ky = 0; ky < k; ++ky)
                for (std::size_t kx = 0; kx < k; ++kx) {
                  T acc = 0;
                  for (std::size_t oy = 0; oy < oh; ++oy) {
                    std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    const T* gyrow = gyplane + oy * ow;
                    const T* xrow = xplane + iy * wd;
                    for (std::size_t ox = 0; ox < ow; ++ox) {
                      std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                          static_cast<std::ptrdiff_t>(pad);
                      if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(wd)) continue;
                      acc += gyrow[ox] * xrow[ix];
                    }
                  }
                  gwk[ky * k + kx] += acc;
                }
            }
          }
        }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> relu(Tape<T>* tape, const Tensor<T>& x) {
  check_finite("relu", x);
  auto y = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < x->numel(); ++i) y->v[i] = x->v[i] > T(0) ? x->v[i] : T(0);
  if (tape) {
    tape->record({x}, y, [](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->numel(); ++i)
        if (xi->v[i] > T(0)) xi->grad[i] += nd.output->grad[i];
    });
  }
  return y;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
  check_finite("sigmoid", x);
  auto y = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < x->numel(); ++i)
    y->v[i] = T(1) / (T(1) + std::exp(-x->v[i]));
  if (tape) {
    tape->record({x}, y, [](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->numel(); ++i) {
        T s = nd.output->v[i];
        xi->grad[i] += nd.output->grad[i] * s * (T(1) - s);
      }
    });
  }
  return y;
}

/// Row-wise softmax over the last axis of a 2-D tensor.
template <typename T>
Tensor<T> softmax(Tape<T>* tape, const Tensor<T>& x) {
  if (x->shape.size() != 2) throw ShapeError("softmax: expected [N,K], got " + shape_str(x->shape));
  check_finite("softmax", x);
  const std::size_t n = x->shape[0], k = x->shape[1];
  auto y = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x->v.data() + i * k;
    T* out = y->v.data() + i * k;
    T mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(row[j] - mx);
      sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
  }
  if (tape) {
    tape->record({x}, y, [n, k](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        const T* s = nd.output->v.data() + i * k;
        const T* gy = nd.output->grad.data() + i * k;
        T dot = 0;
        for (std::size_t j = 0; j < k; ++j) dot += s[j] * gy[j];
        for (std::size_t j = 0; j < k; ++j) xi->grad[i * k + j] += s[j] * (gy[j] - dot);
      }
    });
  }
  return y;
}

/// Reshape preserving element count; backward is an index-identical copy.
template <typename T>
Tensor<T> reshape(Tape<T>* tape, const Tensor<T>& x, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != x->numel())
    throw ShapeError("reshape: " + shape_str(x->shape) + " -> " + shape_str(shape));
  auto y = make_tensor<T>(std::move(shape));
  y->v = x->v;
  if (tape) {
    tape->record({x}, y, [](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->numel(); ++i) xi->grad[i] += nd.output->grad[i];
    });
  }
  return y;
}

/// [N, ...] -> [N, prod(rest)]
template <typename T>
Tensor<T> flatten(Tape<T>* tape, const Tensor<T>& x) {
  if (x->shape.empty()) throw ShapeError("flatten: scalar input");
  return reshape(tape, x, {x->shape[0], x->numel() / x->shape[0]});
}

/// 2x2 average pooling with stride 2; spatial dims must be even.
template <typename T>
Tensor<T> avg_pool(Tape<T>* tape, const Tensor<T>& x) {
  if (x->shape.size() != 4 || x->shape[2] % 2 || x->shape[3] % 2)
    throw ShapeError("avg_pool: expected [N,C,2h,2w], got " + shape_str(x->shape));
  check_finite("avg_pool", x);
  const std::size_t n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
  const std::size_t oh = h / 2, ow = w / 2;
  auto y = make_tensor<T>({n, c, oh, ow});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* xp = x->v.data() + p * h * w;
    T* yp = y->v.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        yp[oy * ow + ox] = (xp[(2 * oy) * w + 2 * ox] + xp[(2 * oy) * w + 2 * ox + 1] +
                            xp[(2 * oy + 1) * w + 2 * ox] + xp[(2 * oy + 1) * w + 2 * ox + 1]) /
                           T(4);
  }
  if (tape) {
    tape->record({x}, y, [n, c, h, w, oh, ow](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t p = 0; p < n * c; ++p) {
        T* gxp = xi->grad.data() + p * h * w;
        const T* gyp = nd.output->grad.data() + p * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            T g = gyp[oy * ow + ox] / T(4);
            gxp[(2 * oy) * w + 2 * ox] += g;
            gxp[(2 * oy) * w + 2 * ox + 1] += g;
            gxp[(2 * oy + 1) * w + 2 * ox] += g;
            gxp[(2 * oy + 1) * w + 2 * ox + 1] += g;
          }
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a->shape != b->shape)
    throw ShapeError("add: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  check_finite("add", a);
  check_finite("add", b);
  auto y = make_tensor<T>(a->shape);
  for (std::size_t i = 0; i < a->numel(); ++i) y->v[i] = a->v[i] + b->v[i];
  if (tape) {
    tape->record({a, b}, y, [](typename Tape<T>::Node& nd) {
      for (auto& in : nd.inputs) {
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (std::size_t i = 0; i < in->numel(); ++i) in->grad[i] += nd.output->grad[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> mul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a->shape != b->shape)
    throw ShapeError("mul: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  check_finite("mul", a);
  check_finite("mul", b);
  auto y = make_tensor<T>(a->shape);
  for (std::size_t i = 0; i < a->numel(); ++i) y->v[i] = a->v[i] * b->v[i];
  if (tape) {
    tape->record({a, b}, y, [](typename Tape<T>::Node& nd) {
      auto& ai = nd.inputs[0];
      auto& bi = nd.inputs[1];
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < ai->numel(); ++i)
          ai->grad[i] += nd.output->grad[i] * bi->v[i];
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < bi->numel(); ++i)
          bi->grad[i] += nd.output->grad[i] * ai->v[i];
      }
    });
  }
  return y;
}

template <typename T>
Tensor<T> sum(Tape<T>* tape, const Tensor<T>& x) {
  check_finite("sum", x);
  auto y = make_tensor<T>({1});
  T acc = 0;
  for (T v : x->v) acc += v;
  y->v[0] = acc;
  if (tape) {
    tape->record({x}, y, [](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      T g = nd.output->grad[0];
      for (std::size_t i = 0; i < xi->numel(); ++i) xi->grad[i] += g;
    });
  }
  return y;
}

/// Mean softmax cross-entropy. logits[N,K], labels in [0,K).
template <typename T>
Tensor<T> cross_entropy(Tape<T>* tape, const Tensor<T>& logits,
                        const std::vector<int>& labels) {
  if (logits->shape.size() != 2 || logits->shape[0] != labels.size())
    throw ShapeError("cross_entropy: logits " + shape_str(logits->shape) + " vs " +
                     std::to_string(labels.size()) + " labels");
  check_finite("cross_entropy", logits);
  const std::size_t n = logits->shape[0], k = logits->shape[1];
  auto probs = std::make_shared<std::vector<T>>(n * k);
  auto y = make_tensor<T>({1});
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k)
      throw ShapeError("cross_entropy: label out of range");
    const T* row = logits->v.data() + i * k;
    T* p = probs->data() + i * k;
    T mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(row[j] - mx);
      sum += p[j];
    }
    for (std::size_t j = 0; j < k; ++j) p[j] /= sum;
    total -= std::log(p[static_cast<std::size_t>(labels[i])]);
  }
  y->v[0] = total / static_cast<T>(n);
  if (tape) {
    tape->record({logits}, y, [probs, labels, n, k](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      T g = nd.output->grad[0] / static_cast<T>(n);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          T d = (*probs)[i * k + j] -
                (static_cast<std::size_t>(labels[i]) == j ? T(1) : T(0));
          xi->grad[i * k + j] += g * d;
        }
    });
  }
  return y;
}

/// Copies row i of a [N,D] tensor into a [D] tensor; grads scatter back.
template <typename T>
Tensor<T> row_slice(Tape<T>* tape, const Tensor<T>& x, std::size_t row) {
  if (x->shape.size() != 2 || row >= x->shape[0])
    throw ShapeError("row_slice: row " + std::to_string(row) + " of " + shape_str(x->shape));
  const std::size_t d = x->shape[1];
  auto y = make_tensor<T>({d});
  std::copy(x->v.begin() + row * d, x->v.begin() + (row + 1) * d, y->v.begin());
  if (tape) {
    tape->record({x}, y, [row, d](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t j = 0; j < d; ++j) xi->grad[row * d + j] += nd.output->grad[j];
    });
  }
  return y;
}

/// Column range [start, start+len) of a [N,D] tensor -> [N,len].
template <typename T>
Tensor<T> col_slice(Tape<T>* tape, const Tensor<T>& x, std::size_t start, std::size_t len) {
  if (x->shape.size() != 2 || start + len > x->shape[1])
    throw ShapeError("col_slice: [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") of " + shape_str(x->shape));
  const std::size_t n = x->shape[0], d = x->shape[1];
  auto y = make_tensor<T>({n, len});
  for (std::size_t i = 0; i < n; ++i)
    std::copy(x->v.begin() + i * d + start, x->v.begin() + i * d + start + len,
              y->v.begin() + i * len);
  if (tape) {
    tape->record({x}, y, [n, d, start, len](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < len; ++j)
          xi->grad[i * d + start + j] += nd.output->grad[i * len + j];
    });
  }
  return y;
}

/// Stacks equal-shape tensors along a new leading axis.
template <typename T>
Tensor<T> stack_rows(Tape<T>* tape, const std::vector<Tensor<T>>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: empty input");
  const std::size_t d = rows[0]->numel();
  for (const auto& r : rows)
    if (r->numel() != d) throw ShapeError("stack_rows: ragged inputs");
  std::vector<std::size_t> shape{rows.size()};
  for (std::size_t s : rows[0]->shape) shape.push_back(s);
  auto y = make_tensor<T>(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i]->v.begin(), rows[i]->v.end(), y->v.begin() + i * d);
  if (tape) {
    tape->record({rows.begin(), rows.end()}, y, [d](typename Tape<T>::Node& nd) {
      for (std::size_t i = 0; i < nd.inputs.size(); ++i) {
        auto& in = nd.inputs[i];
        if (!in->requires_grad) continue;
        in->ensure_grad();
        for (std::size_t j = 0; j < d; ++j) in->grad[j] += nd.output->grad[i * d + j];
      }
    });
  }
  return y;
}

/// out = mask * x + (1 - mask) * fill; linear in x, used for the terminal
/// Cutout inside the differentiable path.
template <typename T>
Tensor<T> affine_mask(Tape<T>* tape, const Tensor<T>& x, std::shared_ptr<std::vector<T>> mask,
                      T fill) {
  if (mask->size() != x->numel()) throw ShapeError("affine_mask: mask size mismatch");
  auto y = make_tensor<T>(x->shape);
  for (std::size_t i = 0; i < x->numel(); ++i)
    y->v[i] = (*mask)[i] * x->v[i] + (T(1) - (*mask)[i]) * fill;
  if (tape) {
    tape->record({x}, y, [mask](typename Tape<T>::Node& nd) {
      auto& xi = nd.inputs[0];
      if (!xi->requires_grad) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->numel(); ++i)
        xi->grad[i] += nd.output->grad[i] * (*mask)[i];
    });
  }
  return y;
}

}  // namespace dna

#endif  // DNA_TENSOR_HPP_
