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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "dna/optim.hpp"
#include "dna/rng.hpp"
#include "dna/tensor.hpp"

namespace {

using dna::make_tensor;
using dna::Tape;
using dna::Tensor;

// Central-difference gradient oracle at double precision. `fwd` must build
// the scalar loss from the current values of `inputs`; with a null tape it
// runs forward-only.
void check_gradients(const std::vector<Tensor<double>>& inputs,
                     const std::function<Tensor<double>(Tape<double>*)>& fwd, double h = 1e-5,
                     double tol = 1e-4) {
  Tape<double> tape;
  auto loss = fwd(&tape);
  tape.backward(loss);
  for (const auto& in : inputs) {
    REQUIRE(in->grad.size() == in->numel());
    for (std::size_t i = 0; i < in->numel(); ++i) {
      double orig = in->v[i];
      in->v[i] = orig + h;
      double lp = fwd(nullptr)->v[0];
      in->v[i] = orig - h;
      double lm = fwd(nullptr)->v[0];
      in->v[i] = orig;
      double fd = (lp - lm) / (2.0 * h);
      double an = in->grad[i];
      double scale = std::max({1.0, std::fabs(fd), std::fabs(an)});
      CHECK(std::fabs(fd - an) <= tol * scale);
    }
  }
}

Tensor<double> random_tensor(std::vector<std::size_t> shape, std::uint64_t seed,
                             double scale = 1.0, bool grad = true) {
  auto t = make_tensor<double>(std::move(shape), grad);
  dna::RngStream rng(seed);
  for (auto& v : t->v) v = scale * (rng.next_uniform() - 0.5);
  return t;
}

}  // namespace

TEST_CASE("dense + relu + sum gradients match finite differences") {
  auto x = random_tensor({3, 4}, 1);
  auto w = random_tensor({4, 5}, 2);
  auto b = random_tensor({5}, 3);
  check_gradients({x, w, b}, [&](Tape<double>* t) {
    return dna::sum(t, dna::relu(t, dna::dense(t, x, w, b)));
  });
}

TEST_CASE("conv2d stride-1 gradients match finite differences") {
  auto x = random_tensor({2, 2, 5, 4}, 4);
  auto w = random_tensor({3, 2, 3, 3}, 5);
  auto b = random_tensor({3}, 6);
  check_gradients({x, w, b}, [&](Tape<double>* t) {
    return dna::sum(t, dna::relu(t, dna::conv2d(t, x, w, b, 1)));
  });
}

TEST_CASE("conv2d stride-2 gradients match finite differences") {
  auto x = random_tensor({1, 2, 5, 5}, 7);
  auto w = random_tensor({2, 2, 3, 3}, 8);
  auto b = random_tensor({2}, 9);
  check_gradients({x, w, b}, [&](Tape<double>* t) {
    return dna::sum(t, dna::conv2d(t, x, w, b, 2));
  });
}

TEST_CASE("sigmoid / softmax / avg_pool / mul / add gradients") {
  auto x = random_tensor({2, 2, 4, 4}, 10);
  auto y = random_tensor({2, 2, 4, 4}, 11);
  check_gradients({x, y}, [&](Tape<double>* t) {
    auto pooled = dna::avg_pool(t, dna::mul(t, dna::sigmoid(t, x), dna::add(t, x, y)));
    auto flat = dna::flatten(t, pooled);
    return dna::sum(t, dna::softmax(t, flat));
  });
}

TEST_CASE("cross_entropy reference value") {
  // softmax([ln 2, 0]) = (2/3, 1/3); -log(2/3) for label 0.
  auto logits = make_tensor<double>({1, 2});
  logits->v = {std::log(2.0), 0.0};
  Tape<double> tape;
  auto loss = dna::cross_entropy(&tape, logits, std::vector<int>{0});
  CHECK(loss->v[0] == doctest::Approx(-std::log(2.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("cross_entropy gradients match finite differences") {
  auto logits = random_tensor({4, 6}, 12, 3.0);
  std::vector<int> labels = {0, 5, 2, 2};
  check_gradients({logits}, [&](Tape<double>* t) {
    return dna::cross_entropy(t, logits, labels);
  });
}

TEST_CASE("cross_entropy is shift invariant and stable for large logits") {
  auto a = make_tensor<double>({1, 3});
  a->v = {1000.0, 1001.0, 999.0};
  auto b = make_tensor<double>({1, 3});
  b->v = {0.0, 1.0, -1.0};
  auto la = dna::cross_entropy<double>(nullptr, a, std::vector<int>{1});
  auto lb = dna::cross_entropy<double>(nullptr, b, std::vector<int>{1});
  CHECK(std::isfinite(la->v[0]));
  CHECK(la->v[0] == doctest::Approx(lb->v[0]).epsilon(1e-9));
}

TEST_CASE("slicing and stacking gradients") {
  auto x = random_tensor({3, 8}, 13);
  check_gradients({x}, [&](Tape<double>* t) {
    std::vector<Tensor<double>> rows;
    for (std::size_t i = 0; i < 3; ++i)
      rows.push_back(dna::row_slice(t, dna::col_slice(t, x, 2, 5), i));
    auto stacked = dna::stack_rows(t, rows);
    return dna::sum(t, dna::mul(t, stacked, stacked));
  });
}

TEST_CASE("affine_mask forward and gradient") {
  auto x = random_tensor({6}, 14);
  auto mask = std::make_shared<std::vector<double>>(std::vector<double>{1, 0, 1, 0, 1, 1});
  {
    auto y = dna::affine_mask<double>(nullptr, x, mask, 0.5);
    for (std::size_t i = 0; i < 6; ++i)
      CHECK(y->v[i] == doctest::Approx((*mask)[i] ? x->v[i] : 0.5));
  }
  check_gradients({x}, [&](Tape<double>* t) {
    return dna::sum(t, dna::mul(t, dna::affine_mask(t, x, mask, 0.5),
                                dna::affine_mask(t, x, mask, 0.5)));
  });
}

TEST_CASE("shape violations throw ShapeError") {
  auto x = make_tensor<double>({2, 3});
  auto w = make_tensor<double>({4, 5});
  auto b = make_tensor<double>({5});
  CHECK_THROWS_AS(dna::dense<double>(nullptr, x, w, b), dna::ShapeError);
  auto img = make_tensor<double>({1, 1, 5, 5});
  CHECK_THROWS_AS(dna::avg_pool<double>(nullptr, img), dna::ShapeError);
  auto k4 = make_tensor<double>({1, 1, 4, 4});
  auto bb = make_tensor<double>({1});
  CHECK_THROWS_AS(dna::conv2d<double>(nullptr, img, k4, bb, 1), dna::ShapeError);
  CHECK_THROWS_AS(dna::reshape<double>(nullptr, x, {7}), dna::ShapeError);
  CHECK_THROWS_AS(dna::row_slice<double>(nullptr, x, 2), dna::ShapeError);
  CHECK_THROWS_AS(dna::col_slice<double>(nullptr, x, 2, 2), dna::ShapeError);
}

TEST_CASE("non-finite inputs are rejected") {
  auto x = make_tensor<double>({2});
  x->v = {1.0, std::nan("")};
  CHECK_THROWS_AS(dna::relu<double>(nullptr, x), dna::NumericError);
}

TEST_CASE("backward requires a recorded scalar loss") {
  Tape<double> tape;
  auto x = make_tensor<double>({2, 2}, true);
  CHECK_THROWS_AS(tape.backward(x), dna::ContractError);
}

TEST_CASE("optimizer step before backward throws") {
  auto w = make_tensor<double>({3}, true);
  dna::SgdOptimizer<double> sgd(0.9, 0.0, false);
  CHECK_THROWS_AS(sgd.step({w}, 0.1), dna::ContractError);
  dna::AdamOptimizer<double> adam(0.5, 0.999, 0.0);
  CHECK_THROWS_AS(adam.step({w}, 0.1), dna::ContractError);
}

TEST_CASE("Adam first step moves each weight by ~lr") {
  // With zero state, m-hat = g and v-hat = g^2, so |step| = lr*|g|/(|g|+eps).
  auto w = make_tensor<double>({3}, true);
  w->v = {1.0, -2.0, 3.0};
  dna::AdamOptimizer<double> adam(0.5, 0.999, 0.0);
  Tape<double> tape;
  auto loss = dna::sum(&tape, dna::mul(&tape, w, w));  // grad = 2w
  tape.backward(loss);
  std::vector<double> before = w->v;
  std::vector<double> grads = {2.0, -4.0, 6.0};
  adam.step({w}, 0.01);
  for (std::size_t i = 0; i < 3; ++i) {
    double expect = 0.01 * grads[i] / (std::fabs(grads[i]) + 1e-8);
    CHECK(before[i] - w->v[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("SGD momentum recurrences: classical and Nesterov") {
  auto run = [](bool nesterov) {
    auto w = make_tensor<double>({1}, true);
    w->v = {1.0};
    dna::SgdOptimizer<double> sgd(0.9, 0.0, nesterov);
    std::vector<double> history;
    double vel = 0.0, wv = 1.0;
    for (int s = 0; s < 3; ++s) {
      Tape<double> tape;
      auto loss = dna::sum(&tape, dna::mul(&tape, w, w));
      tape.backward(loss);
      sgd.step({w}, 0.1);
      double g = 2.0 * wv;
      vel = 0.9 * vel + g;
      wv -= 0.1 * (nesterov ? g + 0.9 * vel : vel);
      history.push_back(wv);
      CHECK(w->v[0] == doctest::Approx(wv).epsilon(1e-12));
    }
    return history;
  };
  auto classical = run(false);
  auto nesterov = run(true);
  CHECK(classical[2] != nesterov[2]);
}

TEST_CASE("weight decay adds wd * param to the gradient") {
  auto w = make_tensor<double>({1}, true);
  w->v = {2.0};
  dna::SgdOptimizer<double> sgd(0.0, 0.5, false);
  Tape<double> tape;
  auto loss = dna::sum(&tape, w);  // grad = 1
  tape.backward(loss);
  sgd.step({w}, 0.1);
  CHECK(w->v[0] == doctest::Approx(2.0 - 0.1 * (1.0 + 0.5 * 2.0)).epsilon(1e-12));
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  auto sched = dna::LrSchedule<double>::cosine(0.1, 100);
  CHECK(sched.at(0) == doctest::Approx(0.1));
  CHECK(sched.at(50) == doctest::Approx(0.05));
  CHECK(sched.at(100) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(sched.at(200) == doctest::Approx(0.0).epsilon(1e-12));
  auto flat = dna::LrSchedule<double>::constant(0.3);
  CHECK(flat.at(12345) == doctest::Approx(0.3));
}

TEST_CASE("SGD drives a convex quadratic to a tiny gradient") {
  auto w = random_tensor({8}, 21, 2.0);
  auto target = random_tensor({8}, 22, 2.0, false);
  auto neg = make_tensor<double>({8});
  for (std::size_t i = 0; i < 8; ++i) neg->v[i] = -target->v[i];
  dna::SgdOptimizer<double> sgd(0.9, 0.0, false);
  double gnorm = 1.0;
  for (int s = 0; s < 10000 && gnorm >= 1e-6; ++s) {
    Tape<double> tape;
    auto diff = dna::add(&tape, w, neg);
    auto loss = dna::sum(&tape, dna::mul(&tape, diff, diff));
    tape.backward(loss);
    gnorm = 0;
    for (double g : w->grad) gnorm += g * g;
    gnorm = std::sqrt(gnorm);
    sgd.step({w}, 0.05);
  }
  CHECK(gnorm < 1e-6);
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(w->v[i] == doctest::Approx(target->v[i]).epsilon(1e-5));
}

TEST_CASE("forward and backward are bit-deterministic across runs") {
  auto run = [] {
    auto x = random_tensor({2, 3, 8, 8}, 31);
    auto w = random_tensor({4, 3, 3, 3}, 32, 0.3);
    auto b = random_tensor({4}, 33, 0.1);
    Tape<double> tape;
    auto loss = dna::cross_entropy(
        &tape, dna::flatten(&tape, dna::avg_pool(&tape, dna::conv2d(&tape, x, w, b, 1))),
        std::vector<int>{1, 0});
    tape.backward(loss);
    std::vector<double> out = {loss->v[0]};
    out.insert(out.end(), w->grad.begin(), w->grad.end());
    return out;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}
