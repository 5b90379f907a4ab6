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
#include <filesystem>

#include "dna/checkpoint.hpp"
#include "dna/nets.hpp"
#include "dna/rng.hpp"
#include "dna/tensor.hpp"

namespace {

using dna::make_tensor;
using dna::NetConfig;
using dna::Network;
using dna::Tape;
using dna::Tensor;

NetConfig small_config(std::size_t out_dim) {
  NetConfig cfg;
  cfg.in_h = 8;
  cfg.in_w = 8;
  cfg.in_c = 3;
  cfg.blocks = {{4, 3, 1, true}, {6, 3, 1, true}};
  cfg.out_dim = out_dim;
  return cfg;
}

Tensor<double> random_input(std::vector<std::size_t> shape, std::uint64_t seed) {
  auto x = make_tensor<double>(std::move(shape));
  dna::RngStream rng(seed);
  for (auto& v : x->v) v = rng.next_uniform();
  return x;
}

}  // namespace

TEST_CASE("config validation rejects impossible chains") {
  NetConfig bad = small_config(10);
  bad.blocks[0].kernel = 4;
  CHECK_THROWS_AS(bad.flat_dim(), dna::ShapeError);
  NetConfig odd = small_config(10);
  odd.in_h = 7;  // pooling needs even dims
  CHECK_THROWS_AS(odd.flat_dim(), dna::ShapeError);
  NetConfig ok = small_config(10);
  CHECK(ok.flat_dim() == 2 * 2 * 6);
}

TEST_CASE("initialization is deterministic, He-scaled, zero-bias") {
  Network<double> a(small_config(10)), b(small_config(10));
  a.init(123);
  b.init(123);
  for (std::size_t i = 0; i < a.params().size(); ++i)
    CHECK(a.params()[i]->v == b.params()[i]->v);
  Network<double> c(small_config(10));
  c.init(124);
  CHECK(a.params()[0]->v != c.params()[0]->v);

  // Variance of conv1 weights approximately 2 / fan_in.
  NetConfig wide = small_config(10);
  wide.blocks[0].out_channels = 64;
  Network<double> w(wide);
  w.init(9);
  const auto& t = w.params()[0];  // [64, 3, 3, 3]
  double fan_in = 3.0 * 3.0 * 3.0;
  double mean = 0, var = 0;
  for (double v : t->v) mean += v;
  mean /= static_cast<double>(t->numel());
  for (double v : t->v) var += (v - mean) * (v - mean);
  var /= static_cast<double>(t->numel());
  CHECK(std::fabs(mean) < 0.02);
  CHECK(var == doctest::Approx(2.0 / fan_in).epsilon(0.15));

  for (const auto& p : w.params())
    if (p->shape.size() == 1)
      for (double v : p->v) CHECK(v == 0.0);
}

TEST_CASE("forward rejects wrong input geometry") {
  Network<double> net(small_config(10));
  net.init(1);
  auto bad = random_input({2, 3, 8, 9}, 1);
  CHECK_THROWS_AS(net.forward(nullptr, bad), dna::ShapeError);
}

TEST_CASE("full network gradients match finite differences") {
  NetConfig cfg;
  cfg.in_h = 4;
  cfg.in_w = 4;
  cfg.in_c = 2;
  cfg.blocks = {{3, 3, 1, true}};
  cfg.out_dim = 3;
  Network<double> net(cfg);
  net.init(5);
  auto x = random_input({2, 2, 4, 4}, 6);
  std::vector<int> labels = {0, 2};

  auto fwd = [&](Tape<double>* t) {
    return dna::cross_entropy(t, net.forward(t, x), labels);
  };
  Tape<double> tape;
  auto loss = fwd(&tape);
  tape.backward(loss);
  const double h = 1e-6;
  for (const auto& p : net.params()) {
    for (std::size_t i = 0; i < p->numel(); i += std::max<std::size_t>(1, p->numel() / 7)) {
      double orig = p->v[i];
      p->v[i] = orig + h;
      double lp = fwd(nullptr)->v[0];
      p->v[i] = orig - h;
      double lm = fwd(nullptr)->v[0];
      p->v[i] = orig;
      double fd = (lp - lm) / (2 * h);
      CHECK(std::fabs(p->grad[i] - fd) <= 1e-4 * std::max(1.0, std::fabs(fd)));
    }
  }
}

TEST_CASE("batch items are independent in the forward pass") {
  Network<double> net(small_config(5));
  net.init(7);
  auto x2 = random_input({2, 3, 8, 8}, 8);
  auto out2 = net.forward(nullptr, x2);
  for (std::size_t i = 0; i < 2; ++i) {
    auto x1 = make_tensor<double>({1, 3, 8, 8});
    std::copy(x2->v.begin() + static_cast<std::ptrdiff_t>(i * 3 * 64),
              x2->v.begin() + static_cast<std::ptrdiff_t>((i + 1) * 3 * 64), x1->v.begin());
    auto out1 = net.forward(nullptr, x1);
    for (std::size_t j = 0; j < 5; ++j) CHECK(out1->v[j] == out2->v[i * 5 + j]);
  }
}

TEST_CASE("zeroed output layer yields the symmetric policy point") {
  NetConfig cfg = small_config(dna::kAugOutputDim);
  Network<double> net(cfg);
  net.init(11);
  net.zero_output_layer();
  auto x = random_input({3, 3, 8, 8}, 12);
  auto params = dna::aug_forward<double>(nullptr, net, x);
  auto pi = dna::pi_from_alpha(params.alpha);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t s = 0; s < 105; ++s)
      CHECK(pi[i][s] == doctest::Approx(1.0 / 105.0).epsilon(1e-9));
  for (double v : params.p->v) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  for (double v : params.m->v) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("aug_forward splits heads and keeps p, m strictly interior") {
  NetConfig cfg = small_config(dna::kAugOutputDim);
  Network<double> net(cfg);
  net.init(13);
  auto x = random_input({4, 3, 8, 8}, 14);
  auto params = dna::aug_forward<double>(nullptr, net, x);
  CHECK(params.alpha->shape == std::vector<std::size_t>{4, 105});
  CHECK(params.p->shape == std::vector<std::size_t>{4, 210});
  CHECK(params.m->shape == std::vector<std::size_t>{4, 210});
  for (double v : params.p->v) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  auto pi = dna::pi_from_alpha(params.alpha);
  for (const auto& row : pi) {
    double sum = 0;
    for (double v : row) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
  Network<double> cls(small_config(10));
  CHECK_THROWS_AS(dna::aug_forward<double>(nullptr, cls, x), dna::ShapeError);
}

TEST_CASE("snapshot round-trip reproduces forward output bitwise") {
  Network<float> net(small_config(7));
  net.init(21);
  auto x = make_tensor<float>({2, 3, 8, 8});
  dna::RngStream rng(22);
  for (auto& v : x->v) v = static_cast<float>(rng.next_uniform());
  auto before = net.forward(nullptr, x);

  auto snap = dna::NetSnapshot::from(net);
  Network<float> restored(snap.config);
  restored.init(999);  // different weights first, then overwrite
  snap.into(restored);
  auto after = restored.forward(nullptr, x);
  CHECK(before->v == after->v);
  CHECK(snap.hash() == dna::NetSnapshot::from(restored).hash());
}

TEST_CASE("snapshot refuses mismatched architectures") {
  Network<float> net(small_config(7));
  net.init(31);
  auto snap = dna::NetSnapshot::from(net);
  Network<float> other(small_config(9));
  CHECK_THROWS_AS(snap.into(other), dna::FormatError);
}

TEST_CASE("checkpoint file round-trip is bit exact and atomic") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "dna_ckpt_test";
  fs::create_directories(dir);
  auto path = (dir / "test.ckpt").string();

  Network<float> aug(small_config(dna::kAugOutputDim)), cls(small_config(10));
  aug.init(41);
  cls.init(42);
  dna::Checkpoint ck;
  ck.phase = "searched";
  ck.seed = 77;
  ck.search_config = {{"tau", 0.5}, {"lambda", 0.5}};
  ck.aug_net = dna::NetSnapshot::from(aug);
  ck.cls_net = dna::NetSnapshot::from(cls);
  dna::save_checkpoint(path, ck);
  CHECK_FALSE(fs::exists(path + ".tmp"));

  auto back = dna::load_checkpoint(path);
  CHECK(back.phase == "searched");
  CHECK(back.seed == 77);
  CHECK(back.policy_space_version == dna::kPolicySpaceVersion);
  CHECK(back.search_config.at("tau").get<double>() == 0.5);
  CHECK(back.aug_net.hash() == ck.aug_net.hash());
  CHECK(back.cls_net.hash() == ck.cls_net.hash());
  for (std::size_t i = 0; i < ck.aug_net.values.size(); ++i)
    CHECK(back.aug_net.values[i] == ck.aug_net.values[i]);

  // Corrupt magic is rejected.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK_THROWS_AS(dna::load_checkpoint(path), dna::FormatError);
  CHECK_THROWS_AS(dna::load_checkpoint((dir / "missing.ckpt").string()), dna::FormatError);
  fs::remove_all(dir);
}
