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

#include <filesystem>
#include <fstream>

#include "dna/checkpoint.hpp"
#include "dna/dataset.hpp"
#include "dna/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

dna::Dataset tiny_synth(std::size_t per_class, std::uint64_t seed,
                        const std::string& split = "train") {
  dna::SyntheticSpec spec;
  spec.num_per_class = per_class;
  spec.seed = seed;
  return dna::gen_synthetic(spec, split);
}

dna::NetConfig tiny_net(std::size_t out_dim) {
  dna::NetConfig cfg;
  cfg.in_h = 16;
  cfg.in_w = 16;
  cfg.in_c = 1;
  cfg.blocks = {{4, 3, 1, true}, {8, 3, 1, true}};
  cfg.out_dim = out_dim;
  return cfg;
}

dna::SearchConfig tiny_search(std::size_t epochs, std::uint64_t seed) {
  dna::SearchConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 16;
  cfg.cls_lr = 0.05;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("zero-epoch search returns the initial weights and empty history") {
  auto data = tiny_synth(8, 1);
  std::vector<dna::HistoryRow> history;
  auto ckpt = dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(0, 3),
                                     tiny_net(dna::kAugOutputDim), tiny_net(2), &history);
  CHECK(ckpt.phase == "searched");
  CHECK(history.empty());

  // Equals a freshly initialized pair of nets under the same seed.
  dna::Network<float> aug(tiny_net(dna::kAugOutputDim));
  aug.init(dna::RngStream::derive(3, 0xA06).next_u64());
  CHECK(ckpt.aug_net.hash() == dna::NetSnapshot::from(aug).hash());
}

TEST_CASE("search is bit-deterministic in the seed") {
  auto data = tiny_synth(10, 2);
  std::vector<dna::HistoryRow> h1, h2;
  auto a = dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(2, 5),
                                  tiny_net(dna::kAugOutputDim), tiny_net(2), &h1);
  auto b = dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(2, 5),
                                  tiny_net(dna::kAugOutputDim), tiny_net(2), &h2);
  CHECK(a.aug_net.hash() == b.aug_net.hash());
  CHECK(a.cls_net.hash() == b.cls_net.hash());
  REQUIRE(h1.size() == h2.size());
  for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1[i].value == h2[i].value);

  auto c = dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(2, 6),
                                  tiny_net(dna::kAugOutputDim), tiny_net(2), nullptr);
  CHECK(a.aug_net.hash() != c.aug_net.hash());
}

TEST_CASE("training freezes the augmentation network bit-identically") {
  auto data = tiny_synth(10, 3);
  auto searched = dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(1, 7),
                                         tiny_net(dna::kAugOutputDim), tiny_net(2), nullptr);
  dna::TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.lr = 0.05;
  tc.seed = 8;
  std::vector<dna::HistoryRow> history;
  auto trained = dna::train_run<float>(data, dna::DatasetKind::kSynthetic, searched, tc,
                                       &history);
  CHECK(trained.phase == "trained");
  CHECK(trained.aug_net.hash() == searched.aug_net.hash());
  CHECK(trained.cls_net.hash() != searched.cls_net.hash());
  CHECK(history.size() == 2);
  for (const auto& row : history) CHECK(std::isfinite(row.value));

  // Train phase is itself deterministic.
  auto trained2 = dna::train_run<float>(data, dna::DatasetKind::kSynthetic, searched, tc,
                                        nullptr);
  CHECK(trained.cls_net.hash() == trained2.cls_net.hash());

  // A trained checkpoint cannot be retrained.
  CHECK_THROWS_AS(
      dna::train_run<float>(data, dna::DatasetKind::kSynthetic, trained, tc, nullptr),
      dna::ContractError);
}

TEST_CASE("evaluate enforces the phase contract and computes accuracies") {
  auto train = tiny_synth(30, 4);
  auto test = tiny_synth(30, 4, "test");
  auto searched = dna::search_run<float>(train, dna::DatasetKind::kSynthetic, tiny_search(3, 9),
                                         tiny_net(dna::kAugOutputDim), tiny_net(2), nullptr);
  CHECK_THROWS_AS(dna::evaluate<float>(test, searched), dna::ContractError);

  dna::TrainConfig tc;
  tc.epochs = 4;
  tc.batch_size = 16;
  tc.lr = 0.05;
  tc.seed = 10;
  auto trained = dna::train_run<float>(train, dna::DatasetKind::kSynthetic, searched, tc,
                                       nullptr);
  auto res = dna::evaluate<float>(test, trained);
  CHECK(res.accuracy >= 0.5);  // two balanced, separable classes
  REQUIRE(res.per_class_accuracy.size() == 2);
  CHECK(res.per_class_count[0] == 30);
  CHECK(res.per_class_count[1] == 30);
  double mean = (res.per_class_accuracy[0] + res.per_class_accuracy[1]) / 2.0;
  CHECK(res.accuracy == doctest::Approx(mean).epsilon(1e-9));

  dna::Dataset empty;
  empty.class_names = {"a", "b"};
  CHECK_THROWS_AS(dna::evaluate<float>(empty, trained), dna::ContractError);
}

TEST_CASE("policy report under a zeroed head is uniform with index tie-breaks") {
  auto data = tiny_synth(6, 5);
  dna::Network<float> aug(tiny_net(dna::kAugOutputDim));
  aug.init(1);
  aug.zero_output_layer();
  dna::Network<float> cls(tiny_net(2));
  cls.init(2);
  dna::Checkpoint ckpt;
  ckpt.phase = "searched";
  ckpt.search_config = {{"tau", 0.5}, {"lambda", 0.5}};
  ckpt.aug_net = dna::NetSnapshot::from(aug);
  ckpt.cls_net = dna::NetSnapshot::from(cls);

  auto rep = dna::policy_report<float>(data, ckpt, 5);
  REQUIRE(rep.top.size() == 2);
  for (std::size_t c = 0; c < 2; ++c) {
    CHECK(rep.class_present[c]);
    REQUIRE(rep.top[c].size() == 5);
    for (std::size_t r = 0; r < 5; ++r) {
      CHECK(rep.top[c][r].first == static_cast<int>(r));  // ties -> index order
      CHECK(rep.top[c][r].second == doctest::Approx(1.0 / 105.0).epsilon(1e-6));
    }
    double sum = 0;
    for (double v : rep.mean_pi[c]) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  }
  REQUIRE(rep.overall_top.size() == 5);
  CHECK(rep.overall_top[0].first == 0);
}

TEST_CASE("policy report marks absent classes") {
  auto data = tiny_synth(6, 6);
  // Strip class 1.
  dna::Dataset only0;
  only0.class_names = data.class_names;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.labels[i] == 0) {
      only0.images.push_back(data.images[i]);
      only0.labels.push_back(0);
    }
  dna::Network<float> aug(tiny_net(dna::kAugOutputDim));
  aug.init(3);
  dna::Network<float> cls(tiny_net(2));
  cls.init(4);
  dna::Checkpoint ckpt;
  ckpt.phase = "searched";
  ckpt.search_config = {{"tau", 0.5}, {"lambda", 0.5}};
  ckpt.aug_net = dna::NetSnapshot::from(aug);
  ckpt.cls_net = dna::NetSnapshot::from(cls);
  auto rep = dna::policy_report<float>(only0, ckpt, 3);
  CHECK(rep.class_present[0]);
  CHECK_FALSE(rep.class_present[1]);
  CHECK(rep.top[1].empty());
}

TEST_CASE("checkpoint file round-trip preserves evaluation bitwise") {
  auto train = tiny_synth(12, 7);
  auto test = tiny_synth(12, 7, "test");
  auto searched = dna::search_run<float>(train, dna::DatasetKind::kSynthetic, tiny_search(1, 11),
                                         tiny_net(dna::kAugOutputDim), tiny_net(2), nullptr);
  dna::TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 16;
  tc.seed = 12;
  tc.lr = 0.05;
  auto trained = dna::train_run<float>(train, dna::DatasetKind::kSynthetic, searched, tc,
                                       nullptr);

  auto dir = fs::temp_directory_path() / "dna_pipe_ckpt";
  fs::create_directories(dir);
  auto path = (dir / "t.ckpt").string();
  dna::save_checkpoint(path, trained);
  auto loaded = dna::load_checkpoint(path);
  auto r1 = dna::evaluate<float>(test, trained);
  auto r2 = dna::evaluate<float>(test, loaded);
  CHECK(r1.accuracy == r2.accuracy);
  CHECK(r1.per_class_accuracy == r2.per_class_accuracy);
  fs::remove_all(dir);
}

TEST_CASE("history CSV has the documented header and rows") {
  auto dir = fs::temp_directory_path() / "dna_hist";
  fs::create_directories(dir);
  auto path = (dir / "h.csv").string();
  dna::write_history_csv(path, {{0, "search", 1.5}, {1, "search", 1.25}});
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "epoch,split,value");
  std::getline(f, line);
  CHECK(line == "0,search,1.5");
  std::getline(f, line);
  CHECK(line == "1,search,1.25");
  CHECK_FALSE(fs::exists(path + ".tmp"));
  fs::remove_all(dir);
}

TEST_CASE("search loss decreases on an easy separable problem") {
  auto data = tiny_synth(40, 8);
  std::vector<dna::HistoryRow> history;
  dna::search_run<float>(data, dna::DatasetKind::kSynthetic, tiny_search(6, 13),
                         tiny_net(dna::kAugOutputDim), tiny_net(2), &history);
  REQUIRE(history.size() == 6);
  CHECK(history.back().value < history.front().value);
}
