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

// dna: input-conditional augmentation-policy search.
//
//   dna search  --config PATH [--seed N] [--out DIR]
//   dna train   --config PATH [--ckpt PATH] [--seed N] [--out DIR]
//   dna eval    --config PATH [--ckpt PATH] [--out DIR]
//   dna inspect --config PATH [--ckpt PATH] [--out DIR] [--top-k K]
//   dna synth   --config PATH [--seed N] [--out DIR]
//
// --config accepts a file path or a built-in preset name. Exit codes:
// 0 success, 2 usage/config/contract errors, 1 other runtime failures.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "dna/checkpoint.hpp"
#include "dna/config.hpp"
#include "dna/dataset.hpp"
#include "dna/pipeline.hpp"
#include "dna/policy.hpp"

namespace {

namespace fs = std::filesystem;

void apply_thread_env() {
#ifdef _OPENMP
  if (const char* env = std::getenv("DNA_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

dna::TrainTest load_data(const dna::RunConfig& cfg) {
  if (cfg.dataset == "synth") {
    dna::SyntheticSpec sp = cfg.synth;
    sp.seed = cfg.seed;
    dna::TrainTest tt;
    tt.train = dna::gen_synthetic(sp, "train");
    tt.test = dna::gen_synthetic(sp, "test");
    return tt;
  }
  if (cfg.data_path.empty())
    throw dna::FormatError("data_path must be set for dataset " + cfg.dataset);
  std::vector<std::string> names;
  if (cfg.dataset == "cifar10") {
    names = dna::cifar10_class_names();
  } else if (cfg.dataset == "svhn") {
    for (int d = 0; d < 10; ++d) names.push_back(std::to_string(d));
  } else {
    for (int i = 0; i < 100; ++i)
      names.push_back("class_" + std::string(i < 10 ? "0" : "") + std::to_string(i));
  }
  return dna::load_cifar_dir(cfg.data_path, names);
}

void write_resolved_config(const dna::RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream f(fs::path(cfg.out_dir) / "config.resolved.txt");
  f << dna::dump_config(cfg);
}

std::string cell_text(const dna::PolicyReport& rep, std::size_t cls, std::size_t rank) {
  if (cls < rep.class_present.size() && rep.class_present[cls] &&
      rank < rep.top[cls].size()) {
    std::ostringstream os;
    os << dna::PolicySpace::get().name(rep.top[cls][rank].first) << " " << std::fixed
       << std::setprecision(4) << rep.top[cls][rank].second;
    return os.str();
  }
  return "-";
}

void print_policy_report(const dna::PolicyReport& rep, std::size_t top_k, std::ostream& out,
                         const std::string& csv_path) {
  const std::size_t k = rep.class_names.size();
  std::vector<std::size_t> widths(k);
  std::vector<std::vector<std::string>> cells(top_k, std::vector<std::string>(k));
  for (std::size_t c = 0; c < k; ++c) {
    widths[c] = rep.class_names[c].size();
    for (std::size_t r = 0; r < top_k; ++r) {
      cells[r][c] = cell_text(rep, c, r);
      widths[c] = std::max(widths[c], cells[r][c].size());
    }
  }
  out << std::left << std::setw(6) << "rank";
  for (std::size_t c = 0; c < k; ++c)
    out << std::left << std::setw(static_cast<int>(widths[c] + 2)) << rep.class_names[c];
  out << "\n";
  for (std::size_t r = 0; r < top_k; ++r) {
    out << std::left << std::setw(6) << (r + 1);
    for (std::size_t c = 0; c < k; ++c)
      out << std::left << std::setw(static_cast<int>(widths[c] + 2)) << cells[r][c];
    out << "\n";
  }
  out << "overall:";
  for (std::size_t r = 0; r < std::min(top_k, rep.overall_top.size()); ++r)
    out << "  " << dna::PolicySpace::get().name(rep.overall_top[r].first) << " "
        << std::fixed << std::setprecision(4) << rep.overall_top[r].second;
  out << "\n";

  std::ofstream csv(csv_path + ".tmp");
  if (!csv) throw dna::FormatError("cannot open for write: " + csv_path);
  csv << "rank";
  for (std::size_t c = 0; c < k; ++c) csv << ",\"" << rep.class_names[c] << "\"";
  csv << "\n";
  for (std::size_t r = 0; r < top_k; ++r) {
    csv << (r + 1);
    for (std::size_t c = 0; c < k; ++c) csv << ",\"" << cells[r][c] << "\"";
    csv << "\n";
  }
  csv.close();
  fs::rename(csv_path + ".tmp", csv_path);
}

struct Options {
  std::string config;
  std::string ckpt;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> top_k;
};

dna::RunConfig resolve_config(const Options& opt) {
  dna::RunConfig cfg = dna::load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out.empty()) cfg.out_dir = opt.out;
  if (opt.top_k) cfg.top_k = *opt.top_k;
  cfg.search.seed = cfg.seed;
  cfg.train.seed = cfg.seed;
  return cfg;
}

int cmd_search(const Options& opt) {
  dna::RunConfig cfg = resolve_config(opt);
  dna::TrainTest data = load_data(cfg);
  dna::Dataset train = cfg.reduce_n ? dna::stratified_reduce(data.train, cfg.reduce_n, cfg.seed)
                                    : data.train;
  write_resolved_config(cfg);
  dna::DatasetGeometry geo = dna::dataset_geometry(cfg);
  auto aug_cfg = dna::make_net_config(cfg, true);
  auto cls_cfg = dna::make_net_config(cfg, false);
  std::vector<dna::HistoryRow> history;
  std::cout << "search: " << train.size() << " images, " << cfg.search.epochs << " epochs, seed "
            << cfg.seed << "\n";
  dna::Checkpoint ckpt = dna::search_run<float>(train, geo.kind, cfg.search, aug_cfg, cls_cfg,
                                                &history);
  const std::string path = (fs::path(cfg.out_dir) / "searched.ckpt").string();
  dna::save_checkpoint(path, ckpt);
  dna::write_history_csv((fs::path(cfg.out_dir) / "search_history.csv").string(), history);
  if (!history.empty())
    std::cout << "final search loss: " << history.back().value << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_train(const Options& opt) {
  dna::RunConfig cfg = resolve_config(opt);
  std::string in_path =
      opt.ckpt.empty() ? (fs::path(cfg.out_dir) / "searched.ckpt").string() : opt.ckpt;
  dna::Checkpoint in = dna::load_checkpoint(in_path);
  dna::TrainTest data = load_data(cfg);
  write_resolved_config(cfg);
  dna::DatasetGeometry geo = dna::dataset_geometry(cfg);
  std::vector<dna::HistoryRow> history;
  std::cout << "train: " << data.train.size() << " images, " << cfg.train.epochs
            << " epochs, seed " << cfg.seed << "\n";
  dna::Checkpoint out = dna::train_run<float>(data.train, geo.kind, in, cfg.train, &history);
  const std::string path = (fs::path(cfg.out_dir) / "trained.ckpt").string();
  dna::save_checkpoint(path, out);
  dna::write_history_csv((fs::path(cfg.out_dir) / "train_history.csv").string(), history);
  if (!history.empty())
    std::cout << "final train loss: " << history.back().value << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_eval(const Options& opt) {
  dna::RunConfig cfg = resolve_config(opt);
  std::string in_path =
      opt.ckpt.empty() ? (fs::path(cfg.out_dir) / "trained.ckpt").string() : opt.ckpt;
  dna::Checkpoint ckpt = dna::load_checkpoint(in_path);
  dna::TrainTest data = load_data(cfg);
  write_resolved_config(cfg);
  dna::EvalResult res = dna::evaluate<float>(data.test, ckpt);
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "test accuracy: " << res.accuracy << " (" << data.test.size() << " images)\n";
  for (std::size_t c = 0; c < res.per_class_accuracy.size(); ++c)
    std::cout << "  " << data.test.class_names[c] << ": " << res.per_class_accuracy[c] << " ("
              << res.per_class_count[c] << ")\n";
  const std::string path = (fs::path(cfg.out_dir) / "metrics.csv").string();
  std::ofstream f(path + ".tmp");
  if (!f) throw dna::FormatError("cannot open for write: " + path);
  f << "class,count,accuracy\n";
  f << std::fixed << std::setprecision(6);
  for (std::size_t c = 0; c < res.per_class_accuracy.size(); ++c)
    f << "\"" << data.test.class_names[c] << "\"," << res.per_class_count[c] << ","
      << res.per_class_accuracy[c] << "\n";
  f << "\"__overall__\"," << data.test.size() << "," << res.accuracy << "\n";
  f.close();
  fs::rename(path + ".tmp", path);
  return 0;
}

int cmd_inspect(const Options& opt) {
  dna::RunConfig cfg = resolve_config(opt);
  std::string in_path =
      opt.ckpt.empty() ? (fs::path(cfg.out_dir) / "searched.ckpt").string() : opt.ckpt;
  dna::Checkpoint ckpt = dna::load_checkpoint(in_path);
  dna::TrainTest data = load_data(cfg);
  dna::Dataset train = cfg.reduce_n ? dna::stratified_reduce(data.train, cfg.reduce_n, cfg.seed)
                                    : data.train;
  write_resolved_config(cfg);
  dna::PolicyReport rep = dna::policy_report<float>(train, ckpt, cfg.top_k);
  print_policy_report(rep, cfg.top_k, std::cout,
                      (fs::path(cfg.out_dir) / "policy_report.csv").string());
  return 0;
}

int cmd_synth(const Options& opt) {
  dna::RunConfig cfg = resolve_config(opt);
  dna::SyntheticSpec sp = cfg.synth;
  sp.seed = cfg.seed;
  fs::create_directories(cfg.out_dir);
  write_resolved_config(cfg);
  dna::Dataset train = dna::gen_synthetic(sp, "train");
  dna::Dataset test = dna::gen_synthetic(sp, "test");
  dna::save_cifar_records((fs::path(cfg.out_dir) / "train.bin").string(), train);
  dna::save_cifar_records((fs::path(cfg.out_dir) / "test.bin").string(), test);
  std::cout << "wrote " << train.size() << " train / " << test.size() << " test images ("
            << sp.image_size << "x" << sp.image_size << "x" << sp.channels << ") to "
            << cfg.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();
  CLI::App app{"dna: input-conditional augmentation-policy search"};
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool ckpt, bool topk) {
    sub->add_option("--config", opt.config, "config file path or preset name")->required();
    sub->add_option("--seed", opt.seed, "override the run seed");
    sub->add_option("--out", opt.out, "override the output directory");
    if (ckpt) sub->add_option("--ckpt", opt.ckpt, "checkpoint path");
    if (topk) sub->add_option("--top-k", opt.top_k, "sub-policies per class in the report");
  };
  auto* search = app.add_subcommand("search", "joint augmentation-policy search");
  add_common(search, false, false);
  auto* train = app.add_subcommand("train", "train a classifier under a frozen policy");
  add_common(train, true, false);
  auto* eval = app.add_subcommand("eval", "evaluate a trained checkpoint on the test split");
  add_common(eval, true, false);
  auto* inspect = app.add_subcommand("inspect", "report the learned per-class policy");
  add_common(inspect, true, true);
  auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark to disk");
  add_common(synth, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (search->parsed()) return cmd_search(opt);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (inspect->parsed()) return cmd_inspect(opt);
    if (synth->parsed()) return cmd_synth(opt);
  } catch (const dna::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dna::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const dna::DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
