// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// grn: train | eval | verify | bench | synth.
// Exit codes: 0 success, 1 validation failure (bad flags, bad config, failed
// property), 2 runtime error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "grn/bench.hpp"
#include "grn/checkpoint.hpp"
#include "grn/run_config.hpp"
#include "grn/temporal_graph.hpp"
#include "grn/training.hpp"
#include "grn/verify.hpp"
#include "json.hpp"

namespace {

using namespace grn;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

// Validation problems detected before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-')
    throw UsageError(std::string(what) + ": expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

void write_timing(const std::string& metrics_path, const std::vector<MetricsReport>& records) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : records) j.push_back(nlohmann::ordered_json::parse(r.to_json(true)));
  std::ofstream(metrics_path + ".timing.json") << j.dump(2) << '\n';
}

int cmd_train(const std::string& config_path, bool quiet) {
  RunConfig run;
  try {
    run = load_run_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "grn train: " << e.what() << '\n';
    return kInvalid;
  }
  const EventStream stream = load_dataset(run);
  for (const std::string& out : {run.metrics_path, run.checkpoint_path}) {
    const auto parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
  }
  std::ofstream metrics(run.metrics_path, std::ios::trunc);
  if (!metrics) throw std::runtime_error("cannot write metrics file '" + run.metrics_path + "'");
  std::vector<MetricsReport> records;
  auto on_epoch = [&](const MetricsReport& r) {
    metrics << r.to_json(false) << '\n';
    metrics.flush();
    records.push_back(r);
    if (!quiet)
      std::fprintf(stderr, "epoch %zu  train_loss %.5f  val_ap %.4f  val_auc %.4f  (%.1fs)\n", *r.epoch,
                   r.train_loss, r.ap, r.auc_roc, r.wall_latency_s);
  };
  FitResult fit_result = fit(stream, run.model, run.train, on_epoch);
  if (fit_result.test) {
    metrics << fit_result.test->to_json(false) << '\n';
    records.push_back(*fit_result.test);
    if (!quiet)
      std::fprintf(stderr, "test  ap %.4f  auc %.4f  (best epoch %zu)\n", fit_result.test->ap,
                   fit_result.test->auc_roc, fit_result.best_epoch);
  }
  write_timing(run.metrics_path, records);
  save_checkpoint(run.checkpoint_path, make_checkpoint(run, fit_result.model, fit_result.adam));
  return kOk;
}

struct EvalFlags {
  std::string checkpoint, data, setting, paradigm = "recurrent", out;
  std::size_t chunk_size = 0;
};

int cmd_eval(const EvalFlags& f) {
  Paradigm paradigm;
  try {
    paradigm = Paradigm::parse(f.paradigm, f.chunk_size);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (paradigm.kind == Paradigm::Kind::Chunkwise && f.chunk_size == 0)
    throw UsageError("--paradigm chunkwise needs --chunk-size >= 1");
  const Checkpoint ckpt = load_checkpoint(f.checkpoint);
  RunConfig run = ckpt.run;
  if (!f.data.empty()) {
    run.data_path = f.data;
    run.synth.reset();
  }
  if (f.setting == "inductive") run.train.split.mode = SplitSpec::Mode::Inductive;
  else if (f.setting == "transductive") run.train.split.mode = SplitSpec::Mode::Transductive;
  else if (!f.setting.empty()) throw UsageError("--setting must be transductive or inductive");

  const GrnModel model = restore_model(ckpt);
  const EventStream stream = load_dataset(run);
  if (stream.edge_feat_dim != model.config().edge_feat_dim)
    throw UsageError("checkpoint expects " + std::to_string(model.config().edge_feat_dim) +
                     " edge features, dataset has " + std::to_string(stream.edge_feat_dim));
  const StreamSplit split = chronological_split(stream, run.train.split, run.train.seed);
  if (run.train.split.mode == SplitSpec::Mode::Inductive &&
      std::none_of(split.unobserved.begin(), split.unobserved.end(), [](char c) { return c != 0; }))
    throw UsageError("inductive evaluation: the unobserved node set is empty");
  MetricsReport r = evaluate_segment(model, stream, split, Segment::Test, paradigm,
                                     run.train.batch_size, mix_seed(run.train.seed, "test"));
  const std::string line = r.to_json(false);
  std::cout << line << '\n';
  if (!f.out.empty()) {
    std::ofstream out(f.out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + f.out + "'");
    out << line << '\n';
    write_timing(f.out, {r});
  }
  return kOk;
}

int cmd_verify(bool inject, std::uint64_t seed) {
  VerifyOptions opt;
  opt.seed = seed;
  opt.inject_fault = inject;
  opt.on_result = [](const PropertyOutcome& o) { std::cout << format_outcome(o) << std::endl; };
  const VerifyReport rep = run_verify(opt);
  std::cout << '\n' << rep.traceability_table();
  std::size_t failed = 0;
  for (const auto& o : rep.outcomes) failed += o.passed ? 0 : 1;
  std::cout << rep.outcomes.size() - failed << "/" << rep.outcomes.size() << " properties passed across "
            << rep.family_count() << " families\n";
  return rep.all_passed() ? kOk : kInvalid;
}

struct BenchFlags {
  std::string paradigms = "recurrent,parallel,chunkwise";
  std::string lengths = "100,1000,10000";
  std::string chunk_sizes = "64";
  std::size_t repeats = 5;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  std::string out;
  bool json = false;
};

int cmd_bench(const BenchFlags& f) {
  BenchConfig cfg;
  cfg.paradigms.clear();
  cfg.lengths.clear();
  for (const auto& l : split_list(f.lengths)) cfg.lengths.push_back(parse_size(l, "--lengths"));
  std::vector<std::size_t> chunks;
  for (const auto& c : split_list(f.chunk_sizes)) chunks.push_back(parse_size(c, "--chunk-sizes"));
  for (const auto& name : split_list(f.paradigms)) {
    if (name == "chunkwise") {
      if (chunks.empty()) throw UsageError("chunkwise needs --chunk-sizes");
      for (std::size_t b : chunks) {
        if (b == 0) throw UsageError("--chunk-sizes must be >= 1");
        cfg.paradigms.push_back(Paradigm::chunkwise(b));
      }
    } else if (name == "recurrent" || name == "parallel") {
      cfg.paradigms.push_back(Paradigm::parse(name));
    } else {
      throw UsageError("unknown paradigm '" + name + "'");
    }
  }
  cfg.repeats = f.repeats;
  cfg.dim = f.dim;
  cfg.seed = f.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const BenchReport rep = run_bench(cfg);
  if (f.json) std::cout << rep.to_json() << '\n';
  else std::cout << rep.to_table();
  if (!f.out.empty()) {
    std::ofstream out(f.out, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + f.out + "'");
    out << rep.to_json() << '\n';
  }
  return kOk;
}

struct SynthFlags {
  std::string out, id_map;
  SynthParams params;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthFlags& f) {
  if (f.params.num_users == 0 || f.params.num_items == 0 || f.params.period == 0)
    throw UsageError("--users, --items and --period must be >= 1");
  if (!(f.params.noise_frac >= 0.0 && f.params.noise_frac <= 1.0))
    throw UsageError("--noise must lie in [0, 1]");
  const auto dir = std::filesystem::path(f.out).parent_path();
  if (!dir.empty() && !std::filesystem::is_directory(dir))
    throw UsageError("output directory '" + dir.string() + "' does not exist");
  Rng rng(mix_seed(f.seed, "synth"));
  const EventStream s = synth_generate(f.params, rng);
  save_csv(s, f.out);
  if (!f.id_map.empty()) save_id_map(s, f.id_map);
  std::cerr << "wrote " << s.size() << " events over " << s.num_nodes << " nodes to " << f.out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grn: temporal graph retention networks"};
  app.require_subcommand(1);

  std::string config_path;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train a model from a config file");
  train->add_option("--config", config_path, "Run configuration file")->required();
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  EvalFlags ef;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test segment");
  eval->add_option("--checkpoint", ef.checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", ef.data, "Dataset CSV (default: the checkpoint's dataset)");
  eval->add_option("--setting", ef.setting, "transductive or inductive");
  eval->add_option("--paradigm", ef.paradigm, "parallel, recurrent or chunkwise");
  eval->add_option("--chunk-size", ef.chunk_size, "Chunk size for chunkwise");
  eval->add_option("--out", ef.out, "Also write the metrics line here");

  bool inject = false;
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run the property suite");
  verify->add_flag("--inject-fault", inject, "Negate recurrent retention outputs (mutation test)");
  verify->add_option("--seed", verify_seed, "Base seed");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Per-event cost of the retention paradigms");
  bench->add_option("--paradigms", bf.paradigms, "Comma-separated: recurrent,parallel,chunkwise");
  bench->add_option("--lengths", bf.lengths, "Comma-separated history lengths");
  bench->add_option("--chunk-sizes", bf.chunk_sizes, "Comma-separated chunk sizes");
  bench->add_option("--repeats", bf.repeats, "Timed repeats (>= 3)");
  bench->add_option("--dim", bf.dim, "Head width");
  bench->add_option("--seed", bf.seed, "Seed");
  bench->add_option("--out", bf.out, "Write the JSON report here");
  bench->add_flag("--json", bf.json, "Print JSON instead of a table");

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "Write the synthetic periodic stream as CSV");
  synth->add_option("--out", sf.out, "Output CSV")->required();
  synth->add_option("--id-map", sf.id_map, "Also write raw_id,dense_id");
  synth->add_option("--users", sf.params.num_users, "Users");
  synth->add_option("--items", sf.params.num_items, "Items");
  synth->add_option("--period", sf.params.period, "Events per preference shift");
  synth->add_option("--noise", sf.params.noise_frac, "Share of random events");
  synth->add_option("--events", sf.params.length, "Number of events");
  synth->add_option("--seed", sf.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*train) return cmd_train(config_path, quiet);
    if (*eval) return cmd_eval(ef);
    if (*verify) return cmd_verify(inject, verify_seed);
    if (*bench) return cmd_bench(bf);
    if (*synth) return cmd_synth(sf);
  } catch (const UsageError& e) {
    std::cerr << "grn " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
    return kInvalid;
  } catch (const ConfigError& e) {
    std::cerr << "grn: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "grn " << app.get_subcommands().front()->get_name() << ": " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
