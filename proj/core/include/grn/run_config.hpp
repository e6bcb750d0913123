// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration file: `key = value` lines under [data], [model], [train]
// and [output]. Keys reuse the hyperparameter table's row names
// ("Node Embedding Size", "# Graph Retention Heads", ...). Lines starting
// with ';' are comments, as is a '#' line without '=' (keys themselves may
// start with '#').

#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "grn/model.hpp"
#include "grn/temporal_graph.hpp"
#include "grn/training.hpp"

namespace grn {

struct RunConfig {
  std::string data_path;            // empty: use the synthetic generator
  std::optional<SynthParams> synth;
  LoadOptions load;
  GrnConfig model;
  TrainConfig train;
  std::string checkpoint_path = "grn.ckpt";
  std::string metrics_path = "metrics.jsonl";
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseOptions {
  std::string source = "<config>";
  /// Relative paths are resolved against this directory.
  std::string base_dir;
  /// Reject a dataset path that does not exist.
  bool check_paths = true;
};

RunConfig parse_run_config(std::istream& in, const ParseOptions& options);
RunConfig load_run_config(const std::string& path);
/// Canonical text form; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

/// Loads the configured dataset or generates the synthetic stream.
EventStream load_dataset(const RunConfig& config);

}  // namespace grn
