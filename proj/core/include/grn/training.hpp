// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Training loop, streaming evaluation and the metrics record.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grn/model.hpp"
#include "grn/optim.hpp"
#include "grn/retention.hpp"
#include "grn/temporal_graph.hpp"

namespace grn {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t patience = 20;
  std::size_t batch_size = 200;
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double weight_decay = 0.0;
  SplitSpec split;
  /// Paradigm of the final test evaluation (validation runs chunk-wise at batch_size).
  Paradigm eval_paradigm = Paradigm::recurrent();
  bool final_test = true;
};

struct MetricsReport {
  std::string phase;  // "epoch", "val", "test", ...
  std::optional<std::size_t> epoch;
  std::string paradigm;
  std::size_t num_events = 0;
  double loss = 0.0;
  double ap = 0.0;
  double auc_roc = 0.0;
  double train_loss = 0.0;  // epoch records only
  // timing; not part of the deterministic record
  double wall_latency_s = 0.0;  // epoch records: whole epoch; eval records: the scoring pass
  double throughput_eps = 0.0;
  std::size_t peak_memory_bytes = 0;

  /// One JSON object on one line. Timing fields are included only on request
  /// so that repeated runs give byte-identical deterministic records.
  std::string to_json(bool include_timing) const;
};

/// Process resident-set peak in bytes.
std::size_t peak_memory_bytes();

struct EvalInput {
  const EventStream* universe = nullptr;  // node set and partition for negatives
  std::vector<std::span<const Event>> history;  // replayed first, in order
  std::span<const Event> target;
  /// When set, only target events touching a flagged node are scored.
  const std::vector<char>* unobserved = nullptr;
  /// Events per forward call, i.e. how often node embeddings are written
  /// back. Training uses its batch size; evaluating with the same value keeps
  /// the paradigms interchangeable.
  std::size_t update_interval = 200;
};

/// Replays history, then scores the target segment (positives against one
/// random negative each for link prediction; event labels for node
/// classification) while absorbing it.
MetricsReport evaluate(const GrnModel& model, const EvalInput& input, Paradigm paradigm,
                       std::uint64_t seed);

enum class Segment { Train, Val, Test };
/// Standard segment evaluation: history is every earlier segment.
MetricsReport evaluate_segment(const GrnModel& model, const EventStream& stream,
                               const StreamSplit& split, Segment segment, Paradigm paradigm,
                               std::size_t update_interval, std::uint64_t seed);

struct FitResult {
  GrnModel model;
  AdamState adam;
  std::vector<MetricsReport> history;  // one record per epoch
  std::size_t best_epoch = 0;          // 1-based
  std::optional<MetricsReport> test;
};

using EpochCallback = std::function<void(const MetricsReport&)>;

/// Trains on the train segment of `stream` with early stopping on validation
/// AP and returns the best-validation parameters.
FitResult fit(const EventStream& stream, GrnConfig config, const TrainConfig& train,
              const EpochCallback& on_epoch = {});

/// Loss of one training batch, exposed for gradient checks: builds the tape,
/// optionally backpropagates into `grads`, and returns the loss.
double batch_loss(const GrnModel& model, const NodeStateTable& table, std::span<const Event> batch,
                  std::span<const Event> negatives, Paradigm paradigm, Rng* dropout_rng,
                  std::vector<Matrix>* grads, std::vector<NodeUpdate>* updates = nullptr);

}  // namespace grn
