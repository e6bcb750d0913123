// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Event streams: CSV ingestion, chronological splits, neighbour histories,
// batching, negative sampling and a synthetic periodic generator.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

struct Event {
  std::size_t src = 0;
  std::size_t dst = 0;
  double t = 0.0;
  std::vector<double> edge_feat;
  std::optional<int> label;
};

struct EventStream {
  std::vector<Event> events;
  std::size_t num_nodes = 0;
  std::size_t edge_feat_dim = 0;
  bool bipartite = false;
  /// Destination partition (sorted), used by the negative sampler when bipartite.
  std::vector<std::size_t> dst_nodes;
  /// raw_ids[dense] is the identifier the node had in its source file.
  std::vector<std::string> raw_ids;

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
  /// Same node universe, no events.
  EventStream empty_like() const;
};

struct LoadOptions {
  enum class Bipartite { Auto, Namespaced, No };
  /// Auto: bipartite iff the raw src and dst id sets are disjoint.
  /// Namespaced: dst ids live in their own id space (user/item files whose
  /// ids both start at 0), which forces a bipartite stream.
  Bipartite bipartite = Bipartite::Auto;
};

EventStream load_csv(const std::string& path, const LoadOptions& options = {});
/// Writes dense ids, so load_csv(save_csv(s)) == s.
void save_csv(const EventStream& stream, const std::string& path);
/// Two-column `raw_id,dense_id` sidecar.
void save_id_map(const EventStream& stream, const std::string& path);

struct SplitSpec {
  enum class Mode { Transductive, Inductive };
  double train_frac = 0.70;
  double val_frac = 0.15;
  double test_frac = 0.15;
  double inductive_node_frac = 0.10;
  Mode mode = Mode::Transductive;

  void validate() const;
};

struct StreamSplit {
  EventStream train, val, test;
  /// Per dense node id: 1 if held out of training (inductive mode only).
  std::vector<char> unobserved;
  std::size_t removed_train_events = 0;
};

StreamSplit chronological_split(const EventStream& stream, const SplitSpec& spec,
                                std::uint64_t seed);

struct NeighborSequence {
  std::size_t dst = 0;
  double query_time = 0.0;
  std::vector<std::size_t> srcs;
  std::vector<double> times;
  Matrix edge_feats;
  std::vector<double> deltas;

  std::size_t size() const noexcept { return srcs.size(); }
};

inline constexpr std::size_t kUnboundedHistory = static_cast<std::size_t>(-1);

/// Events touching `node` strictly before `query_time`, oldest first, keeping
/// the most recent `max_history`.
NeighborSequence build_neighbor_sequence(const EventStream& stream, std::size_t node,
                                         double query_time,
                                         std::size_t max_history = kUnboundedHistory);

std::vector<std::span<const Event>> chunk(std::span<const Event> events, std::size_t batch_size = 200);

/// One negative per positive: same src and time, uniformly random dst
/// (from the destination partition when the stream is bipartite).
std::vector<Event> negative_sample(std::span<const Event> batch, const EventStream& stream, Rng& rng);

struct SynthParams {
  std::size_t num_users = 50;
  std::size_t num_items = 50;
  std::size_t period = 500;
  double noise_frac = 0.0;
  std::size_t length = 6000;
};

/// Event i (timestamp i): user u = i mod U talks to item (u + ⌊i/period⌋) mod I,
/// except that a noise_frac share of events are uniformly random pairs.
/// Users are dense ids [0, U), items [U, U + I).
EventStream synth_generate(const SynthParams& params, Rng& rng);

}  // namespace grn
