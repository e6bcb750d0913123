// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Per-event inference cost of the three retention paradigms as a function of
// history length. For each (paradigm, L) a node already holds L messages and
// new events arrive one at a time:
//   recurrent   project the new row, one O(d²) state step
//   parallel    re-project all L + 1 rows and evaluate the newest query
//   chunkwise   project and retain a chunk of B new rows against the state
// Timings use a monotonic clock; one warm-up run is discarded and the median
// over repeats is reported.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "grn/retention.hpp"

namespace grn {

struct BenchConfig {
  std::vector<Paradigm> paradigms = {Paradigm::recurrent(), Paradigm::parallel(),
                                     Paradigm::chunkwise(64)};
  std::vector<std::size_t> lengths = {100, 1000, 10000};
  std::size_t repeats = 5;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  /// Upper bound on timed events per repeat (the parallel form uses fewer at long L).
  std::size_t max_events = 1000;

  void validate() const;
};

struct BenchRow {
  std::string paradigm;
  std::size_t length = 0;
  std::size_t events = 0;  // timed events per repeat
  double median_ns_per_event = 0.0;
  double mean_ns_per_event = 0.0;
  double throughput_eps = 0.0;
  std::size_t peak_memory_bytes = 0;
  double ratio = 1.0;  // median over the fastest row's median
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t dim = 0;
  std::size_t repeats = 0;
  // Cost growth from the shortest to the longest history; 0 when not measured.
  double recurrent_growth = 0.0;
  double parallel_growth = 0.0;

  std::string to_json() const;
  std::string to_table() const;
};

BenchReport run_bench(const BenchConfig& config);

/// Median per-event nanoseconds for one (paradigm, L) cell.
BenchRow bench_cell(Paradigm paradigm, std::size_t length, std::size_t dim, std::size_t repeats,
                    std::size_t max_events, std::uint64_t seed);

}  // namespace grn
