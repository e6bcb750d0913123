// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "grn/training.hpp"
#include "json.hpp"

namespace grn {
namespace {

using Clock = std::chrono::steady_clock;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Keeps the optimiser from discarding results.
volatile double g_sink = 0.0;

struct Fixture {
  RetentionParams params;
  Matrix history;  // L × d raw message rows (parallel only)
  Matrix fresh;    // rows for the timed events
  RetentionState state;
};

Fixture make_fixture(Paradigm paradigm, std::size_t length, std::size_t dim, std::size_t events,
                     std::uint64_t seed) {
  Rng rng(mix_seed(seed, "bench", length));
  Fixture f;
  f.params = RetentionParams::xavier(dim, rng);
  f.fresh = rng_uniform(rng, events, dim, -1.0, 1.0);
  if (paradigm.kind == Paradigm::Kind::Parallel) {
    f.history = rng_uniform(rng, length, dim, -1.0, 1.0);
  } else {
    // Build the state of an L-message history without keeping the rows.
    f.state = RetentionState::zero(dim);
    Matrix row(1, dim);
    for (std::size_t i = 0; i < length; ++i) {
      for (double& x : row.data()) x = rng.uniform(-1.0, 1.0);
      const Matrix k = add_row_broadcast(matmul(row, f.params.w_k), f.params.b_k);
      const Matrix v = add_row_broadcast(matmul(row, f.params.w_v), f.params.b_v);
      retention_recurrent(f.state, k.row(0), k.row(0), v.row(0), 1.0, true);
    }
  }
  return f;
}

// Processes `fresh` as newly arriving events; returns elapsed seconds.
double run_events(Paradigm paradigm, const Fixture& base) {
  const std::size_t n = base.fresh.rows();
  const std::size_t dim = base.fresh.cols();
  double acc = 0.0;
  const auto start = Clock::now();
  switch (paradigm.kind) {
    case Paradigm::Kind::Recurrent: {
      RetentionState st = base.state;
      for (std::size_t i = 0; i < n; ++i) {
        const Matrix x = slice_rows(base.fresh, i, 1);
        const Qkv p = project_qkv(x, x, base.params, QueryRows::AsGiven);
        const Matrix o = retention_recurrent(st, p.q.row(0), p.k.row(0), p.v.row(0), 1.0, true);
        acc += o(0, 0);
      }
      break;
    }
    case Paradigm::Kind::Parallel: {
      const std::size_t len = base.history.rows();
      Matrix rows(len + 1, dim);
      std::copy(base.history.data().begin(), base.history.data().end(), rows.data().begin());
      const DecayMask mask(std::vector<double>(len + 1, 1.0));
      for (std::size_t i = 0; i < n; ++i) {
        std::copy(base.fresh.row(i).begin(), base.fresh.row(i).end(), rows.row(len).begin());
        const Qkv p = project_qkv(slice_rows(base.fresh, i, 1), rows, base.params, QueryRows::AsGiven);
        const Matrix o = retention_parallel(p.q, p.k, p.v, mask, true);
        acc += o(0, 0);
      }
      break;
    }
    case Paradigm::Kind::Chunkwise: {
      const std::size_t b = paradigm.chunk_size;
      RetentionState st = base.state;
      for (std::size_t i = 0; i < n; i += b) {
        const std::size_t count = std::min(b, n - i);
        const Matrix x = slice_rows(base.fresh, i, count);
        const Qkv p = project_qkv(x, x, base.params, QueryRows::AsGiven);
        RetentionResult r = retention_chunkwise(p.q, p.k, p.v, DecayMask(std::vector<double>(count, 1.0)),
                                                st, true);
        st = std::move(r.state);
        acc += r.outputs(0, 0);
      }
      break;
    }
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
  g_sink = g_sink + acc;
  return elapsed;
}

}  // namespace

void BenchConfig::validate() const {
  if (repeats < 3) throw std::invalid_argument("bench: --repeats must be >= 3");
  if (lengths.empty()) throw std::invalid_argument("bench: no lengths given");
  for (std::size_t l : lengths)
    if (l == 0) throw std::invalid_argument("bench: lengths must be >= 1");
  if (paradigms.empty()) throw std::invalid_argument("bench: no paradigms given");
  if (dim == 0) throw std::invalid_argument("bench: dim must be >= 1");
  if (max_events == 0) throw std::invalid_argument("bench: max_events must be >= 1");
}

BenchRow bench_cell(Paradigm paradigm, std::size_t length, std::size_t dim, std::size_t repeats,
                    std::size_t max_events, std::uint64_t seed) {
  std::size_t events = max_events;
  if (paradigm.kind == Paradigm::Kind::Parallel)
    events = std::clamp<std::size_t>(200000 / length, 5, max_events);
  if (paradigm.kind == Paradigm::Kind::Chunkwise)
    events = std::max(events - events % paradigm.chunk_size, paradigm.chunk_size);
  const Fixture f = make_fixture(paradigm, length, dim, events, seed);
  run_events(paradigm, f);  // warm-up, discarded
  std::vector<double> per_event;
  for (std::size_t r = 0; r < repeats; ++r)
    per_event.push_back(run_events(paradigm, f) * 1e9 / static_cast<double>(events));
  BenchRow row;
  row.paradigm = paradigm.to_string();
  row.length = length;
  row.events = events;
  row.median_ns_per_event = median(per_event);
  row.mean_ns_per_event =
      std::accumulate(per_event.begin(), per_event.end(), 0.0) / static_cast<double>(per_event.size());
  row.throughput_eps = 1e9 / row.median_ns_per_event;
  row.peak_memory_bytes = peak_memory_bytes();
  return row;
}

BenchReport run_bench(const BenchConfig& config) {
  config.validate();
  BenchReport rep;
  rep.dim = config.dim;
  rep.repeats = config.repeats;
  for (const Paradigm& p : config.paradigms)
    for (std::size_t len : config.lengths)
      rep.rows.push_back(bench_cell(p, len, config.dim, config.repeats, config.max_events, config.seed));
  double best = rep.rows.front().median_ns_per_event;
  for (const auto& r : rep.rows) best = std::min(best, r.median_ns_per_event);
  for (auto& r : rep.rows) r.ratio = r.median_ns_per_event / best;

  const auto [lo, hi] = std::minmax_element(config.lengths.begin(), config.lengths.end());
  auto growth = [&](const std::string& name) {
    const BenchRow *a = nullptr, *b = nullptr;
    for (const auto& r : rep.rows) {
      if (r.paradigm != name) continue;
      if (r.length == *lo) a = &r;
      if (r.length == *hi) b = &r;
    }
    return (a && b && *lo != *hi) ? b->median_ns_per_event / a->median_ns_per_event : 0.0;
  };
  rep.recurrent_growth = growth("recurrent");
  rep.parallel_growth = growth("parallel");
  return rep;
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["dim"] = dim;
  j["repeats"] = repeats;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json o;
    o["paradigm"] = r.paradigm;
    o["history_length"] = r.length;
    o["timed_events"] = r.events;
    o["median_ns_per_event"] = r.median_ns_per_event;
    o["mean_ns_per_event"] = r.mean_ns_per_event;
    o["throughput_eps"] = r.throughput_eps;
    o["peak_memory_bytes"] = r.peak_memory_bytes;
    o["ratio_to_fastest"] = r.ratio;
    j["rows"].push_back(o);
  }
  if (recurrent_growth > 0.0) {
    j["constant_time_check"] = {{"recurrent_growth", recurrent_growth},
                                {"recurrent_pass", recurrent_growth < 1.5},
                                {"parallel_growth", parallel_growth},
                                {"parallel_pass", parallel_growth > 2.0}};
  }
  return j.dump(2);
}

std::string BenchReport::to_table() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %10s %16s %16s %10s\n", "paradigm", "L", "ns/event (med)",
                "events/s", "ratio");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %10zu %16.1f %16.1f %9.2fx\n", r.paradigm.c_str(), r.length,
                  r.median_ns_per_event, r.throughput_eps, r.ratio);
    out += buf;
  }
  if (recurrent_growth > 0.0) {
    std::snprintf(buf, sizeof buf, "recurrent growth %.3fx (%s, limit 1.5x)\n", recurrent_growth,
                  recurrent_growth < 1.5 ? "ok" : "FAIL");
    out += buf;
  }
  if (parallel_growth > 0.0) {
    std::snprintf(buf, sizeof buf, "parallel growth  %.3fx (%s, needs > 2x)\n", parallel_growth,
                  parallel_growth > 2.0 ? "ok" : "FAIL");
    out += buf;
  }
  return out;
}

}  // namespace grn
