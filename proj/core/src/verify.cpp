// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

#include "grn/autodiff.hpp"
#include "grn/checkpoint.hpp"
#include "grn/grad_check.hpp"
#include "grn/metrics.hpp"
#include "grn/model.hpp"
#include "grn/nn_ops.hpp"
#include "grn/retention.hpp"
#include "grn/rng.hpp"
#include "grn/run_config.hpp"
#include "grn/temporal_graph.hpp"
#include "grn/training.hpp"

namespace grn {
namespace {

// Empty string = trial passed.
using Trial = std::function<std::string(std::uint64_t seed)>;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

class Runner {
 public:
  Runner(const VerifyOptions& o, VerifyReport& r) : opt_(o), rep_(r) {}

  void run(const std::string& module, const std::string& family, const std::string& property,
           std::size_t trials, const Trial& trial) {
    PropertyOutcome out{module, family, property, true, trials, 0, {}};
    for (std::size_t i = 0; i < trials; ++i) {
      const std::uint64_t s = mix_seed(opt_.seed, property, i);
      std::string err;
      try {
        err = trial(s);
      } catch (const std::exception& e) {
        err = std::string("exception: ") + e.what();
      }
      if (!err.empty()) {
        out.passed = false;
        out.failing_seed = s;
        out.detail = err;
        out.trials = i + 1;
        break;
      }
    }
    rep_.outcomes.push_back(out);
    if (opt_.on_result) opt_.on_result(out);
  }

 private:
  const VerifyOptions& opt_;
  VerifyReport& rep_;
};

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  return rng_uniform(rng, r, c, -scale, scale);
}

double rel_diff(const Matrix& a, const Matrix& b) {
  return max_abs_diff(a, b) / std::max(max_abs(a), 1e-300);
}

// Random event stream: non-decreasing times with ties, edge features, labels.
EventStream random_stream(Rng& rng, std::size_t nodes, std::size_t events, std::size_t feat) {
  EventStream s;
  s.num_nodes = nodes;
  s.edge_feat_dim = feat;
  for (std::size_t i = 0; i < nodes; ++i) s.raw_ids.push_back(std::to_string(i));
  double t = 0.0;
  for (std::size_t i = 0; i < events; ++i) {
    if (rng.uniform() < 0.7) t += std::floor(rng.uniform(1.0, 5.0));
    Event e;
    e.src = rng.uniform_index(nodes);
    e.dst = (e.src + 1 + rng.uniform_index(nodes - 1)) % nodes;
    e.t = t;
    for (std::size_t f = 0; f < feat; ++f) e.edge_feat.push_back(std::round(rng.uniform(-4, 4) * 8) / 8);
    e.label = static_cast<int>(rng.uniform_index(2));
    s.events.push_back(std::move(e));
  }
  return s;
}

bool same_events(const std::vector<Event>& a, const std::vector<Event>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].src != b[i].src || a[i].dst != b[i].dst || a[i].t != b[i].t ||
        a[i].edge_feat != b[i].edge_feat || a[i].label != b[i].label)
      return false;
  }
  return true;
}

std::string temp_path(const std::string& stem) {
  return (std::filesystem::temp_directory_path() /
          (stem + "_" + std::to_string(::getpid()) + ".tmp"))
      .string();
}

// ---------------------------------------------------------------- tensor

std::string matmul_assoc(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t m = 1 + rng.uniform_index(64), n = 1 + rng.uniform_index(64),
                    p = 1 + rng.uniform_index(64), q = 1 + rng.uniform_index(64);
  const Matrix a = random_matrix(rng, m, n), b = random_matrix(rng, n, p), c = random_matrix(rng, p, q);
  const double e = rel_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c)));
  return e < 1e-9 ? "" : fmt("relative error %.3g", e);
}

std::string norm_moments(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t groups = 1 + rng.uniform_index(4);
  const std::size_t cols = groups * (2 + rng.uniform_index(8));
  const Matrix x = random_matrix(rng, 1 + rng.uniform_index(8), cols, rng.uniform(0.01, 100.0));
  const std::vector<double> g(cols, 1.0), b(cols, 0.0);
  const Matrix ln = layer_norm(x, 1e-12, g, b);
  const Matrix gn = group_norm(x, groups, 1e-12, g, b);
  auto check = [](const Matrix& y, std::size_t grp) -> std::string {
    const std::size_t w = y.cols() / grp;
    for (std::size_t r = 0; r < y.rows(); ++r) {
      for (std::size_t k = 0; k < grp; ++k) {
        double mean = 0.0, var = 0.0;
        for (std::size_t c = 0; c < w; ++c) mean += y(r, k * w + c);
        mean /= static_cast<double>(w);
        for (std::size_t c = 0; c < w; ++c) var += (y(r, k * w + c) - mean) * (y(r, k * w + c) - mean);
        var /= static_cast<double>(w);
        if (std::abs(mean) > 1e-10) return fmt("group mean %.3g", mean);
        if (std::abs(var - 1.0) > 1e-6) return fmt("group variance %.12g", var);
      }
    }
    return "";
  };
  std::string e = check(ln, 1);
  return e.empty() ? check(gn, groups) : e;
}

std::string gn_scale_invariance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t groups = 1 + rng.uniform_index(4);
  const std::size_t cols = groups * (4 + rng.uniform_index(8));
  // At alpha = 1e-3 the effective epsilon is 1e-6 relative to var(x), so x is
  // drawn wide enough that this stays far below the tolerance.
  const Matrix x = random_matrix(rng, 1 + rng.uniform_index(8), cols, 100.0);
  const Matrix g = random_matrix(rng, 1, cols), b = random_matrix(rng, 1, cols);
  const Matrix base = group_norm(x, groups, 1e-12, g.data(), b.data());
  for (double alpha : {1e-3, 1.0, 1e3}) {
    const double e = max_abs_diff(group_norm(scale(x, alpha), groups, 1e-12, g.data(), b.data()), base);
    if (e >= 1e-6) return fmt("alpha %.0e: diff %.3g", alpha, e);
  }
  return "";
}

std::string finite_diff_poly(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.uniform_index(6);
  std::vector<double> c(n), x(n);
  for (auto& v : c) v = rng.uniform(-2, 2);
  for (auto& v : x) v = rng.uniform(-2, 2);
  // f = Σ c_i x_i³ + x_0 x_1 − x_{n-1}²
  auto f = [&](std::span<const double> z) {
    double s = z[0] * z[1] - z[n - 1] * z[n - 1];
    for (std::size_t i = 0; i < n; ++i) s += c[i] * z[i] * z[i] * z[i];
    return s;
  };
  const auto num = finite_diff_grad(f, x, 1e-5);
  for (std::size_t i = 0; i < n; ++i) {
    double g = 3 * c[i] * x[i] * x[i];
    if (i == 0) g += x[1];
    if (i == 1) g += x[0];
    if (i == n - 1) g -= 2 * x[n - 1];
    if (std::abs(g - num[i]) > 1e-6) return fmt("coordinate diff %.3g", g - num[i]);
  }
  return "";
}

std::string determinism(std::uint64_t seed) {
  auto pipeline = [seed] {
    Rng rng(seed);
    const Matrix a = rng_init_xavier(rng, 17, 9), b = random_matrix(rng, 9, 5);
    const std::vector<double> g(5, 1.0), z(5, 0.0);
    return layer_norm(hswish(matmul(a, b)), 1e-5, g, z);
  };
  return pipeline() == pipeline() ? "" : "re-run differs";
}

// ---------------------------------------------------------------- temporal_graph

std::string csv_round_trip(std::uint64_t seed) {
  Rng rng(seed);
  const EventStream s = random_stream(rng, 3 + rng.uniform_index(20), 1 + rng.uniform_index(80),
                                      rng.uniform_index(4));
  const std::string p1 = temp_path("grn_verify_a"), p2 = temp_path("grn_verify_b");
  save_csv(s, p1);
  const EventStream s1 = load_csv(p1);
  save_csv(s1, p2);
  const EventStream s2 = load_csv(p2);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
  if (!same_events(s1.events, s2.events) || s1.raw_ids.size() != s2.raw_ids.size())
    return "load(save(.)) is not a fixpoint";
  // s1 names each node by its dense id in s.
  if (s1.size() != s.size()) return "event count changed";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Event &a = s.events[i], &b = s1.events[i];
    if (s1.raw_ids[b.src] != std::to_string(a.src) || s1.raw_ids[b.dst] != std::to_string(a.dst) ||
        a.t != b.t || a.edge_feat != b.edge_feat || a.label != b.label)
      return "event " + std::to_string(i) + " differs after reload";
  }
  return "";
}

std::string split_conservation(std::uint64_t seed) {
  Rng rng(seed);
  const EventStream s = random_stream(rng, 4 + rng.uniform_index(30), 1 + rng.uniform_index(300), 0);
  SplitSpec spec;
  spec.train_frac = rng.uniform(0.3, 0.8);
  spec.val_frac = (1.0 - spec.train_frac) / 2;
  spec.test_frac = 1.0 - spec.train_frac - spec.val_frac;
  const StreamSplit tr = chronological_split(s, spec, seed);
  if (tr.train.size() + tr.val.size() + tr.test.size() != s.size()) return "transductive split loses events";
  spec.mode = SplitSpec::Mode::Inductive;
  spec.inductive_node_frac = rng.uniform(0.05, 0.5);
  const StreamSplit in = chronological_split(s, spec, seed);
  if (in.train.size() + in.val.size() + in.test.size() + in.removed_train_events != s.size())
    return "inductive deficit != removed train events";
  for (const Event& e : in.train.events)
    if (in.unobserved[e.src] || in.unobserved[e.dst]) return "unobserved node in train";
  return "";
}

std::string neighbor_causality(std::uint64_t seed) {
  Rng rng(seed);
  const EventStream s = random_stream(rng, 3 + rng.uniform_index(10), 1 + rng.uniform_index(100), 1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t node = rng.uniform_index(s.num_nodes);
    const double qt = s.events[rng.uniform_index(s.size())].t + (rng.uniform() < 0.5 ? 0.0 : 0.5);
    const NeighborSequence seq = build_neighbor_sequence(s, node, qt, 1 + rng.uniform_index(50));
    for (double t : seq.times)
      if (!(t < qt)) return fmt("neighbour at %g visible to query at %g", t, qt);
  }
  return "";
}

// ---------------------------------------------------------------- retention_core

struct RetInstance {
  Matrix q, k, v;
  DecayMask mask;
  RetentionState state;
  std::size_t len, dim;
};

RetInstance random_retention(Rng& rng, bool allow_state) {
  static const std::size_t lens[] = {1, 2, 3, 17, 128, 512};
  static const std::size_t dims[] = {1, 4, 32};
  RetInstance r;
  r.len = lens[rng.uniform_index(6)];
  r.dim = dims[rng.uniform_index(3)];
  r.q = random_matrix(rng, r.len, r.dim);
  r.k = random_matrix(rng, r.len, r.dim);
  r.v = random_matrix(rng, r.len, r.dim);
  std::vector<double> deltas(r.len);
  for (auto& d : deltas) d = std::floor(rng.uniform(0, 50));
  const DecayPolicy pol = rng.uniform() < 0.5 ? DecayPolicy::unit() : DecayPolicy::time_decay(rng.uniform(0.001, 0.1));
  r.mask = build_decay_mask(deltas, pol);
  r.state = RetentionState::zero(r.dim);
  if (allow_state && rng.uniform() < 0.5) {
    const Matrix k0 = random_matrix(rng, 5, r.dim), v0 = random_matrix(rng, 5, r.dim);
    r.state = graph_retention(k0, k0, v0, DecayMask(std::vector<double>(5, 1.0)), r.state,
                              Paradigm::parallel(), false)
                  .state;
  }
  return r;
}

std::string paradigm_equivalence(std::uint64_t seed) {
  Rng rng(seed);
  const RetInstance r = random_retention(rng, true);
  for (bool normalized : {false, true}) {
    const RetentionResult par = graph_retention(r.q, r.k, r.v, r.mask, r.state, Paradigm::parallel(), normalized);
    std::vector<Paradigm> others = {Paradigm::recurrent(), Paradigm::chunkwise(1), Paradigm::chunkwise(2),
                                    Paradigm::chunkwise(7), Paradigm::chunkwise(r.len)};
    for (const Paradigm& p : others) {
      const RetentionResult o = graph_retention(r.q, r.k, r.v, r.mask, r.state, p, normalized);
      const double e = max_abs_diff(par.outputs, o.outputs);
      const double es = max_abs_diff(par.state.s, o.state.s);
      if (!(e < 1e-9) || !(es < 1e-9))
        return p.to_string() + (normalized ? " (normalized)" : "") + " vs parallel: L=" +
               std::to_string(r.len) + " d=" + std::to_string(r.dim) + fmt(" output diff %.3g, state diff %.3g", e, es);
    }
  }
  return "";
}

std::string parallel_causality(std::uint64_t seed) {
  Rng rng(seed);
  RetInstance r = random_retention(rng, false);
  if (r.len < 2) return "";
  const std::size_t t = rng.uniform_index(r.len - 1);
  const bool normalized = rng.uniform() < 0.5;
  const Matrix base = retention_parallel(r.q, r.k, r.v, r.mask, normalized);
  std::vector<double> w(r.mask.weights().begin(), r.mask.weights().end());
  for (std::size_t j = t + 1; j < r.len; ++j) {
    for (std::size_t c = 0; c < r.dim; ++c) {
      r.k(j, c) += rng.uniform(-10, 10);
      r.v(j, c) += rng.uniform(-10, 10);
    }
    w[j] = rng.uniform(0.01, 3.0);  // as if delta_j changed
  }
  const Matrix pert = retention_parallel(r.q, r.k, r.v, DecayMask(w), normalized);
  for (std::size_t i = 0; i <= t; ++i)
    for (std::size_t c = 0; c < r.dim; ++c)
      if (pert(i, c) != base(i, c)) return "row " + std::to_string(i) + " changed by a future perturbation";
  return "";
}

std::string state_additivity(std::uint64_t seed) {
  Rng rng(seed);
  const RetInstance r = random_retention(rng, true);
  if (r.len < 2) return "";
  const std::size_t cut = 1 + rng.uniform_index(r.len - 1);
  const RetentionResult a = retention_chunkwise(slice_rows(r.q, 0, cut), slice_rows(r.k, 0, cut),
                                                slice_rows(r.v, 0, cut), r.mask.slice(0, cut), r.state, true);
  const std::size_t rest = r.len - cut;
  const RetentionResult b = retention_chunkwise(slice_rows(r.q, cut, rest), slice_rows(r.k, cut, rest),
                                                slice_rows(r.v, cut, rest), r.mask.slice(cut, rest), a.state, true);
  const RetentionResult whole = retention_chunkwise(r.q, r.k, r.v, r.mask, r.state, true);
  const double e = max_abs_diff(b.state.s, whole.state.s);
  double ez = std::abs(b.state.weight_sum - whole.state.weight_sum);
  for (std::size_t c = 0; c < r.dim; ++c) ez = std::max(ez, std::abs(b.state.key_sum[c] - whole.state.key_sum[c]));
  return e < 1e-9 && ez < 1e-9 ? "" : fmt("state diff %.3g, sums diff %.3g", e, ez);
}

// Row rescaling by a positive factor is invisible to GN up to the epsilon
// term, whose relative effect is eps / var. Groups of the normalised output
// with variance below 1e-4 are eps-dominated (two nearly equal channels) and
// skipped; everywhere else eps / var <= 1e-8.
std::string normalization_neutrality(std::uint64_t seed) {
  Rng rng(seed);
  const RetInstance r = random_retention(rng, false);
  const std::size_t groups = r.dim % 2 == 0 ? 2 : 1;
  const std::size_t w = r.dim / groups;
  const std::vector<double> g(r.dim, 1.0), b(r.dim, 0.0);
  const Matrix na = retention_parallel(r.q, r.k, r.v, r.mask, true);
  const Matrix a = group_norm(na, groups, 1e-12, g, b);
  const Matrix u = group_norm(retention_parallel(r.q, r.k, r.v, r.mask, false), groups, 1e-12, g, b);
  for (std::size_t row = 0; row < r.len; ++row) {
    for (std::size_t k = 0; k < groups; ++k) {
      double mean = 0.0, var = 0.0;
      for (std::size_t c = k * w; c < (k + 1) * w; ++c) mean += na(row, c) / static_cast<double>(w);
      for (std::size_t c = k * w; c < (k + 1) * w; ++c) var += (na(row, c) - mean) * (na(row, c) - mean) / static_cast<double>(w);
      if (var < 1e-4) continue;
      for (std::size_t c = k * w; c < (k + 1) * w; ++c)
        if (!(std::abs(a(row, c) - u(row, c)) < 1e-6))
          return "row " + std::to_string(row) + fmt(": GN outputs differ by %.3g", std::abs(a(row, c) - u(row, c)));
    }
  }
  return "";
}

std::string v_linearity(std::uint64_t seed) {
  Rng rng(seed);
  const RetInstance r = random_retention(rng, false);
  const Matrix v2 = random_matrix(rng, r.len, r.dim);
  const double alpha = rng.uniform(-3, 3), beta = rng.uniform(-3, 3);
  const Matrix lhs = retention_parallel(r.q, r.k, add(scale(r.v, alpha), scale(v2, beta)), r.mask, false);
  const Matrix rhs = add(scale(retention_parallel(r.q, r.k, r.v, r.mask, false), alpha),
                         scale(retention_parallel(r.q, r.k, v2, r.mask, false), beta));
  const double e = max_abs_diff(lhs, rhs);
  return e < 1e-9 ? "" : fmt("linearity error %.3g", e);
}

// ---------------------------------------------------------------- grn_model

GrnConfig small_config(Rng& rng) {
  GrnConfig c;
  c.num_layers = 2;
  c.heads = 1 + rng.uniform_index(2);
  c.d_model = 8 * c.heads;
  c.gn_groups = c.heads;
  c.time_dim = 8;
  c.dropout = 0.0;
  c.edge_feat_dim = 2;
  c.decay = rng.uniform() < 0.5 ? DecayPolicy::unit() : DecayPolicy::time_decay(0.05);
  return c;
}

struct ModelRun {
  Matrix embeddings;
  std::vector<NodeUpdate> updates;
};

ModelRun model_forward(const GrnModel& model, const NodeStateTable& table, std::span<const Event> events,
                       std::span<const Query> queries, Paradigm paradigm) {
  Tape tape;
  const auto pv = bind_params(tape, model);
  BatchOutput out = forward_batch(tape, model, pv, table, events, queries, {paradigm, nullptr});
  return {tape.value(out.embeddings), std::move(out.updates)};
}

// A warmed-up table plus a second batch of events and queries over it.
struct ModelInstance {
  EventStream stream;
  NodeStateTable table;
  std::vector<Event> batch;
  std::vector<Query> queries;
};

ModelInstance model_instance(Rng& rng, const GrnModel& model, std::size_t nodes, std::size_t events) {
  ModelInstance m{random_stream(rng, nodes, events, 2), NodeStateTable::create(nodes, model.config()), {}, {}};
  const std::size_t warm = events / 2;
  ModelRun w = model_forward(model, m.table, std::span(m.stream.events).first(warm), {}, Paradigm::recurrent());
  apply_updates(m.table, std::move(w.updates));
  m.batch.assign(m.stream.events.begin() + static_cast<std::ptrdiff_t>(warm), m.stream.events.end());
  for (const Event& e : m.batch) {
    m.queries.push_back({e.src, e.t});
    m.queries.push_back({e.dst, e.t});
  }
  return m;
}

std::string model_equivalence(std::uint64_t seed) {
  Rng rng(seed);
  const GrnModel model(small_config(rng), seed);
  const ModelInstance m = model_instance(rng, model, 6, 24 + rng.uniform_index(40));
  const ModelRun par = model_forward(model, m.table, m.batch, m.queries, Paradigm::parallel());
  for (const Paradigm& p : {Paradigm::recurrent(), Paradigm::chunkwise(1), Paradigm::chunkwise(2),
                            Paradigm::chunkwise(7)}) {
    const ModelRun o = model_forward(model, m.table, m.batch, m.queries, p);
    double e = max_abs_diff(par.embeddings, o.embeddings);
    for (std::size_t i = 0; i < o.updates.size(); ++i) {
      for (std::size_t c = 0; c < o.updates[i].embedding.size(); ++c)
        e = std::max(e, std::abs(o.updates[i].embedding[c] - par.updates[i].embedding[c]));
    }
    if (!(e < 1e-7)) return p.to_string() + fmt(" vs parallel: max diff %.3g", e);
  }
  return "";
}

std::string mgr_scale_invariance(std::uint64_t seed) {
  Rng rng(seed);
  GrnConfig c = small_config(rng);
  c.norm_eps = 1e-30;
  const GrnModel model(c, seed);
  const ModelInstance m = model_instance(rng, model, 5, 20);
  const ModelRun base = model_forward(model, NodeStateTable::create(5, c), m.batch, m.queries, Paradigm::parallel());
  for (double alpha : {1e-2, 7.0}) {
    GrnModel scaled = model;
    for (const auto& layer : scaled.layers)
      for (const auto& h : layer.heads) {
        scaled.values()[h.wv] = scale(scaled.values()[h.wv], alpha);
        scaled.values()[h.bv] = scale(scaled.values()[h.bv], alpha);
      }
    const ModelRun o = model_forward(scaled, NodeStateTable::create(5, c), m.batch, m.queries, Paradigm::parallel());
    const double e = max_abs_diff(base.embeddings, o.embeddings);
    if (!(e < 1e-6)) return fmt("alpha %g: diff %.3g", alpha, e);
  }
  return "";
}

// TE off: timestamps only enter through decay, so under unit decay any
// order-preserving retiming leaves every output unchanged; TE on: it does not.
// Gate: with W1 = 0 every pre-activation is 0 = hswish(0), so the toggle is
// inert; with generic W1 it changes the output.
std::string ablation_independence(std::uint64_t seed) {
  Rng rng(seed);
  GrnConfig c = small_config(rng);
  c.decay = DecayPolicy::unit();
  EventStream s = random_stream(rng, 5, 16, 2);
  std::vector<Event> retimed = s.events;
  for (auto& e : retimed) e.t = e.t * 3.0 + 1.0;
  std::vector<Query> q, qr;
  for (std::size_t i = 0; i < s.size(); ++i) {
    q.push_back({s.events[i].src, s.events[i].t});
    qr.push_back({retimed[i].src, retimed[i].t});
  }
  auto run = [&](const GrnModel& model, const std::vector<Event>& ev, const std::vector<Query>& qs) {
    return model_forward(model, NodeStateTable::create(5, model.config()), ev, qs, Paradigm::parallel()).embeddings;
  };
  GrnConfig no_te = c;
  no_te.use_temporal_encoding = false;
  const GrnModel m_te(c, seed), m_no(no_te, seed);
  if (run(m_no, s.events, q) != run(m_no, retimed, qr)) return "retiming changed outputs without temporal encoding";
  if (max_abs_diff(run(m_te, s.events, q), run(m_te, retimed, qr)) == 0.0)
    return "retiming had no effect with temporal encoding";

  GrnConfig no_gate = c;
  no_gate.use_hswish_gate = false;
  GrnModel g_on(c, seed), g_off(no_gate, seed);
  if (max_abs_diff(run(g_on, s.events, q), run(g_off, s.events, q)) == 0.0) return "gate toggle had no effect";
  for (GrnModel* m : {&g_on, &g_off})
    for (const auto& layer : m->layers) m->values()[layer.w1].fill(0.0);
  if (run(g_on, s.events, q) != run(g_off, s.events, q)) return "gate toggle changed outputs with zero pre-activations";
  return "";
}

std::string model_determinism(std::uint64_t seed) {
  Rng r1(seed), r2(seed);
  const GrnConfig c1 = small_config(r1), c2 = small_config(r2);
  const GrnModel a(c1, seed), b(c2, seed);
  if (a.values() != b.values()) return "initialisation differs";
  const ModelInstance ma = model_instance(r1, a, 6, 30), mb = model_instance(r2, b, 6, 30);
  const ModelRun x = model_forward(a, ma.table, ma.batch, ma.queries, Paradigm::chunkwise(4));
  const ModelRun y = model_forward(b, mb.table, mb.batch, mb.queries, Paradigm::chunkwise(4));
  return x.embeddings == y.embeddings ? "" : "forward pass differs";
}

std::string embedding_update(std::uint64_t seed) {
  Rng rng(seed);
  GrnConfig c = small_config(rng);
  c.use_temporal_encoding = false;
  c.decay = DecayPolicy::unit();
  const GrnModel model(c, seed);
  ModelInstance m = model_instance(rng, model, 6, 30);
  // A query after the last event sees the same frozen input and final state
  // as the node's closing read row, whose output is the stored embedding.
  const double after = m.batch.back().t + 1.0;
  std::set<std::size_t> touched;
  for (const Event& e : m.batch) touched.insert(e.src), touched.insert(e.dst);
  std::vector<Query> probe;
  for (std::size_t v : touched) probe.push_back({v, after});
  ModelRun o = model_forward(model, m.table, m.batch, probe, Paradigm::chunkwise(3));
  apply_updates(m.table, std::move(o.updates));
  std::size_t i = 0;
  for (std::size_t v : touched) {
    for (std::size_t c2 = 0; c2 < c.d_model; ++c2)
      if (std::abs(m.table.embeddings(v, c2) - o.embeddings(i, c2)) > 1e-12)
        return "node " + std::to_string(v) + " embedding is not its last output row";
    ++i;
  }
  return "";
}

// ---------------------------------------------------------------- training

std::string check_tape_op(Rng& rng, std::size_t n_in, const std::function<Var(Tape&, std::span<const Var>)>& op,
                          std::vector<Matrix> inputs) {
  // loss = Σ op(x) ⊙ R with a fixed random R, so every output entry matters.
  Matrix weights;
  auto eval = [&](std::vector<Matrix>* grads) {
    Tape t(grads);
    std::vector<Var> vars;
    for (std::size_t i = 0; i < n_in; ++i) vars.push_back(t.param(inputs[i], i));
    Var y = op(t, vars);
    if (weights.empty()) weights = random_matrix(rng, t.value(y).rows(), t.value(y).cols());
    Var loss = ad::sum(t, ad::hadamard(t, y, t.constant(weights)));
    if (grads) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  std::vector<Matrix> grads;
  for (const auto& m : inputs) grads.emplace_back(m.rows(), m.cols());
  eval(&grads);
  for (std::size_t i = 0; i < n_in; ++i) {
    const std::size_t nc = std::min<std::size_t>(20, inputs[i].size());
    std::vector<std::size_t> coords;
    for (std::size_t k = 0; k < nc; ++k) coords.push_back(rng.uniform_index(inputs[i].size()));
    const Matrix saved = inputs[i];
    auto f = [&](std::span<const double> x) {
      std::copy(x.begin(), x.end(), inputs[i].data().begin());
      return eval(nullptr);
    };
    const auto num = finite_diff_grad(f, saved.data(), 1e-5, coords);
    inputs[i] = saved;
    for (std::size_t k = 0; k < nc; ++k) {
      const double a = grads[i].data()[coords[k]];
      const double e = relative_error(a, num[k], 1e-6);
      if (e > 1e-4)
        return "input " + std::to_string(i) + " coord " + std::to_string(coords[k]) +
               fmt(": analytic %.10g vs numeric %.10g", a, num[k]);
    }
  }
  return "";
}

std::string layer_gradients(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t r = 2 + rng.uniform_index(4), c = 4;
  auto X = [&](std::size_t rr, std::size_t cc) { return random_matrix(rng, rr, cc); };
  struct Case {
    const char* name;
    std::size_t n;
    std::function<Var(Tape&, std::span<const Var>)> op;
    std::vector<Matrix> in;
  };
  std::vector<Case> cases;
  cases.push_back({"matmul", 2, [](Tape& t, std::span<const Var> v) { return ad::matmul(t, v[0], v[1]); }, {X(r, c), X(c, 3)}});
  cases.push_back({"layer_norm", 3, [](Tape& t, std::span<const Var> v) { return ad::layer_norm(t, v[0], v[1], v[2], 1e-5); },
                   {X(r, c), X(1, c), X(1, c)}});
  cases.push_back({"group_norm", 3, [](Tape& t, std::span<const Var> v) { return ad::group_norm(t, v[0], 2, v[1], v[2], 1e-5); },
                   {X(r, c), X(1, c), X(1, c)}});
  cases.push_back({"hswish", 1, [](Tape& t, std::span<const Var> v) { return ad::hswish(t, v[0]); }, {scale(X(r, c), 5.0)}});
  cases.push_back({"sigmoid", 1, [](Tape& t, std::span<const Var> v) { return ad::sigmoid(t, v[0]); }, {scale(X(r, c), 3.0)}});
  cases.push_back({"bce", 1, [](Tape& t, std::span<const Var> v) {
                     const double y[] = {1, 0, 1, 0, 1, 0};
                     return ad::bce(t, ad::sigmoid(t, v[0]), std::span<const double>(y, 6)); },
                   {X(6, 1)}});
  cases.push_back({"softmax_cross_entropy", 1, [](Tape& t, std::span<const Var> v) {
                     const std::size_t y[] = {0, 2, 1, 2};
                     return ad::softmax_cross_entropy(t, v[0], std::span<const std::size_t>(y, 4)); },
                   {X(4, 3)}});
  const bool normalized = rng.uniform() < 0.5;
  const std::size_t len = 6;
  cases.push_back({"retention", 3, [normalized](Tape& t, std::span<const Var> v) {
                     static const RetentionState st = [] {
                       Rng g(7);
                       const Matrix k = rng_uniform(g, 3, 4, -1, 1), vv = rng_uniform(g, 3, 4, -1, 1);
                       return graph_retention(k, k, vv, DecayMask({1.0, 0.5, 2.0}), RetentionState::zero(4),
                                              Paradigm::parallel(), false).state;
                     }();
                     const ad::RetentionSegment segs[] = {{{0, 2, 3}, {0.0, 1.0, 0.5}, nullptr},
                                                          {{1, 4, 5}, {1.5, 0.0, 1.0}, &st}};
                     return ad::retention(t, v[0], v[1], v[2], segs, Paradigm::recurrent(), normalized); },
                   {X(len, 4), X(len, 4), X(len, 4)}});
  for (auto& cs : cases) {
    std::string e = check_tape_op(rng, cs.n, cs.op, cs.in);
    if (!e.empty()) return std::string(cs.name) + ": " + e;
  }
  return "";
}

std::string model_gradient(std::uint64_t seed) {
  Rng rng(seed);
  GrnConfig c = small_config(rng);
  c.num_layers = 1;
  GrnModel model(c, seed);
  // Move off the initial point (zero biases, unit gains), where rows of fresh
  // nodes are constant and stacked norms make the loss too stiff for h = 1e-5.
  for (Matrix& p : model.values())
    for (double& x : p.data()) x += rng.uniform(-0.3, 0.3);
  ModelInstance m = model_instance(rng, model, 6, 24);
  EventStream universe = m.stream;
  Rng neg_rng(seed + 1);
  const std::vector<Event> negs = negative_sample(m.batch, universe, neg_rng);
  std::vector<Matrix> grads = model.zeros_like();
  batch_loss(model, m.table, m.batch, negs, Paradigm::chunkwise(4), nullptr, &grads);
  for (int k = 0; k < 20; ++k) {
    const std::size_t p = rng.uniform_index(model.num_params());
    const std::size_t idx = rng.uniform_index(model.values()[p].size());
    const double x0 = model.values()[p].data()[idx];
    auto f = [&](std::span<const double> x) {
      model.values()[p].data()[idx] = x[0];
      return batch_loss(model, m.table, m.batch, negs, Paradigm::chunkwise(4), nullptr, nullptr);
    };
    const double num = finite_diff_grad(f, std::span<const double>(&x0, 1), 1e-5)[0];
    model.values()[p].data()[idx] = x0;
    const double a = grads[p].data()[idx];
    if (relative_error(a, num, 1e-6) > 1e-4)
      return model.names()[p] + "[" + std::to_string(idx) + "]" + fmt(": analytic %.10g vs numeric %.10g", a, num);
  }
  return "";
}

EventStream tiny_synth(std::uint64_t seed) {
  SynthParams sp;
  sp.num_users = 10;
  sp.num_items = 10;
  sp.period = 60;
  sp.length = 600;
  Rng rng(seed);
  return synth_generate(sp, rng);
}

GrnConfig tiny_model() {
  GrnConfig c;
  c.num_layers = 1;
  c.d_model = 16;
  c.heads = 2;
  c.gn_groups = 2;
  c.time_dim = 16;
  c.dropout = 0.0;
  return c;
}

std::string loss_monotonicity(std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 10;
  tc.patience = 100;
  tc.batch_size = 50;
  tc.lr = 1e-3;
  tc.seed = seed;
  tc.final_test = false;
  const FitResult r = fit(tiny_synth(seed), tiny_model(), tc);
  const double l1 = r.history.front().train_loss, l10 = r.history.back().train_loss;
  return r.history.size() == 10 && l10 < l1 ? "" : fmt("loss epoch 1 %.6g, epoch 10 %.6g", l1, l10);
}

double brute_ap(std::span<const double> s, std::span<const double> y) {
  // Precision at every positive over the stable descending order.
  std::vector<std::size_t> idx(s.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 1; i < idx.size(); ++i)
    for (std::size_t j = i; j > 0 && s[idx[j]] > s[idx[j - 1]]; --j) std::swap(idx[j], idx[j - 1]);
  double hits = 0, total = 0;
  for (std::size_t r = 0; r < idx.size(); ++r)
    if (y[idx[r]] == 1.0) total += ++hits / static_cast<double>(r + 1);
  return total / hits;
}

double brute_auc(std::span<const double> s, std::span<const double> y) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1.0 && y[j] == 0.0) {
        pairs += 1;
        good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return good / pairs;
}

std::string metric_oracles(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.uniform_index(19);
  std::vector<double> s(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::round(rng.uniform() * 8) / 8;  // coarse grid forces ties
    y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  y[0] = 1.0;
  y[1] = 0.0;
  const double ap = average_precision(s, y), auc = auc_roc(s, y);
  if (std::abs(ap - brute_ap(s, y)) > 1e-12) return fmt("AP %.15g vs oracle %.15g", ap, brute_ap(s, y));
  if (std::abs(auc - brute_auc(s, y)) > 1e-12) return fmt("AUC %.15g vs oracle %.15g", auc, brute_auc(s, y));
  return "";
}

std::string checkpoint_round_trip(std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 100;
  tc.seed = seed;
  tc.final_test = false;
  const EventStream s = tiny_synth(seed);
  const FitResult r = fit(s, tiny_model(), tc);
  RunConfig run;
  run.synth = SynthParams{};
  run.train = tc;
  const std::string path = temp_path("grn_verify_ckpt");
  save_checkpoint(path, make_checkpoint(run, r.model, r.adam));
  const GrnModel back = restore_model(load_checkpoint(path));
  std::filesystem::remove(path);
  const StreamSplit split = chronological_split(s, tc.split, seed);
  const MetricsReport a = evaluate_segment(r.model, s, split, Segment::Test, Paradigm::recurrent(), tc.batch_size, 5);
  const MetricsReport b = evaluate_segment(back, s, split, Segment::Test, Paradigm::recurrent(), tc.batch_size, 5);
  return a.to_json(false) == b.to_json(false) ? "" : "metrics differ after reload";
}

std::string early_stopping(std::uint64_t seed) {
  Rng rng(seed);
  TrainConfig tc;
  tc.epochs = 8;
  tc.patience = rng.uniform_index(3);
  tc.batch_size = 100;
  tc.lr = 1e-3;
  tc.seed = seed;
  tc.final_test = false;
  const FitResult r = fit(tiny_synth(seed), tiny_model(), tc);
  const std::size_t ran = r.history.size();
  if (ran > r.best_epoch + tc.patience + 1) return "ran past best + patience + 1";
  if (ran < tc.epochs && ran != r.best_epoch + tc.patience + 1) return "stopped before patience ran out";
  return "";
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.passed; });
}

std::size_t VerifyReport::family_count() const {
  std::set<std::string> f;
  for (const auto& o : outcomes) f.insert(o.family);
  return f.size();
}

std::string VerifyReport::traceability_table() const {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-28s %-14s %7s  %s\n", "module", "property", "family", "trials", "status");
  out << buf;
  for (const auto& o : outcomes) {
    std::snprintf(buf, sizeof buf, "%-16s %-28s %-14s %7zu  %s\n", o.module.c_str(), o.property.c_str(),
                  o.family.c_str(), o.trials, o.passed ? "pass" : "FAIL");
    out << buf;
  }
  return out.str();
}

std::string format_outcome(const PropertyOutcome& o) {
  std::string s = (o.passed ? "PASS " : "FAIL ") + o.module + "/" + o.property + " (" +
                  std::to_string(o.trials) + " trials)";
  if (!o.passed) s += " seed=" + std::to_string(o.failing_seed) + ": " + o.detail;
  return s;
}

VerifyReport run_verify(const VerifyOptions& options) {
  VerifyReport rep;
  Runner run(options, rep);
  const bool prior = fault::recurrent_sign_flip();
  fault::set_recurrent_sign_flip(options.inject_fault);
  struct Restore {
    bool v;
    ~Restore() { fault::set_recurrent_sign_flip(v); }
  } restore{prior};

  run.run("tensor_kernel", "algebra", "matmul_associativity", 50, matmul_assoc);
  run.run("tensor_kernel", "normalization", "norm_moments", 50, norm_moments);
  run.run("tensor_kernel", "invariance", "gn_scale_invariance", 50, gn_scale_invariance);
  run.run("tensor_kernel", "gradient", "finite_diff_polynomial", 50, finite_diff_poly);
  run.run("tensor_kernel", "determinism", "pipeline_determinism", 10, determinism);

  run.run("temporal_graph", "round_trip", "csv_round_trip", 20, csv_round_trip);
  run.run("temporal_graph", "conservation", "split_conservation", 50, split_conservation);
  run.run("temporal_graph", "causality", "neighbor_causality", 30, neighbor_causality);

  run.run("retention_core", "equivalence", "paradigm_equivalence", 60, paradigm_equivalence);
  run.run("retention_core", "causality", "parallel_causality", 50, parallel_causality);
  run.run("retention_core", "algebra", "state_additivity", 50, state_additivity);
  run.run("retention_core", "invariance", "normalization_neutrality", 50, normalization_neutrality);
  run.run("retention_core", "algebra", "v_linearity", 50, v_linearity);

  run.run("grn_model", "equivalence", "model_paradigm_equivalence", 10, model_equivalence);
  run.run("grn_model", "invariance", "mgr_scale_invariance", 10, mgr_scale_invariance);
  run.run("grn_model", "ablation", "ablation_independence", 5, ablation_independence);
  run.run("grn_model", "determinism", "model_determinism", 5, model_determinism);
  run.run("grn_model", "consistency", "embedding_update", 10, embedding_update);

  run.run("training", "gradient", "layer_gradients", 5, layer_gradients);
  run.run("training", "gradient", "model_gradient", 3, model_gradient);
  run.run("training", "convergence", "loss_monotonicity", 1, loss_monotonicity);
  run.run("training", "oracle", "metric_oracles", 1000, metric_oracles);
  run.run("training", "round_trip", "checkpoint_round_trip", 1, checkpoint_round_trip);
  run.run("training", "early_stopping", "early_stopping_patience", 2, early_stopping);
  return rep;
}

}  // namespace grn
