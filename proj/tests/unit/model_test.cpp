// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "grn/model.hpp"
#include "grn/nn_ops.hpp"

namespace grn {
namespace {

GrnConfig tiny(std::size_t heads = 1, std::size_t layers = 2) {
  GrnConfig c;
  c.num_layers = layers;
  c.heads = heads;
  c.d_model = 8 * heads;
  c.gn_groups = heads;
  c.time_dim = 8;
  c.dropout = 0.0;
  c.edge_feat_dim = 2;
  return c;
}

std::vector<Event> random_events(std::uint64_t seed, std::size_t nodes, std::size_t n, double t0 = 0) {
  Rng rng(seed);
  std::vector<Event> out;
  double t = t0;
  for (std::size_t i = 0; i < n; ++i) {
    t += std::floor(rng.uniform(0, 3));
    const std::size_t a = rng.uniform_index(nodes);
    std::size_t b = rng.uniform_index(nodes - 1);
    if (b >= a) ++b;
    out.push_back({a, b, t, {rng.uniform(-1, 1), rng.uniform(-1, 1)}, {}});
  }
  return out;
}

struct Forward {
  Matrix z;
  std::vector<NodeUpdate> updates;
};

Forward run(const GrnModel& model, const NodeStateTable& table, std::span<const Event> events,
        std::span<const Query> queries, Paradigm p) {
  Tape t;
  const auto pv = bind_params(t, model);
  BatchOutput o = forward_batch(t, model, pv, table, events, queries, {p, nullptr});
  return {t.value(o.embeddings), std::move(o.updates)};
}

std::vector<Query> endpoint_queries(std::span<const Event> evs) {
  std::vector<Query> q;
  for (const Event& e : evs) {
    q.push_back({e.src, e.t});
    q.push_back({e.dst, e.t});
  }
  return q;
}

TEST(TemporalEncode, SpotValues) {
  for (double v : temporal_encode(0.0, 16)) EXPECT_EQ(v, 1.0);
  for (double dt : {0.3, 1.0, 17.5}) EXPECT_EQ(temporal_encode(dt, 5)[0], std::cos(dt));
  EXPECT_NEAR(temporal_encode(1.0, 4)[2], 0.877583, 1e-6);
  EXPECT_NEAR(temporal_encode(1.0, 4)[2], std::cos(0.5), 1e-9);
  EXPECT_THROW(temporal_encode(-1.0, 4), std::invalid_argument);
}

TEST(Message, OnlyEncodingSurvivesZeroInputs) {
  GrnConfig c = tiny();
  const Matrix w_x(8, 8, 0.3), w_e(2, 8, -0.2);
  const double deltas[] = {0, 0, 0};
  const Matrix m = message(Matrix(3, 8), Matrix(3, 2), deltas, w_x, w_e, c);
  EXPECT_EQ(m, Matrix(3, 8, 1.0));
  c.use_temporal_encoding = false;
  EXPECT_EQ(message(Matrix(3, 8), Matrix(3, 2), deltas, w_x, w_e, c), Matrix(3, 8));
}

TEST(Message, ComponentwiseSum) {
  GrnConfig c;
  c.d_model = 2;
  c.heads = 1;
  c.gn_groups = 1;
  c.time_dim = 2;
  c.edge_feat_dim = 1;
  // Δt = 2π makes the first encoding channel exactly cos(2π) = 1.
  const double dt = 2 * std::numbers::pi;
  const double cc = dt * std::pow(std::sqrt(2.0), -1.0 / std::sqrt(2.0));
  const double deltas[] = {dt};
  const Matrix m = message(Matrix::from_rows({{1, 2}}), Matrix::from_rows({{1}}), deltas, Matrix::identity(2),
                           Matrix::from_rows({{0.5, 0.5}}), c);
  EXPECT_NEAR(m(0, 0), 2.5, 1e-12);
  EXPECT_NEAR(m(0, 1), 2.5 + std::cos(cc), 1e-12);
  EXPECT_THROW(message(Matrix(2, 2), Matrix(1, 1), deltas, Matrix::identity(2), Matrix(1, 2), c), std::invalid_argument);
}

TEST(GrnConfig, ValidationRejectsBadShapes) {
  GrnConfig c = tiny(2);
  c.gn_groups = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny(2);
  c.time_dim = 100;
  EXPECT_THROW(GrnModel(c, 0), std::invalid_argument);
  c = tiny(3);
  c.d_model = 16;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = tiny();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(GrnModel, DeterministicInitAndNamedParams) {
  const GrnModel a(tiny(2), 11), b(tiny(2), 11), c(tiny(2), 12);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
  EXPECT_EQ(a.param("layer0.ln1.gain"), Matrix(1, 16, 1.0));
  EXPECT_EQ(a.param("layer1.head1.b_v"), Matrix(1, 8));
  EXPECT_EQ(a.param("layer0.head0.W_q").rows(), 8u);
  EXPECT_THROW(a.index("nope"), std::out_of_range);
}

TEST(GrnBlock, ResidualIdentityWithZeroWeights) {
  GrnModel model(tiny(2, 1), 3);
  for (const auto& h : model.layers[0].heads)
    for (std::size_t i : {h.wq, h.wk, h.wv, h.bq, h.bk, h.bv}) model.values()[i].fill(0.0);
  model.values()[model.layers[0].w1].fill(0.0);
  model.values()[model.layers[0].w2].fill(0.0);
  Rng rng(4);
  const Matrix xq = rng_uniform(rng, 2, 16, -1, 1), xm = rng_uniform(rng, 3, 16, -1, 1);
  Tape t;
  const auto pv = bind_params(t, model);
  const SequenceSpec seqs[] = {{{2, 0, 3}, {1.0, 0.0, 1.0}, {}}, {{4, 1}, {1.0, 0.0}, {}}};
  const Var o = grn_block_forward(t, model, pv, 0, t.constant(xq), t.constant(xm), seqs, Paradigm::parallel(), nullptr);
  EXPECT_EQ(t.value(o), xq);
}

TEST(GrnBlock, HandTraceSingleRow) {
  GrnConfig c;
  c.num_layers = 1;
  c.d_model = 2;
  c.heads = 1;
  c.gn_groups = 1;
  c.time_dim = 2;
  c.dropout = 0;
  GrnModel model(c, 0);
  const auto& li = model.layers[0];
  model.values()[li.gn_b] = Matrix::from_rows({{0.1, -0.2}});
  model.values()[li.w1] = Matrix::identity(2);
  model.values()[li.w2] = Matrix::from_rows({{2, 0}, {0, 3}});
  // A lone read row has an empty history, so retention gives 0 and GN gives its bias.
  Tape t;
  const auto pv = bind_params(t, model);
  const SequenceSpec seqs[] = {{{0}, {0.0}, {}}};
  const Var o = grn_block_forward(t, model, pv, 0, t.constant(Matrix::from_rows({{1, 3}})), t.constant(Matrix(0, 2)),
                                  seqs, Paradigm::recurrent(), nullptr);
  const double h0 = 1.1, h1 = 2.8, mu = 1.95;
  const double sd = std::sqrt(0.85 * 0.85 + c.norm_eps);
  const double n0 = (h0 - mu) / sd, n1 = (h1 - mu) / sd;
  auto hs = [](double x) { return x * std::clamp(x + 3, 0.0, 6.0) / 6; };
  EXPECT_NEAR(t.value(o)(0, 0), h0 + 2 * hs(n0), 1e-12);
  EXPECT_NEAR(t.value(o)(0, 1), h1 + 3 * hs(n1), 1e-12);
}

TEST(Mgr, ZeroValueHeadGivesGroupBias) {
  GrnModel model(tiny(2, 1), 5);
  const auto& hd = model.layers[0].heads[1];
  model.values()[hd.wv].fill(0.0);
  model.values()[model.layers[0].gn_b] = Matrix(1, 16, 0.25);
  Rng rng(6);
  const Matrix x = rng_uniform(rng, 4, 16, -1, 1);
  Tape t;
  const auto pv = bind_params(t, model);
  const SequenceSpec seqs[] = {{{0, 1, 2, 3}, {1, 1, 0, 1}, {}}};
  const Matrix& o = t.value(mgr_forward(t, model, pv, 0, t.constant(x), seqs, Paradigm::parallel()));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 8; c < 16; ++c) EXPECT_DOUBLE_EQ(o(r, c), 0.25);
  EXPECT_GT(std::abs(o(3, 0) - 0.25), 1e-6);
}

TEST(Mgr, PositiveValueScaleInvariance) {
  GrnConfig c = tiny(2, 1);
  c.norm_eps = 1e-30;
  GrnModel model(c, 7);
  Rng rng(8);
  const Matrix x = rng_uniform(rng, 6, 16, -1, 1);
  const SequenceSpec seqs[] = {{{0, 1, 2}, {1, 0.5, 1}, {}}, {{3, 4, 5}, {1, 1, 0}, {}}};
  auto eval = [&](const GrnModel& m) {
    Tape t;
    const auto pv = bind_params(t, m);
    return t.value(mgr_forward(t, m, pv, 0, t.constant(x), seqs, Paradigm::chunkwise(2)));
  };
  const Matrix base = eval(model);
  for (auto& h : model.layers[0].heads) model.values()[h.wv] = scale(model.values()[h.wv], 2.0);
  EXPECT_LT(max_abs_diff(base, eval(model)), 1e-6);
}

TEST(Heads, ZeroWeightsGiveHalfAndUniform) {
  GrnModel link(tiny(), 1);
  for (std::size_t i : {link.out1_w, link.out1_b, link.out2_w, link.out2_b}) link.values()[i].fill(0.0);
  Rng rng(9);
  Tape t;
  auto pv = bind_params(t, link);
  const Var z = t.constant(rng_uniform(rng, 3, 8, -5, 5));
  for (double p : t.value(link_probability(t, link, pv, z, z)).data()) EXPECT_EQ(p, 0.5);

  GrnConfig cc = tiny();
  cc.task = Task::NodeClassification;
  cc.num_classes = 4;
  GrnModel cls(cc, 1);
  for (std::size_t i : {cls.out1_w, cls.out1_b, cls.out2_w, cls.out2_b}) cls.values()[i].fill(0.0);
  Tape t2;
  pv = bind_params(t2, cls);
  const Matrix probs = class_probabilities(t2.value(class_logits(t2, cls, pv, t2.constant(rng_uniform(rng, 3, 8, -1, 1)))), 4);
  for (double p : probs.data()) EXPECT_DOUBLE_EQ(p, 0.25);
  EXPECT_THROW(link_probability(t2, cls, pv, t2.constant(Matrix(1, 8)), t2.constant(Matrix(1, 8))), std::logic_error);
}

TEST(Heads, HandSetLinkValue) {
  GrnConfig c;
  c.num_layers = 0;
  c.d_model = 1;
  c.heads = 1;
  c.gn_groups = 1;
  c.time_dim = 1;
  GrnModel m(c, 0);
  m.values()[m.out1_w] = Matrix::from_rows({{1}, {1}});
  m.values()[m.out1_b] = Matrix(1, 1);
  m.values()[m.out2_w] = Matrix::from_rows({{1}});
  m.values()[m.out2_b] = Matrix(1, 1);
  Tape t;
  const auto pv = bind_params(t, m);
  const Var z = t.constant(Matrix::from_rows({{1}}));
  // hswish(2) = 2·5/6
  EXPECT_NEAR(t.value(link_probability(t, m, pv, z, z))(0, 0), 1 / (1 + std::exp(-5.0 / 3.0)), 1e-15);
}

TEST(Heads, ProbabilitiesSumToOneAndBinaryIsLogistic) {
  Rng rng(10);
  const Matrix logits = rng_uniform(rng, 5, 3, -4, 4);
  const Matrix p = class_probabilities(logits, 3);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(p(r, 0) + p(r, 1) + p(r, 2), 1.0, 1e-12);
  const Matrix bin = class_probabilities(Matrix::from_rows({{0.7}, {-2}}), 2);
  for (std::size_t r = 0; r < 2; ++r) {
    const double a = r == 0 ? 0.7 : -2;
    const Matrix sm = softmax_rows(Matrix::from_rows({{0.0, a}}));
    EXPECT_NEAR(bin(r, 1), sm(0, 1), 1e-12);
    EXPECT_NEAR(bin(r, 0) + bin(r, 1), 1.0, 1e-12);
  }
}

TEST(ForwardBatch, ZeroLayersReturnsInputRows) {
  const GrnModel m(tiny(1, 0), 2);
  NodeStateTable table = NodeStateTable::create(4, m.config());
  table.embeddings(1, 3) = 0.5;
  table.has_history[1] = 1;
  table.last_update[1] = 2.0;
  const Query q[] = {{1, 5.0}, {2, 5.0}};
  const Forward r = run(m, table, {}, q, Paradigm::parallel());
  const auto te = temporal_encode(3.0, 8);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_DOUBLE_EQ(r.z(0, c), te[c] + (c == 3 ? 0.5 : 0.0));
    EXPECT_DOUBLE_EQ(r.z(1, c), 1.0);
  }
}

TEST(ForwardBatch, ParadigmsAgreeAcrossStack) {
  for (std::size_t heads : {1, 2})
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      GrnConfig c = tiny(heads);
      c.gn_groups = heads;
      c.decay = seed % 2 ? DecayPolicy::time_decay(0.1) : DecayPolicy::unit();
      const GrnModel m(c, seed);
      NodeStateTable table = NodeStateTable::create(7, c);
      const auto warm = random_events(seed, 7, 20);
      apply_updates(table, run(m, table, warm, {}, Paradigm::recurrent()).updates);
      const auto batch = random_events(seed + 50, 7, 30, warm.back().t);
      const auto q = endpoint_queries(batch);
      const Forward par = run(m, table, batch, q, Paradigm::parallel());
      const Forward full = run(m, table, batch, q, Paradigm::chunkwise(1000));
      EXPECT_LT(max_abs_diff(par.z, full.z), 1e-9);
      for (Paradigm p : {Paradigm::recurrent(), Paradigm::chunkwise(1), Paradigm::chunkwise(5)}) {
        const Forward o = run(m, table, batch, q, p);
        EXPECT_LT(max_abs_diff(par.z, o.z), 1e-7) << p.to_string() << " heads " << heads;
        ASSERT_EQ(o.updates.size(), par.updates.size());
        for (std::size_t i = 0; i < o.updates.size(); ++i)
          for (std::size_t k = 0; k < c.num_layers * heads; ++k)
            EXPECT_LT(max_abs_diff(o.updates[i].states[k].s, par.updates[i].states[k].s), 1e-7);
      }
    }
}

TEST(ForwardBatch, QueriesIgnoreLaterEvents) {
  const GrnModel m(tiny(2), 3);
  const NodeStateTable table = NodeStateTable::create(6, m.config());
  auto evs = random_events(3, 6, 20);
  const Query q[] = {{evs[10].src, evs[10].t}, {evs[10].dst, evs[10].t}};
  std::vector<Event> prefix;
  for (const Event& e : evs)
    if (e.t < evs[10].t) prefix.push_back(e);
  const Forward a = run(m, table, evs, q, Paradigm::recurrent());
  const Forward b = run(m, table, prefix, q, Paradigm::recurrent());
  EXPECT_LT(max_abs_diff(a.z, b.z), 1e-12);
}

TEST(ForwardBatch, EmptyHistoryDependsOnlyOnOwnRow) {
  const GrnModel m(tiny(1), 4);
  const NodeStateTable table = NodeStateTable::create(6, m.config());
  const auto evs = random_events(4, 5, 10);  // node 5 never appears
  const Query q[] = {{5, 100.0}};
  EXPECT_EQ(run(m, table, evs, q, Paradigm::parallel()).z, run(m, table, {}, q, Paradigm::parallel()).z);
}

TEST(ForwardBatch, EvalDeterministicAndUpdatesApplied) {
  const GrnModel m(tiny(2), 5);
  NodeStateTable table = NodeStateTable::create(6, m.config());
  const auto evs = random_events(5, 6, 15);
  const auto q = endpoint_queries(evs);
  Forward a = run(m, table, evs, q, Paradigm::chunkwise(4));
  const Forward b = run(m, table, evs, q, Paradigm::chunkwise(4));
  EXPECT_EQ(a.z, b.z);
  std::set<std::size_t> touched;
  for (const Event& e : evs) touched.insert(e.src), touched.insert(e.dst);
  EXPECT_EQ(a.updates.size(), touched.size());
  apply_updates(table, std::move(a.updates));
  for (std::size_t v : touched) {
    EXPECT_TRUE(table.has_history[v]);
    EXPECT_GT(max_abs(slice_rows(table.embeddings, v, 1)), 0.0);
  }
}

TEST(ForwardBatch, DropoutOnlyInTraining) {
  GrnConfig c = tiny(1);
  c.dropout = 0.5;
  const GrnModel m(c, 6);
  const NodeStateTable table = NodeStateTable::create(6, c);
  const auto evs = random_events(6, 6, 12);
  const auto q = endpoint_queries(evs);
  const Forward eval = run(m, table, evs, q, Paradigm::parallel());
  Tape t;
  const auto pv = bind_params(t, m);
  Rng rng(1);
  const Matrix train = t.value(forward_batch(t, m, pv, table, evs, q, {Paradigm::parallel(), &rng}).embeddings);
  EXPECT_GT(max_abs_diff(eval.z, train), 1e-6);
}

TEST(ForwardBatch, RejectsUnknownNodeAndFeatureMismatch) {
  const GrnModel m(tiny(1), 7);
  const NodeStateTable table = NodeStateTable::create(3, m.config());
  const Query bad[] = {{3, 1.0}};
  EXPECT_THROW(run(m, table, {}, bad, Paradigm::parallel()), std::out_of_range);
  const Event e[] = {{0, 1, 1.0, {1.0}, {}}};
  EXPECT_THROW(run(m, table, e, {}, Paradigm::parallel()), std::invalid_argument);
}

}  // namespace
}  // namespace grn
