// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "grn/nn_ops.hpp"

namespace grn {

void GrnConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("GrnConfig: " + what); };
  if (d_model == 0) fail("d_model must be >= 1");
  if (heads == 0) fail("heads must be >= 1");
  if (d_model % effective_heads() != 0) fail("d_model must be divisible by the head count");
  if (reduce_head_dim && head_slot() % 2 != 0) fail("reduce_head_dim needs an even head width");
  if (gn_groups == 0 || d_model % gn_groups != 0) fail("d_model must be divisible by gn_groups");
  if (time_dim == 0) fail("time_dim must be >= 1");
  if (time_dim > d_model) fail("time_dim must not exceed d_model");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(norm_eps > 0.0)) fail("norm_eps must be positive");
  if (num_classes < 2) fail("num_classes must be >= 2");
}

std::vector<double> temporal_encode(double delta_t, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("temporal_encode: dim must be >= 1");
  if (delta_t < 0.0) throw std::invalid_argument("temporal_encode: negative time interval");
  const double root = std::sqrt(static_cast<double>(dim));
  std::vector<double> out(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out[i] = std::cos(delta_t * std::pow(root, -static_cast<double>(i) / root));
  return out;
}

GrnModel::GrnModel(const GrnConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t hw = config_.head_width();
  auto xavier = [seed](const std::string& name, std::size_t r, std::size_t c) {
    Rng rng(mix_seed(seed, name));
    return rng_init_xavier(rng, r, c);
  };
  auto ones = [](std::size_t c) { return Matrix(1, c, 1.0); };

  w_x = add("input.W_x", xavier("input.W_x", d, d));
  w_e = add("input.W_e", xavier("input.W_e", config_.edge_width(), d));
  for (std::size_t l = 0; l < config_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIdx li;
    li.ln1_g = add(p + "ln1.gain", ones(d));
    li.ln1_b = add(p + "ln1.bias", Matrix(1, d));
    for (std::size_t h = 0; h < config_.effective_heads(); ++h) {
      const std::string ph = p + "head" + std::to_string(h) + ".";
      HeadIdx hi;
      hi.wq = add(ph + "W_q", xavier(ph + "W_q", hw, hw));
      hi.wk = add(ph + "W_k", xavier(ph + "W_k", hw, hw));
      hi.wv = add(ph + "W_v", xavier(ph + "W_v", hw, hw));
      hi.bq = add(ph + "b_q", Matrix(1, hw));
      hi.bk = add(ph + "b_k", Matrix(1, hw));
      hi.bv = add(ph + "b_v", Matrix(1, hw));
      li.heads.push_back(hi);
    }
    li.gn_g = add(p + "gn.gain", ones(d));
    li.gn_b = add(p + "gn.bias", Matrix(1, d));
    li.ln2_g = add(p + "ln2.gain", ones(d));
    li.ln2_b = add(p + "ln2.bias", Matrix(1, d));
    li.w1 = add(p + "ffn.W1", xavier(p + "ffn.W1", d, d));
    li.w2 = add(p + "ffn.W2", xavier(p + "ffn.W2", d, d));
    layers.push_back(std::move(li));
  }
  final_g = add("final_ln.gain", ones(d));
  final_b = add("final_ln.bias", Matrix(1, d));
  const std::string head = config_.task == Task::LinkPrediction ? "link." : "class.";
  const std::size_t in = config_.task == Task::LinkPrediction ? 2 * d : d;
  const std::size_t out =
      config_.task == Task::LinkPrediction ? 1 : (config_.num_classes == 2 ? 1 : config_.num_classes);
  out1_w = add(head + "fc1.W", xavier(head + "fc1.W", in, d));
  out1_b = add(head + "fc1.b", Matrix(1, d));
  out2_w = add(head + "fc2.W", xavier(head + "fc2.W", d, out));
  out2_b = add(head + "fc2.b", Matrix(1, out));
}

std::size_t GrnModel::add(const std::string& name, Matrix value) {
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::size_t GrnModel::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw std::out_of_range("GrnModel: no parameter '" + name + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

std::size_t GrnModel::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& m : values_) n += m.size();
  return n;
}

std::vector<Matrix> GrnModel::zeros_like() const {
  std::vector<Matrix> out;
  out.reserve(values_.size());
  for (const auto& m : values_) out.emplace_back(m.rows(), m.cols());
  return out;
}

std::vector<Var> bind_params(Tape& t, const GrnModel& model) {
  std::vector<Var> pv;
  pv.reserve(model.num_params());
  for (std::size_t i = 0; i < model.num_params(); ++i) pv.push_back(t.param(model.values()[i], i));
  return pv;
}

NodeStateTable NodeStateTable::create(std::size_t num_nodes, const GrnConfig& config) {
  NodeStateTable t;
  t.num_nodes = num_nodes;
  t.layers = config.num_layers;
  t.heads = config.effective_heads();
  t.embeddings = Matrix(num_nodes, config.d_model);
  t.last_update.assign(num_nodes, 0.0);
  t.has_history.assign(num_nodes, 0);
  t.states.resize(num_nodes * t.layers * t.heads);
  return t;
}

namespace {

void add_te(std::span<double> row, double delta, const GrnConfig& cfg) {
  if (!cfg.use_temporal_encoding) return;
  const auto te = temporal_encode(delta, cfg.time_dim);
  for (std::size_t i = 0; i < te.size(); ++i) row[i] += te[i];
}

}  // namespace

Matrix message(const Matrix& x_src_raw, const Matrix& edge_feats, std::span<const double> deltas,
               const Matrix& w_x, const Matrix& w_e, const GrnConfig& config) {
  const std::size_t rows = x_src_raw.rows();
  if (edge_feats.rows() != rows || deltas.size() != rows)
    throw std::invalid_argument("message: row counts differ (X " + x_src_raw.shape() + ", E " +
                                edge_feats.shape() + ", " + std::to_string(deltas.size()) +
                                " deltas)");
  Matrix out = add(matmul(x_src_raw, w_x), matmul(edge_feats, w_e));
  if (out.cols() != config.d_model)
    throw std::invalid_argument("message: output width " + std::to_string(out.cols()) +
                                " != d_model " + std::to_string(config.d_model));
  for (std::size_t r = 0; r < rows; ++r) add_te(out.row(r), deltas[r], config);
  return out;
}

Var mgr_forward(Tape& t, const GrnModel& model, std::span<const Var> pv, std::size_t layer, Var x,
                std::span<const SequenceSpec> seqs, Paradigm paradigm,
                std::vector<std::vector<RetentionState>>* final_states) {
  const GrnConfig& cfg = model.config();
  const auto& li = model.layers.at(layer);
  const std::size_t slot = cfg.head_slot();
  const std::size_t hw = cfg.head_width();
  const std::size_t rows = t.value(x).rows();
  if (t.value(x).cols() != cfg.d_model)
    throw std::invalid_argument("mgr_forward: input width " + std::to_string(t.value(x).cols()) +
                                " != d_model " + std::to_string(cfg.d_model));
  if (final_states) final_states->assign(li.heads.size(), {});
  std::vector<Var> parts;
  for (std::size_t h = 0; h < li.heads.size(); ++h) {
    const auto& hi = li.heads[h];
    Var xs = ad::slice_cols(t, x, h * slot, hw);
    Var q = ad::add_row(t, ad::matmul(t, xs, pv[hi.wq]), pv[hi.bq]);
    Var k = ad::add_row(t, ad::matmul(t, xs, pv[hi.wk]), pv[hi.bk]);
    Var v = ad::add_row(t, ad::matmul(t, xs, pv[hi.wv]), pv[hi.bv]);
    std::vector<ad::RetentionSegment> segs;
    segs.reserve(seqs.size());
    for (const auto& s : seqs)
      segs.push_back({s.rows, s.weights, s.head_states.empty() ? nullptr : s.head_states.at(h)});
    parts.push_back(ad::retention(t, q, k, v, segs, paradigm, cfg.normalized_scores,
                                  final_states ? &(*final_states)[h] : nullptr));
    if (hw < slot) parts.push_back(t.constant(Matrix(rows, slot - hw)));
  }
  Var cat = parts.size() == 1 ? parts.front() : ad::concat_cols(t, parts);
  return ad::group_norm(t, cat, cfg.gn_groups, pv[li.gn_g], pv[li.gn_b], cfg.norm_eps);
}

Var grn_block_forward(Tape& t, const GrnModel& model, std::span<const Var> pv, std::size_t layer,
                      Var hq, Var m, std::span<const SequenceSpec> seqs, Paradigm paradigm,
                      Rng* dropout_rng, std::vector<std::vector<RetentionState>>* final_states) {
  const GrnConfig& cfg = model.config();
  const auto& li = model.layers.at(layer);
  const std::size_t nq = t.value(hq).rows();
  Var aq = ad::layer_norm(t, hq, pv[li.ln1_g], pv[li.ln1_b], cfg.norm_eps);
  Var x = aq;
  if (t.value(m).rows() > 0) {
    Var am = ad::layer_norm(t, m, pv[li.ln1_g], pv[li.ln1_b], cfg.norm_eps);
    const Var both[] = {aq, am};
    x = ad::concat_rows(t, both);
  }
  Var g = mgr_forward(t, model, pv, layer, x, seqs, paradigm, final_states);
  if (t.value(g).rows() != nq) g = ad::slice_rows(t, g, 0, nq);
  if (dropout_rng) g = ad::dropout(t, g, cfg.dropout, *dropout_rng);
  Var h = ad::add(t, g, hq);
  Var f = ad::matmul(t, ad::layer_norm(t, h, pv[li.ln2_g], pv[li.ln2_b], cfg.norm_eps), pv[li.w1]);
  if (cfg.use_hswish_gate) f = ad::hswish(t, f);
  if (dropout_rng) f = ad::dropout(t, f, cfg.dropout, *dropout_rng);
  f = ad::matmul(t, f, pv[li.w2]);
  return ad::add(t, h, f);
}

BatchOutput forward_batch(Tape& t, const GrnModel& model, std::span<const Var> pv,
                          const NodeStateTable& table, std::span<const Event> events,
                          std::span<const Query> queries, const ForwardOptions& options) {
  const GrnConfig& cfg = model.config();
  const std::size_t d = cfg.d_model;
  if (table.layers != cfg.num_layers || table.heads != cfg.effective_heads() ||
      table.embeddings.cols() != d)
    throw std::invalid_argument("forward_batch: state table does not match the model config");
  auto check_node = [&](std::size_t v) {
    if (v >= table.num_nodes)
      throw std::out_of_range("forward_batch: unknown node id " + std::to_string(v));
  };

  enum Kind { kRead = 0, kWrite = 1 };
  struct Item {
    Kind kind;
    double time;
    std::size_t index;  // query index or write index
  };
  std::map<std::size_t, std::vector<Item>> timeline;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    check_node(queries[i].node);
    timeline[queries[i].node].push_back({kRead, queries[i].time, i});
  }
  // write 2j: message into dst from src; 2j+1: into src from dst
  struct Write {
    std::size_t target, other, event;
    double delta = 0.0;
  };
  std::vector<Write> writes;
  writes.reserve(2 * events.size());
  for (std::size_t j = 0; j < events.size(); ++j) {
    const Event& e = events[j];
    check_node(e.src);
    check_node(e.dst);
    writes.push_back({e.dst, e.src, j});
    timeline[e.dst].push_back({kWrite, e.t, writes.size() - 1});
    writes.push_back({e.src, e.dst, j});
    timeline[e.src].push_back({kWrite, e.t, writes.size() - 1});
  }

  const std::size_t nq = queries.size();
  const std::size_t nw = writes.size();
  std::vector<double> query_delta(nq, 0.0);
  struct FinalRead {
    std::size_t node;
    double time;
  };
  std::vector<FinalRead> finals;
  struct Seq {
    std::size_t node;
    std::vector<std::pair<Kind, std::size_t>> items;  // resolved later to rows
  };
  std::vector<Seq> seq_items;
  for (auto& [node, items] : timeline) {
    std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
      return a.time < b.time || (a.time == b.time && a.kind < b.kind);
    });
    std::optional<double> prev;
    if (table.has_history[node]) prev = table.last_update[node];
    Seq seq{node, {}};
    for (const Item& it : items) {
      const double delta = prev ? std::max(0.0, it.time - *prev) : 0.0;
      if (it.kind == kRead) {
        query_delta[it.index] = delta;
      } else {
        writes[it.index].delta = delta;
        prev = std::max(prev.value_or(it.time), it.time);
      }
      seq.items.emplace_back(it.kind, it.index);
    }
    if (std::any_of(items.begin(), items.end(), [](const Item& i) { return i.kind == kWrite; })) {
      seq.items.emplace_back(kRead, nq + finals.size());
      finals.push_back({node, *prev});
    }
    seq_items.push_back(std::move(seq));
  }
  const std::size_t nr = nq + finals.size();

  // Constant parts of the layer-0 inputs: frozen embeddings plus encodings.
  Matrix h0(nr, d);
  for (std::size_t i = 0; i < nq; ++i) {
    auto row = h0.row(i);
    auto emb = table.embeddings.row(queries[i].node);
    std::copy(emb.begin(), emb.end(), row.begin());
    add_te(row, query_delta[i], cfg);
  }
  for (std::size_t f = 0; f < finals.size(); ++f) {
    auto row = h0.row(nq + f);
    auto emb = table.embeddings.row(finals[f].node);
    std::copy(emb.begin(), emb.end(), row.begin());
    add_te(row, 0.0, cfg);
  }
  Matrix m0(nw, d);
  Matrix edge(nw, cfg.edge_width());
  for (std::size_t w = 0; w < nw; ++w) {
    auto row = m0.row(w);
    auto emb = table.embeddings.row(writes[w].other);
    std::copy(emb.begin(), emb.end(), row.begin());
    add_te(row, writes[w].delta, cfg);
    const auto& feat = events[writes[w].event].edge_feat;
    if (cfg.edge_feat_dim > 0) {
      if (feat.size() != cfg.edge_feat_dim)
        throw std::invalid_argument("forward_batch: event has " + std::to_string(feat.size()) +
                                    " edge features, model expects " +
                                    std::to_string(cfg.edge_feat_dim));
      std::copy(feat.begin(), feat.end(), edge.row(w).begin());
    }
  }
  // Node features are all zero, so X_raw·W_x contributes nothing but is kept
  // in the graph so the projection stays part of the parameter set.
  Var hq = ad::add(t, t.constant(std::move(h0)), ad::matmul(t, t.constant(Matrix(nr, d)), pv[model.w_x]));
  Var m = ad::add(t, t.constant(std::move(m0)), ad::matmul(t, t.constant(std::move(edge)), pv[model.w_e]));

  std::vector<SequenceSpec> seqs;
  seqs.reserve(seq_items.size());
  for (const Seq& s : seq_items) {
    SequenceSpec spec;
    for (const auto& [kind, idx] : s.items) {
      if (kind == kRead) {
        spec.rows.push_back(idx);
        spec.weights.push_back(0.0);
      } else {
        spec.rows.push_back(nr + idx);
        spec.weights.push_back(cfg.decay.weight(writes[idx].delta));
      }
    }
    seqs.push_back(std::move(spec));
  }

  BatchOutput out;
  std::vector<std::vector<std::vector<RetentionState>>> layer_states(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    for (std::size_t s = 0; s < seqs.size(); ++s) {
      seqs[s].head_states.clear();
      for (std::size_t h = 0; h < table.heads; ++h)
        seqs[s].head_states.push_back(&table.state(seq_items[s].node, l, h));
    }
    hq = grn_block_forward(t, model, pv, l, hq, m, seqs, options.paradigm, options.dropout_rng,
                           &layer_states[l]);
  }
  Var z = cfg.num_layers > 0 ? ad::layer_norm(t, hq, pv[model.final_g], pv[model.final_b], cfg.norm_eps)
                             : hq;
  out.embeddings = nq == nr ? z : ad::slice_rows(t, z, 0, nq);

  std::size_t f = 0;
  for (std::size_t s = 0; s < seq_items.size(); ++s) {
    if (f >= finals.size() || finals[f].node != seq_items[s].node) continue;
    NodeUpdate u;
    u.node = finals[f].node;
    u.last_update = finals[f].time;
    auto row = t.value(z).row(nq + f);
    u.embedding.assign(row.begin(), row.end());
    for (std::size_t l = 0; l < cfg.num_layers; ++l)
      for (std::size_t h = 0; h < table.heads; ++h) u.states.push_back(layer_states[l][h][s]);
    out.updates.push_back(std::move(u));
    ++f;
  }
  return out;
}

void apply_updates(NodeStateTable& table, std::vector<NodeUpdate>&& updates) {
  for (NodeUpdate& u : updates) {
    std::copy(u.embedding.begin(), u.embedding.end(), table.embeddings.row(u.node).begin());
    table.last_update[u.node] = u.last_update;
    table.has_history[u.node] = 1;
    for (std::size_t l = 0; l < table.layers; ++l)
      for (std::size_t h = 0; h < table.heads; ++h)
        table.state(u.node, l, h) = std::move(u.states[l * table.heads + h]);
  }
}

Var link_probability(Tape& t, const GrnModel& model, std::span<const Var> pv, Var z_src, Var z_dst) {
  if (model.config().task != Task::LinkPrediction)
    throw std::logic_error("link_probability: model has no link head");
  const Var parts[] = {z_src, z_dst};
  Var h = ad::concat_cols(t, parts);
  h = ad::hswish(t, ad::add_row(t, ad::matmul(t, h, pv[model.out1_w]), pv[model.out1_b]));
  Var logit = ad::add_row(t, ad::matmul(t, h, pv[model.out2_w]), pv[model.out2_b]);
  return ad::sigmoid(t, logit);
}

Var class_logits(Tape& t, const GrnModel& model, std::span<const Var> pv, Var z) {
  if (model.config().task != Task::NodeClassification)
    throw std::logic_error("class_logits: model has no classification head");
  Var h = ad::hswish(t, ad::add_row(t, ad::matmul(t, z, pv[model.out1_w]), pv[model.out1_b]));
  return ad::add_row(t, ad::matmul(t, h, pv[model.out2_w]), pv[model.out2_b]);
}

Matrix class_probabilities(const Matrix& logits, std::size_t num_classes) {
  if (num_classes == 2 && logits.cols() == 1) {
    Matrix p(logits.rows(), 2);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      p(r, 1) = sigmoid(logits(r, 0));
      p(r, 0) = 1.0 - p(r, 1);
    }
    return p;
  }
  return softmax_rows(logits);
}

}  // namespace grn
