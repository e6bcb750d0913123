// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// GRN model: temporal encoding, messages, multi-head graph retention, the
// pre-norm block stack, per-node state tables and the prediction heads.
//
// Batch layout. Every node touched by a batch gets one time-ordered sequence
// mixing read rows (a query for that node at some time; weight 0, so it adds
// nothing to the state) and write rows (a message from the other endpoint of
// an event). Reads sort before writes at equal timestamps, so a query sees
// strictly earlier events only. A node with writes gets one more read row at
// the end whose output becomes its new embedding. Query inputs come from the
// embeddings frozen at the start of the batch; message rows are the key/value
// inputs of every layer, query rows are carried through the stack.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grn/autodiff.hpp"
#include "grn/retention.hpp"
#include "grn/temporal_graph.hpp"
#include "grn/tensor.hpp"

namespace grn {

enum class Task { LinkPrediction, NodeClassification };

struct GrnConfig {
  std::size_t num_layers = 2;
  std::size_t d_model = 64;
  std::size_t heads = 2;
  std::size_t gn_groups = 2;
  std::size_t time_dim = 64;
  double dropout = 0.1;
  double norm_eps = 1e-5;
  DecayPolicy decay = DecayPolicy::unit();
  bool normalized_scores = true;
  // ablations
  bool use_temporal_encoding = true;
  bool use_hswish_gate = true;
  bool multi_head = true;
  bool reduce_head_dim = false;
  // data-dependent
  std::size_t edge_feat_dim = 0;
  Task task = Task::LinkPrediction;
  std::size_t num_classes = 2;

  void validate() const;
  std::size_t effective_heads() const noexcept { return multi_head ? heads : 1; }
  /// Channels per head slot in the concatenation.
  std::size_t head_slot() const noexcept { return d_model / effective_heads(); }
  /// Channels a head actually computes on (half the slot under reduce_head_dim).
  std::size_t head_width() const noexcept { return reduce_head_dim ? head_slot() / 2 : head_slot(); }
  std::size_t edge_width() const noexcept { return edge_feat_dim == 0 ? 1 : edge_feat_dim; }
  friend bool operator==(const GrnConfig&, const GrnConfig&) = default;
};

/// TE(Δt)_i = cos(Δt · (√d)^{−(i−1)/√d}), i = 1..dim.
std::vector<double> temporal_encode(double delta_t, std::size_t dim);

/// Named parameter matrices in a fixed enumeration order.
class GrnModel {
 public:
  GrnModel(const GrnConfig& config, std::uint64_t seed);

  const GrnConfig& config() const noexcept { return config_; }
  std::size_t num_params() const noexcept { return values_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::vector<Matrix>& values() noexcept { return values_; }
  const std::vector<Matrix>& values() const noexcept { return values_; }
  std::size_t index(const std::string& name) const;
  Matrix& param(const std::string& name) { return values_[index(name)]; }
  const Matrix& param(const std::string& name) const { return values_[index(name)]; }
  std::size_t scalar_count() const noexcept;
  /// Zero matrices shaped like the parameters.
  std::vector<Matrix> zeros_like() const;

  struct HeadIdx {
    std::size_t wq, wk, wv, bq, bk, bv;
  };
  struct LayerIdx {
    std::size_t ln1_g, ln1_b, gn_g, gn_b, ln2_g, ln2_b, w1, w2;
    std::vector<HeadIdx> heads;
  };
  std::size_t w_x = 0, w_e = 0, final_g = 0, final_b = 0;
  std::size_t out1_w = 0, out1_b = 0, out2_w = 0, out2_b = 0;
  std::vector<LayerIdx> layers;

 private:
  std::size_t add(const std::string& name, Matrix value);

  GrnConfig config_;
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

/// Tape leaves for every parameter, in enumeration order.
std::vector<Var> bind_params(Tape& t, const GrnModel& model);

struct NodeStateTable {
  std::size_t num_nodes = 0;
  std::size_t layers = 0;
  std::size_t heads = 0;
  Matrix embeddings;  // num_nodes × d_model
  std::vector<double> last_update;
  std::vector<char> has_history;
  std::vector<RetentionState> states;  // (node, layer, head); S allocated lazily

  static NodeStateTable create(std::size_t num_nodes, const GrnConfig& config);
  RetentionState& state(std::size_t node, std::size_t layer, std::size_t head) {
    return states[(node * layers + layer) * heads + head];
  }
  const RetentionState& state(std::size_t node, std::size_t layer, std::size_t head) const {
    return states[(node * layers + layer) * heads + head];
  }
};

/// X_j = X_raw·W_x + E·W_e + TE(ΔT) (TE zero-padded to d_model, omitted when disabled).
Matrix message(const Matrix& x_src_raw, const Matrix& edge_feats, std::span<const double> deltas,
               const Matrix& w_x, const Matrix& w_e, const GrnConfig& config);

/// One retention sequence over rows of a block input.
struct SequenceSpec {
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  std::vector<const RetentionState*> head_states;  // per head; nullptr = zero state
};

/// Per-head retention over column slices of x, concatenated and group-normalised.
/// final_states[h][s] receives the terminal state of sequence s under head h.
Var mgr_forward(Tape& t, const GrnModel& model, std::span<const Var> pv, std::size_t layer, Var x,
                std::span<const SequenceSpec> seqs, Paradigm paradigm,
                std::vector<std::vector<RetentionState>>* final_states = nullptr);

/// H = MGR(LN(X)) + X_q; O = FFN(LN(H)) + H. `hq` are the query rows, `m` the
/// message rows (appended after hq when indexing `seqs`); returns the new
/// query rows. Dropout is applied when `dropout_rng` is non-null.
Var grn_block_forward(Tape& t, const GrnModel& model, std::span<const Var> pv, std::size_t layer,
                      Var hq, Var m, std::span<const SequenceSpec> seqs, Paradigm paradigm,
                      Rng* dropout_rng,
                      std::vector<std::vector<RetentionState>>* final_states = nullptr);

struct Query {
  std::size_t node = 0;
  double time = 0.0;
};

struct NodeUpdate {
  std::size_t node = 0;
  double last_update = 0.0;
  std::vector<double> embedding;
  std::vector<RetentionState> states;  // (layer, head)
};

struct ForwardOptions {
  Paradigm paradigm = Paradigm::recurrent();
  Rng* dropout_rng = nullptr;  // non-null = training mode
};

struct BatchOutput {
  Var embeddings;  // one row per query
  std::vector<NodeUpdate> updates;
};

/// Embeds `queries` given everything before them, absorbing `events` into
/// the returned updates. `table` must outlive the tape's backward pass.
BatchOutput forward_batch(Tape& t, const GrnModel& model, std::span<const Var> pv,
                          const NodeStateTable& table, std::span<const Event> events,
                          std::span<const Query> queries, const ForwardOptions& options);

void apply_updates(NodeStateTable& table, std::vector<NodeUpdate>&& updates);

/// σ(FC2(hswish(FC1([z_src, z_dst])))) as an n×1 column.
Var link_probability(Tape& t, const GrnModel& model, std::span<const Var> pv, Var z_src, Var z_dst);
/// FC2(hswish(FC1(z))): n×1 logits when num_classes == 2, n×C otherwise.
Var class_logits(Tape& t, const GrnModel& model, std::span<const Var> pv, Var z);
/// Class probabilities (n×C, rows sum to 1) from class_logits.
Matrix class_probabilities(const Matrix& logits, std::size_t num_classes);

}  // namespace grn
