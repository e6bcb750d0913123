// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Graph retention: a destination node's queries against the key/value
// messages of its temporal neighbours, computed in parallel, recurrent or
// chunk-wise form. All three forms produce the same outputs for the same
// (Q, K, V, weights, initial state); that equivalence is the contract the
// rest of the engine and the verification suite lean on.
//
// Mask convention: D[t][k] = w_k for k <= t and 0 above the diagonal, i.e. the
// weight belongs to the *source* row k. That is the only indexing under which
// the recurrent update S_t = S_{t-1} + w_t k_tᵀ v_t reproduces the parallel
// form.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

/// Per-head projection weights; all d×d with 1×d biases.
struct RetentionParams {
  Matrix w_q, w_k, w_v;
  Matrix b_q, b_k, b_v;

  std::size_t dim() const noexcept { return w_q.rows(); }
  static RetentionParams identity(std::size_t d);
  static RetentionParams xavier(std::size_t d, Rng& rng);
};

struct DecayPolicy {
  enum class Kind { Unit, TimeDecay };
  Kind kind = Kind::Unit;
  double lambda = 0.0;

  static DecayPolicy unit() { return {}; }
  static DecayPolicy time_decay(double lambda);

  /// w for a neighbour whose time interval is `delta`.
  double weight(double delta) const;
  std::string to_string() const;
  static DecayPolicy parse(std::string_view text);
};

/// Lower-triangular weighted causal mask stored by its column weights.
/// D(t, k) == weight(k) for k <= t, 0 otherwise; dense() materialises it.
/// build_decay_mask always yields strictly positive weights; the model also
/// uses zero weights for pure read slots that carry no key/value.
class DecayMask {
 public:
  DecayMask() = default;
  explicit DecayMask(std::vector<double> weights);

  std::size_t size() const noexcept { return weights_.size(); }
  double weight(std::size_t k) const { return weights_[k]; }
  std::span<const double> weights() const noexcept { return weights_; }
  double operator()(std::size_t t, std::size_t k) const { return k <= t ? weights_[k] : 0.0; }
  /// Σ_{k<=t} D(t, k)
  double row_sum(std::size_t t) const { return prefix_[t]; }
  DecayMask slice(std::size_t begin, std::size_t count) const;
  Matrix dense() const;

 private:
  std::vector<double> weights_;
  std::vector<double> prefix_;
};

DecayMask build_decay_mask(std::span<const double> deltas, const DecayPolicy& policy);

/// Recurrent carrier for one (node, layer, head). `key_sum` and `weight_sum`
/// are the running Σ w k and Σ w needed to apply score normalisation without
/// revisiting history.
struct RetentionState {
  Matrix s;
  std::vector<double> key_sum;
  double weight_sum = 0.0;
  double last_time = 0.0;

  static RetentionState zero(std::size_t d);
  std::size_t dim() const noexcept { return s.rows(); }
  bool is_zero() const noexcept { return weight_sum == 0.0; }
};

struct Qkv {
  Matrix q, k, v;
};

enum class QueryRows {
  AsGiven,   // one query per row of x_dst
  PerEvent,  // a single x_dst row is replicated to one query per source row
};

Qkv project_qkv(const Matrix& x_dst, const Matrix& x_src, const RetentionParams& params,
                QueryRows rows = QueryRows::PerEvent);

/// Dense score normalisation: R = (Q Kᵀ / sqrt(d)) ⊙ D̃ with D̃ the row-normalised
/// mask, then each R row divided by max(|row sum|, 1). Returns R̃ and D̃.
struct NormalizedScores {
  Matrix scores;
  Matrix mask;
};
NormalizedScores normalize_scores(const Matrix& q, const Matrix& k, const DecayMask& d);

/// Parallel form: row t = Σ_{k<=t} D(t,k) (q_t·k_k) v_k, optionally with the
/// score normalisation applied. q may have fewer rows than k; its rows are
/// then aligned with the last q.rows() positions of the sequence.
Matrix retention_parallel(const Matrix& q, const Matrix& k, const Matrix& v, const DecayMask& d,
                          bool normalized);

/// One recurrent step: S += w kᵀv, then o = q S (normalised with the running
/// sums when requested). O(d²) independent of history length. Mutates state.
Matrix retention_recurrent(RetentionState& state, std::span<const double> q,
                           std::span<const double> k, std::span<const double> v, double w,
                           bool normalized);

/// Read-only query against a state (the w == 0 recurrent step).
Matrix retention_read(const RetentionState& state, std::span<const double> q, bool normalized);

struct RetentionResult {
  Matrix outputs;
  RetentionState state;
};

/// One chunk: the intra-chunk parallel term plus the inherited-state term
/// q·S_in on every row; the returned state has absorbed the chunk.
RetentionResult retention_chunkwise(const Matrix& q_chunk, const Matrix& k_chunk,
                                    const Matrix& v_chunk, const DecayMask& d_chunk,
                                    const RetentionState& state_in, bool normalized);

/// Stage form: queries come from the destination embedding frozen at the end
/// of the previous stage (x_prev · W_q + b_q, replicated over the chunk).
RetentionResult retention_chunkwise(const Matrix& x_dst_prev, const Matrix& x_src_chunk,
                                    const RetentionParams& params, const DecayMask& d_chunk,
                                    const RetentionState& state_in, bool normalized);

struct Paradigm {
  enum class Kind { Parallel, Recurrent, Chunkwise };
  Kind kind = Kind::Recurrent;
  std::size_t chunk_size = 0;  // Chunkwise only

  static Paradigm parallel() { return {Kind::Parallel, 0}; }
  static Paradigm recurrent() { return {Kind::Recurrent, 0}; }
  static Paradigm chunkwise(std::size_t b);
  std::string to_string() const;
  static Paradigm parse(std::string_view name, std::size_t chunk_size = 0);
  friend bool operator==(const Paradigm&, const Paradigm&) = default;
};

/// Dispatch on paradigm. Parallel is Chunkwise(L), Recurrent is Chunkwise(1);
/// all three return identical outputs and terminal state. An empty sequence
/// returns no rows and the unchanged state.
RetentionResult graph_retention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const DecayMask& d, const RetentionState& state_in,
                                Paradigm paradigm, bool normalized);

/// Neighbour-sequence form: projects the destination and source rows, builds
/// the mask from the time intervals and dispatches.
RetentionResult graph_retention(const Matrix& x_dst, const Matrix& x_src,
                                std::span<const double> deltas, const RetentionParams& params,
                                const DecayPolicy& policy, const RetentionState& state_in,
                                Paradigm paradigm, bool normalized);

namespace fault {
/// Mutation hook for the verification suite: negates recurrent outputs.
void set_recurrent_sign_flip(bool enabled);
bool recurrent_sign_flip();
}  // namespace fault

}  // namespace grn
