// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode tape over Matrix values. Leaves are either constants or
// parameters (a slot in a caller-owned gradient vector); every op records a
// closure that pushes its output adjoint into its inputs. Nodes whose inputs
// carry no gradient are recorded as constants and cost nothing in backward().

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "grn/retention.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

class Tape;

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad)>;

  /// `param_grads` receives parameter adjoints; nullptr disables gradients.
  explicit Tape(std::vector<Matrix>* param_grads = nullptr) : param_grads_(param_grads) {}

  bool grad_enabled() const noexcept { return param_grads_ != nullptr; }

  Var constant(Matrix value);
  Var param(const Matrix& value, std::size_t slot);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Adjoint after backward(); an empty matrix if nothing flowed into v.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Drops every node recorded after the first `mark` nodes, so one tape
  /// (with its parameter leaves) can serve many gradient-free forward passes.
  void truncate(std::size_t mark);

  /// Records an op output. `fn` is dropped when no input requires a gradient.
  Var push(Matrix value, bool requires_grad, Backward fn);
  void accumulate(Var v, const Matrix& g);

  /// Seeds d loss / d loss = 1 on a 1×1 node and runs the reverse sweep.
  void backward(Var loss);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::ptrdiff_t slot = -1;
    Backward backward;
  };
  std::deque<Node> nodes_;
  std::vector<Matrix>* param_grads_;
};

namespace ad {

Var matmul(Tape& t, Var a, Var b);
Var add(Tape& t, Var a, Var b);
Var subtract(Tape& t, Var a, Var b);
/// a + bias with a 1×c bias broadcast over rows.
Var add_row(Tape& t, Var a, Var bias);
Var scale(Tape& t, Var a, double s);
Var hadamard(Tape& t, Var a, Var b);
/// Sum of every entry, as a 1×1 node.
Var sum(Tape& t, Var a);

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps);
Var group_norm(Tape& t, Var x, std::size_t groups, Var gain, Var bias, double eps);
Var hswish(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);

Var concat_cols(Tape& t, std::span<const Var> parts);
Var concat_rows(Tape& t, std::span<const Var> parts);
Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t count);
Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count);
/// Row i of the output is row idx[i] of x; the adjoint is scatter-added.
Var gather_rows(Tape& t, Var x, std::vector<std::size_t> idx);

/// Inverted dropout with a mask drawn from rng; identity when rate == 0.
Var dropout(Tape& t, Var x, double rate, Rng& rng);

/// Mean binary cross-entropy of probabilities (n×1) against 0/1 labels.
/// Probabilities are clamped to [1e-12, 1 − 1e-12]; the clamp passes no gradient.
Var bce(Tape& t, Var probs, std::span<const double> labels);
/// Mean softmax cross-entropy of logits (n×C) against class indices.
Var softmax_cross_entropy(Tape& t, Var logits, std::span<const std::size_t> labels);

/// One causal retention sequence over rows of the shared Q/K/V matrices.
struct RetentionSegment {
  std::vector<std::size_t> rows;
  std::vector<double> weights;
  const RetentionState* state_in = nullptr;  // nullptr = zero state
};

/// Output has the shape of q; each segment's rows receive their retention
/// outputs, rows in no segment are zero. Every row may belong to at most one
/// segment. Terminal states are written to `final_states` when given.
Var retention(Tape& t, Var q, Var k, Var v, std::span<const RetentionSegment> segments,
              Paradigm paradigm, bool normalized,
              std::vector<RetentionState>* final_states = nullptr);

}  // namespace ad
}  // namespace grn
