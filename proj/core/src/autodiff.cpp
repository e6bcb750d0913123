// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "grn/nn_ops.hpp"

namespace grn {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, -1, {}});
  return Var{nodes_.size() - 1};
}

Var Tape::param(const Matrix& value, std::size_t slot) {
  if (!grad_enabled()) return constant(value);
  if (slot >= param_grads_->size()) throw std::out_of_range("Tape::param: bad slot");
  nodes_.push_back(Node{value, {}, true, static_cast<std::ptrdiff_t>(slot), {}});
  return Var{nodes_.size() - 1};
}

Var Tape::push(Matrix value, bool requires_grad, Backward fn) {
  if (!value.all_finite()) throw std::domain_error("tape: non-finite value at node " +
                                                   std::to_string(nodes_.size()));
  nodes_.push_back(Node{std::move(value), {}, requires_grad, -1,
                        requires_grad ? std::move(fn) : Backward{}});
  return Var{nodes_.size() - 1};
}

void Tape::truncate(std::size_t mark) {
  if (mark < nodes_.size()) nodes_.resize(mark);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.empty() && n.grad.rows() == 0) {
    n.grad = g;
  } else {
    add_inplace(n.grad, g);
  }
}

void Tape::backward(Var loss) {
  Node& root = nodes_[loss.id];
  if (root.value.rows() != 1 || root.value.cols() != 1)
    throw std::invalid_argument("Tape::backward: loss must be 1x1, got " + root.value.shape());
  if (!root.requires_grad) return;
  root.grad = Matrix(1, 1, 1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.rows() == 0) continue;
    if (n.slot >= 0) {
      if (!n.grad.all_finite())
        throw std::domain_error("tape: non-finite gradient for parameter slot " +
                                std::to_string(n.slot));
      add_inplace((*param_grads_)[static_cast<std::size_t>(n.slot)], n.grad);
    } else if (n.backward) {
      const Matrix g = std::move(n.grad);
      n.grad = g;
      n.backward(*this, g);
    }
  }
}

namespace ad {
namespace {

bool any_grad(const Tape& t, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  return t.push(grn::matmul(t.value(a), t.value(b)), any_grad(t, {a, b}),
                [a, b](Tape& tp, const Matrix& g) {
                  if (tp.requires_grad(a)) tp.accumulate(a, matmul_nt(g, tp.value(b)));
                  if (tp.requires_grad(b)) tp.accumulate(b, matmul_tn(tp.value(a), g));
                });
}

Var add(Tape& t, Var a, Var b) {
  return t.push(grn::add(t.value(a), t.value(b)), any_grad(t, {a, b}),
                [a, b](Tape& tp, const Matrix& g) {
                  tp.accumulate(a, g);
                  tp.accumulate(b, g);
                });
}

Var subtract(Tape& t, Var a, Var b) {
  return t.push(grn::subtract(t.value(a), t.value(b)), any_grad(t, {a, b}),
                [a, b](Tape& tp, const Matrix& g) {
                  tp.accumulate(a, g);
                  if (tp.requires_grad(b)) tp.accumulate(b, grn::scale(g, -1.0));
                });
}

Var add_row(Tape& t, Var a, Var bias) {
  return t.push(add_row_broadcast(t.value(a), t.value(bias)), any_grad(t, {a, bias}),
                [a, bias](Tape& tp, const Matrix& g) {
                  tp.accumulate(a, g);
                  if (tp.requires_grad(bias)) tp.accumulate(bias, column_sum(g));
                });
}

Var scale(Tape& t, Var a, double s) {
  return t.push(grn::scale(t.value(a), s), t.requires_grad(a),
                [a, s](Tape& tp, const Matrix& g) { tp.accumulate(a, grn::scale(g, s)); });
}

Var hadamard(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw std::invalid_argument("ad::hadamard: shapes " + av.shape() + " and " + bv.shape());
  return t.push(grn::hadamard(av, bv), any_grad(t, {a, b}), [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, grn::hadamard(g, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, grn::hadamard(g, tp.value(a)));
  });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double v : t.value(a).data()) s += v;
  return t.push(Matrix(1, 1, s), t.requires_grad(a), [a](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a);
    tp.accumulate(a, Matrix(av.rows(), av.cols(), g(0, 0)));
  });
}

Var group_norm(Tape& t, Var x, std::size_t groups, Var gain, Var bias, double eps) {
  Matrix out = grn::group_norm(t.value(x), groups, eps, t.value(gain).data(), t.value(bias).data());
  return t.push(std::move(out), any_grad(t, {x, gain, bias}),
                [x, groups, gain, bias, eps](Tape& tp, const Matrix& g) {
                  NormGrads ng =
                      group_norm_backward(tp.value(x), g, groups, eps, tp.value(gain).data());
                  tp.accumulate(x, ng.dx);
                  tp.accumulate(gain, ng.dgain);
                  tp.accumulate(bias, ng.dbias);
                });
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  return group_norm(t, x, 1, gain, bias, eps);
}

Var hswish(Tape& t, Var x) {
  return t.push(grn::hswish(t.value(x)), t.requires_grad(x), [x](Tape& tp, const Matrix& g) {
    Matrix d = g;
    auto xv = tp.value(x).data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= hswish_derivative(xv[i]);
    tp.accumulate(x, d);
  });
}

Var sigmoid(Tape& t, Var x) {
  Matrix y = grn::sigmoid(t.value(x));
  Matrix y_copy = y;
  return t.push(std::move(y), t.requires_grad(x), [x, y = std::move(y_copy)](Tape& tp, const Matrix& g) {
    Matrix d = g;
    auto yd = y.data();
    auto dd = d.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= yd[i] * (1.0 - yd[i]);
    tp.accumulate(x, d);
  });
}

Var concat_cols(Tape& t, std::span<const Var> parts) {
  std::vector<Matrix> blocks;
  blocks.reserve(parts.size());
  bool rg = false;
  for (Var p : parts) {
    blocks.push_back(t.value(p));
    rg = rg || t.requires_grad(p);
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return t.push(grn::concat_cols(blocks), rg, [ids](Tape& tp, const Matrix& g) {
    std::size_t col = 0;
    for (Var p : ids) {
      const std::size_t c = tp.value(p).cols();
      if (tp.requires_grad(p)) tp.accumulate(p, grn::slice_cols(g, col, c));
      col += c;
    }
  });
}

Var concat_rows(Tape& t, std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("ad::concat_rows: no parts");
  const std::size_t cols = t.value(parts.front()).cols();
  std::size_t rows = 0;
  bool rg = false;
  for (Var p : parts) {
    if (t.value(p).cols() != cols)
      throw std::invalid_argument("ad::concat_rows: widths " + std::to_string(cols) + " and " +
                                  std::to_string(t.value(p).cols()));
    rows += t.value(p).rows();
    rg = rg || t.requires_grad(p);
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (Var p : parts) data.insert(data.end(), t.value(p).data().begin(), t.value(p).data().end());
  std::vector<Var> ids(parts.begin(), parts.end());
  return t.push(Matrix(rows, cols, std::move(data)), rg, [ids](Tape& tp, const Matrix& g) {
    std::size_t row = 0;
    for (Var p : ids) {
      const std::size_t r = tp.value(p).rows();
      if (tp.requires_grad(p)) tp.accumulate(p, grn::slice_rows(g, row, r));
      row += r;
    }
  });
}

Var slice_cols(Tape& t, Var x, std::size_t begin, std::size_t count) {
  return t.push(grn::slice_cols(t.value(x), begin, count), t.requires_grad(x),
                [x, begin](Tape& tp, const Matrix& g) {
                  const Matrix& xv = tp.value(x);
                  Matrix d(xv.rows(), xv.cols());
                  for (std::size_t r = 0; r < g.rows(); ++r)
                    std::copy(g.row(r).begin(), g.row(r).end(), d.row(r).begin() + begin);
                  tp.accumulate(x, d);
                });
}

Var slice_rows(Tape& t, Var x, std::size_t begin, std::size_t count) {
  return t.push(grn::slice_rows(t.value(x), begin, count), t.requires_grad(x),
                [x, begin](Tape& tp, const Matrix& g) {
                  const Matrix& xv = tp.value(x);
                  Matrix d(xv.rows(), xv.cols());
                  std::copy(g.data().begin(), g.data().end(), d.row(begin).begin());
                  tp.accumulate(x, d);
                });
}

Var gather_rows(Tape& t, Var x, std::vector<std::size_t> idx) {
  const Matrix& xv = t.value(x);
  Matrix out(idx.size(), xv.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= xv.rows())
      throw std::out_of_range("ad::gather_rows: row " + std::to_string(idx[i]) + " of " +
                              xv.shape());
    std::copy(xv.row(idx[i]).begin(), xv.row(idx[i]).end(), out.row(i).begin());
  }
  return t.push(std::move(out), t.requires_grad(x),
                [x, idx = std::move(idx)](Tape& tp, const Matrix& g) {
                  const Matrix& xv = tp.value(x);
                  Matrix d(xv.rows(), xv.cols());
                  for (std::size_t i = 0; i < idx.size(); ++i) {
                    auto dst = d.row(idx[i]);
                    auto src = g.row(i);
                    for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
                  }
                  tp.accumulate(x, d);
                });
}

Var dropout(Tape& t, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("ad::dropout: rate must be < 1");
  const Matrix& xv = t.value(x);
  Matrix mask(xv.rows(), xv.cols());
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  Matrix out = grn::hadamard(xv, mask);
  return t.push(std::move(out), t.requires_grad(x),
                [x, mask = std::move(mask)](Tape& tp, const Matrix& g) {
                  tp.accumulate(x, grn::hadamard(g, mask));
                });
}

Var bce(Tape& t, Var probs, std::span<const double> labels) {
  constexpr double kEps = 1e-12;
  const Matrix& p = t.value(probs);
  if (p.cols() != 1 || p.rows() != labels.size())
    throw std::invalid_argument("ad::bce: probabilities " + p.shape() + " vs " +
                                std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw std::invalid_argument("ad::bce: empty batch");
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double pc = std::clamp(p(i, 0), kEps, 1.0 - kEps);
    loss -= labels[i] * std::log(pc) + (1.0 - labels[i]) * std::log(1.0 - pc);
  }
  std::vector<double> y(labels.begin(), labels.end());
  return t.push(Matrix(1, 1, loss / n), t.requires_grad(probs),
                [probs, y = std::move(y), n](Tape& tp, const Matrix& g) {
                  const Matrix& p = tp.value(probs);
                  Matrix d(p.rows(), 1);
                  for (std::size_t i = 0; i < y.size(); ++i) {
                    const double pi = p(i, 0);
                    if (pi < kEps || pi > 1.0 - kEps) continue;
                    d(i, 0) = g(0, 0) * (-y[i] / pi + (1.0 - y[i]) / (1.0 - pi)) / n;
                  }
                  tp.accumulate(probs, d);
                });
}

Var softmax_cross_entropy(Tape& t, Var logits, std::span<const std::size_t> labels) {
  const Matrix& z = t.value(logits);
  if (z.rows() != labels.size() || labels.empty())
    throw std::invalid_argument("ad::softmax_cross_entropy: logits " + z.shape() + " vs " +
                                std::to_string(labels.size()) + " labels");
  Matrix p = softmax_rows(z);
  const double n = static_cast<double>(labels.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= z.cols())
      throw std::out_of_range("ad::softmax_cross_entropy: class " + std::to_string(labels[i]));
    loss -= std::log(std::max(p(i, labels[i]), 1e-300));
  }
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return t.push(Matrix(1, 1, loss / n), t.requires_grad(logits),
                [logits, p = std::move(p), y = std::move(y), n](Tape& tp, const Matrix& g) {
                  Matrix d = p;
                  for (std::size_t i = 0; i < y.size(); ++i) d(i, y[i]) -= 1.0;
                  tp.accumulate(logits, grn::scale(d, g(0, 0) / n));
                });
}

namespace {

Matrix gather(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
  return out;
}

struct SegmentGrads {
  Matrix dq, dk, dv;
};

// Adjoint of one normalised or raw retention sequence with an inherited
// (constant) state. A forward sweep recovers S_t, z_t, W_t for the query
// adjoints; a reverse sweep accumulates G = Σ_{t>=i} dS_t and g = Σ_{t>=i} dz_t
// for the key/value adjoints.
SegmentGrads retention_segment_backward(const Matrix& q, const Matrix& k, const Matrix& v,
                                        const std::vector<double>& w, const RetentionState* in,
                                        const Matrix& dout, bool normalized) {
  const std::size_t n = q.rows();
  const std::size_t d = q.cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  SegmentGrads out{Matrix(n, d), Matrix(n, d), Matrix(n, d)};

  Matrix s(d, d);
  std::vector<double> z(d, 0.0);
  double wsum = 0.0;
  if (in != nullptr && !in->s.empty()) {
    s = in->s;
    z = in->key_sum;
    wsum = in->weight_sum;
  }
  Matrix da(n, d);
  std::vector<double> alpha(n, 0.0), dr(n, 0.0);
  std::vector<double> raw(d);
  for (std::size_t t = 0; t < n; ++t) {
    const double wt = w[t];
    if (wt != 0.0) {
      for (std::size_t a = 0; a < d; ++a) {
        const double wk = wt * k(t, a);
        z[a] += wk;
        double* srow = s.row(a).data();
        for (std::size_t b = 0; b < d; ++b) srow[b] += wk * v(t, b);
      }
      wsum += wt;
    }
    auto dot = dout.row(t);
    if (!normalized) {
      alpha[t] = 1.0;
      std::copy(dot.begin(), dot.end(), da.row(t).begin());
    } else {
      if (wsum == 0.0) continue;
      const double al = inv_sqrt_d / wsum;
      std::fill(raw.begin(), raw.end(), 0.0);
      double rr = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double qa = q(t, a);
        const double* srow = s.row(a).data();
        for (std::size_t b = 0; b < d; ++b) raw[b] += qa * srow[b];
        rr += qa * z[a];
      }
      const double r = al * rr;
      const double c = std::max(std::abs(r), 1.0);
      double do_dot_a = 0.0;
      for (std::size_t b = 0; b < d; ++b) {
        da(t, b) = dot[b] / c;
        do_dot_a += dot[b] * al * raw[b];
      }
      alpha[t] = al;
      if (std::abs(r) > 1.0) dr[t] = -(do_dot_a / (c * c)) * (r > 0.0 ? 1.0 : -1.0);
    }
    // dq_t = α (da_t Sᵀ + dr_t z)
    auto dq = out.dq.row(t);
    for (std::size_t a = 0; a < d; ++a) {
      const double* srow = s.row(a).data();
      double acc = 0.0;
      for (std::size_t b = 0; b < d; ++b) acc += srow[b] * da(t, b);
      dq[a] = alpha[t] * (acc + dr[t] * z[a]);
    }
  }

  Matrix big_g(d, d);
  std::vector<double> small_g(d, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    const double al = alpha[t];
    if (al != 0.0) {
      for (std::size_t a = 0; a < d; ++a) {
        const double qa = al * q(t, a);
        small_g[a] += dr[t] * qa;
        if (qa == 0.0) continue;
        double* grow = big_g.row(a).data();
        for (std::size_t b = 0; b < d; ++b) grow[b] += qa * da(t, b);
      }
    }
    const double wt = w[t];
    if (wt == 0.0) continue;
    auto dk = out.dk.row(t);
    auto dv = out.dv.row(t);
    for (std::size_t a = 0; a < d; ++a) {
      const double* grow = big_g.row(a).data();
      double acc = 0.0;
      for (std::size_t b = 0; b < d; ++b) acc += grow[b] * v(t, b);
      dk[a] = wt * (acc + small_g[a]);
      const double wk = wt * k(t, a);
      for (std::size_t b = 0; b < d; ++b) dv[b] += wk * grow[b];
    }
  }
  return out;
}

}  // namespace

Var retention(Tape& t, Var q, Var k, Var v, std::span<const RetentionSegment> segments,
              Paradigm paradigm, bool normalized, std::vector<RetentionState>* final_states) {
  const Matrix& qv = t.value(q);
  const Matrix& kv = t.value(k);
  const Matrix& vv = t.value(v);
  if (qv.rows() != kv.rows() || kv.rows() != vv.rows() || qv.cols() != kv.cols() ||
      kv.cols() != vv.cols())
    throw std::invalid_argument("ad::retention: Q " + qv.shape() + ", K " + kv.shape() + ", V " +
                                vv.shape());
  const std::size_t d = qv.cols();
  Matrix out(qv.rows(), d);
  if (final_states) final_states->clear();
  std::vector<char> used(qv.rows(), 0);
  for (const auto& seg : segments) {
    if (seg.rows.size() != seg.weights.size())
      throw std::invalid_argument("ad::retention: segment rows/weights length mismatch");
    for (std::size_t r : seg.rows) {
      if (r >= qv.rows() || used[r])
        throw std::invalid_argument("ad::retention: row " + std::to_string(r) +
                                    " out of range or in two segments");
      used[r] = 1;
    }
    const RetentionState zero = RetentionState::zero(d);
    const RetentionState& in = seg.state_in ? *seg.state_in : zero;
    RetentionResult res = graph_retention(gather(qv, seg.rows), gather(kv, seg.rows),
                                          gather(vv, seg.rows), DecayMask(seg.weights), in,
                                          paradigm, normalized);
    for (std::size_t i = 0; i < seg.rows.size(); ++i)
      std::copy(res.outputs.row(i).begin(), res.outputs.row(i).end(),
                out.row(seg.rows[i]).begin());
    if (final_states) final_states->push_back(std::move(res.state));
  }
  std::vector<RetentionSegment> segs(segments.begin(), segments.end());
  return t.push(std::move(out), any_grad(t, {q, k, v}),
                [q, k, v, segs = std::move(segs), normalized](Tape& tp, const Matrix& g) {
                  const Matrix& qv = tp.value(q);
                  const std::size_t d = qv.cols();
                  Matrix dq(qv.rows(), d), dk(qv.rows(), d), dv(qv.rows(), d);
                  for (const auto& seg : segs) {
                    SegmentGrads sg = retention_segment_backward(
                        gather(qv, seg.rows), gather(tp.value(k), seg.rows),
                        gather(tp.value(v), seg.rows), seg.weights, seg.state_in,
                        gather(g, seg.rows), normalized);
                    for (std::size_t i = 0; i < seg.rows.size(); ++i) {
                      const std::size_t r = seg.rows[i];
                      std::copy(sg.dq.row(i).begin(), sg.dq.row(i).end(), dq.row(r).begin());
                      std::copy(sg.dk.row(i).begin(), sg.dk.row(i).end(), dk.row(r).begin());
                      std::copy(sg.dv.row(i).begin(), sg.dv.row(i).end(), dv.row(r).begin());
                    }
                  }
                  tp.accumulate(q, dq);
                  tp.accumulate(k, dk);
                  tp.accumulate(v, dv);
                });
}

}  // namespace ad
}  // namespace grn
