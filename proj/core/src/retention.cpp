// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/retention.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace grn {
namespace {

std::atomic<bool> g_sign_flip{false};

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_qkv(const char* op, const Matrix& q, const Matrix& k, const Matrix& v) {
  require(k.rows() == v.rows(), std::string(op) + ": K " + k.shape() + " and V " + v.shape() +
                                    " row counts differ");
  require(q.cols() == k.cols() && k.cols() == v.cols(),
          std::string(op) + ": widths differ (Q " + q.shape() + ", K " + k.shape() + ", V " +
              v.shape() + ")");
}

// Finalise one output row from its raw accumulators.
//   raw_out = q·S_total, raw_r = q·z_total, total_w = Σ w.
void finish_row(std::span<double> out, std::span<const double> raw_out, double raw_r,
                double total_w, std::size_t d, bool normalized) {
  if (!normalized) {
    std::copy(raw_out.begin(), raw_out.end(), out.begin());
    return;
  }
  if (total_w == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double s = 1.0 / (std::sqrt(static_cast<double>(d)) * total_w);
  const double r = raw_r * s;
  const double c = std::max(std::abs(r), 1.0);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = raw_out[j] * s / c;
}

void ensure_state_shape(RetentionState& state, std::size_t d) {
  if (state.s.rows() != d || state.s.cols() != d) {
    require(state.s.empty() && state.weight_sum == 0.0,
            "retention: state is " + state.s.shape() + " but d = " + std::to_string(d));
    state.s = Matrix(d, d);
  }
  if (state.key_sum.size() != d) state.key_sum.assign(d, 0.0);
}

// raw_out = q·S, raw_r = q·z for a (possibly lazily empty) state.
void read_raw(const RetentionState& state, const double* q, std::size_t d, double* raw_out,
              double& raw_r) {
  std::fill(raw_out, raw_out + d, 0.0);
  raw_r = 0.0;
  if (state.s.empty()) return;
  for (std::size_t a = 0; a < d; ++a) {
    const double qa = q[a];
    if (qa == 0.0) continue;
    const double* srow = state.s.row(a).data();
    for (std::size_t b = 0; b < d; ++b) raw_out[b] += qa * srow[b];
    raw_r += qa * state.key_sum[a];
  }
}

void absorb(RetentionState& state, const double* k, const double* v, double w, std::size_t d) {
  if (w == 0.0) return;
  ensure_state_shape(state, d);
  for (std::size_t a = 0; a < d; ++a) {
    const double wk = w * k[a];
    state.key_sum[a] += wk;
    if (wk == 0.0) continue;
    double* srow = state.s.row(a).data();
    for (std::size_t b = 0; b < d; ++b) srow[b] += wk * v[b];
  }
  state.weight_sum += w;
}

}  // namespace

RetentionParams RetentionParams::identity(std::size_t d) {
  return {Matrix::identity(d), Matrix::identity(d), Matrix::identity(d),
          Matrix(1, d),        Matrix(1, d),        Matrix(1, d)};
}

RetentionParams RetentionParams::xavier(std::size_t d, Rng& rng) {
  RetentionParams p;
  p.w_q = rng_init_xavier(rng, d, d);
  p.w_k = rng_init_xavier(rng, d, d);
  p.w_v = rng_init_xavier(rng, d, d);
  p.b_q = Matrix(1, d);
  p.b_k = Matrix(1, d);
  p.b_v = Matrix(1, d);
  return p;
}

DecayPolicy DecayPolicy::time_decay(double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda), "DecayPolicy: lambda must be positive");
  return {Kind::TimeDecay, lambda};
}

double DecayPolicy::weight(double delta) const {
  return kind == Kind::Unit ? 1.0 : std::exp(-lambda * delta);
}

std::string DecayPolicy::to_string() const {
  if (kind == Kind::Unit) return "unit";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, lambda);
  return "time:" + std::string(buf, res.ptr);
}

DecayPolicy DecayPolicy::parse(std::string_view text) {
  if (text == "unit") return unit();
  if (text.starts_with("time:")) {
    const std::string num(text.substr(5));
    std::size_t used = 0;
    double lambda = 0.0;
    try {
      lambda = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == num.size() && used > 0, "DecayPolicy: bad lambda in '" + std::string(text) + "'");
    return time_decay(lambda);
  }
  throw std::invalid_argument("DecayPolicy: expected 'unit' or 'time:<lambda>', got '" +
                              std::string(text) + "'");
}

DecayMask::DecayMask(std::vector<double> weights) : weights_(std::move(weights)) {
  prefix_.resize(weights_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    require(weights_[i] >= 0.0 && std::isfinite(weights_[i]),
            "DecayMask: weights must be finite and non-negative");
    acc += weights_[i];
    prefix_[i] = acc;
  }
}

DecayMask DecayMask::slice(std::size_t begin, std::size_t count) const {
  return DecayMask(std::vector<double>(weights_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       weights_.begin() + static_cast<std::ptrdiff_t>(begin + count)));
}

Matrix DecayMask::dense() const {
  Matrix d(size(), size());
  for (std::size_t t = 0; t < size(); ++t)
    for (std::size_t k = 0; k <= t; ++k) d(t, k) = weights_[k];
  return d;
}

DecayMask build_decay_mask(std::span<const double> deltas, const DecayPolicy& policy) {
  std::vector<double> w;
  w.reserve(deltas.size());
  for (double delta : deltas) {
    require(delta >= 0.0, "build_decay_mask: negative time interval");
    w.push_back(policy.weight(delta));
  }
  return DecayMask(std::move(w));
}

RetentionState RetentionState::zero(std::size_t d) {
  RetentionState st;
  st.s = Matrix(d, d);
  st.key_sum.assign(d, 0.0);
  return st;
}

Qkv project_qkv(const Matrix& x_dst, const Matrix& x_src, const RetentionParams& params,
                QueryRows rows) {
  const std::size_t d = params.dim();
  require(x_dst.cols() == d, "project_qkv: x_dst width " + std::to_string(x_dst.cols()) +
                                 " != d " + std::to_string(d));
  require(x_src.cols() == d || (x_src.rows() == 0),
          "project_qkv: X_src width " + std::to_string(x_src.cols()) + " != d " + std::to_string(d));
  Qkv out;
  const Matrix src = x_src.rows() == 0 ? Matrix(0, d) : x_src;
  out.k = add_row_broadcast(matmul(src, params.w_k), params.b_k);
  out.v = add_row_broadcast(matmul(src, params.w_v), params.b_v);
  const Matrix q1 = add_row_broadcast(matmul(x_dst, params.w_q), params.b_q);
  if (rows == QueryRows::PerEvent && x_dst.rows() == 1 && src.rows() != 1) {
    out.q = replicate_row(q1, src.rows());
  } else {
    out.q = q1;
  }
  return out;
}

NormalizedScores normalize_scores(const Matrix& q, const Matrix& k, const DecayMask& d) {
  require(q.rows() == k.rows() && q.rows() == d.size() && q.cols() == k.cols(),
          "normalize_scores: Q " + q.shape() + ", K " + k.shape() + ", D of size " +
              std::to_string(d.size()));
  const std::size_t n = q.rows();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  NormalizedScores out{scale(matmul_nt(q, k), inv_sqrt_d), d.dense()};
  for (std::size_t t = 0; t < n; ++t) {
    const double denom = d.row_sum(t);
    if (denom == 0.0) continue;
    for (std::size_t m = 0; m < n; ++m) out.mask(t, m) /= denom;
  }
  out.scores = hadamard(out.scores, out.mask);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0.0;
    for (double v : out.scores.row(t)) sum += v;
    const double c = std::max(std::abs(sum), 1.0);
    for (double& v : out.scores.row(t)) v /= c;
  }
  return out;
}

Matrix retention_parallel(const Matrix& q, const Matrix& k, const Matrix& v, const DecayMask& d,
                          bool normalized) {
  check_qkv("retention_parallel", q, k, v);
  const std::size_t len = k.rows();
  require(d.size() == len, "retention_parallel: mask size " + std::to_string(d.size()) +
                               " != sequence length " + std::to_string(len));
  require(q.rows() <= len, "retention_parallel: more queries (" + std::to_string(q.rows()) +
                               ") than sequence rows (" + std::to_string(len) + ")");
  const std::size_t dim = q.cols();
  const std::size_t offset = len - q.rows();
  Matrix out(q.rows(), dim);
  std::vector<double> raw(dim);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const std::size_t t = offset + i;
    const double* qt = q.row(i).data();
    std::fill(raw.begin(), raw.end(), 0.0);
    double raw_r = 0.0;
    for (std::size_t kk = 0; kk <= t; ++kk) {
      const double w = d.weight(kk);
      if (w == 0.0) continue;
      const double score = w * dot(qt, k.row(kk).data(), dim);
      raw_r += score;
      const double* vk = v.row(kk).data();
      for (std::size_t j = 0; j < dim; ++j) raw[j] += score * vk[j];
    }
    finish_row(out.row(i), raw, raw_r, d.row_sum(t), dim, normalized);
  }
  return out;
}

Matrix retention_read(const RetentionState& state, std::span<const double> q, bool normalized) {
  const std::size_t d = q.size();
  require(state.s.empty() || state.s.rows() == d,
          "retention_read: state " + state.s.shape() + " vs query width " + std::to_string(d));
  Matrix out(1, d);
  std::vector<double> raw(d);
  double raw_r = 0.0;
  read_raw(state, q.data(), d, raw.data(), raw_r);
  finish_row(out.row(0), raw, raw_r, state.weight_sum, d, normalized);
  return out;
}

Matrix retention_recurrent(RetentionState& state, std::span<const double> q,
                           std::span<const double> k, std::span<const double> v, double w,
                           bool normalized) {
  const std::size_t d = q.size();
  require(k.size() == d && v.size() == d, "retention_recurrent: q/k/v widths differ");
  require(state.s.empty() || state.s.rows() == d,
          "retention_recurrent: state " + state.s.shape() + " vs width " + std::to_string(d));
  absorb(state, k.data(), v.data(), w, d);
  Matrix out = retention_read(state, q, normalized);
  if (g_sign_flip.load(std::memory_order_relaxed)) {
    for (double& x : out.data()) x = -x;
  }
  return out;
}

RetentionResult retention_chunkwise(const Matrix& q_chunk, const Matrix& k_chunk,
                                    const Matrix& v_chunk, const DecayMask& d_chunk,
                                    const RetentionState& state_in, bool normalized) {
  check_qkv("retention_chunkwise", q_chunk, k_chunk, v_chunk);
  require(q_chunk.rows() == k_chunk.rows() && d_chunk.size() == k_chunk.rows(),
          "retention_chunkwise: chunk rows disagree (Q " + q_chunk.shape() + ", K " +
              k_chunk.shape() + ", D " + std::to_string(d_chunk.size()) + ")");
  const std::size_t dim = q_chunk.cols();
  const std::size_t len = k_chunk.rows();
  require(state_in.s.empty() || state_in.s.rows() == dim,
          "retention_chunkwise: state " + state_in.s.shape() + " vs width " + std::to_string(dim));

  RetentionResult res{Matrix(len, dim), state_in};
  std::vector<double> raw(dim);
  for (std::size_t t = 0; t < len; ++t) {
    const double* qt = q_chunk.row(t).data();
    double raw_r = 0.0;
    read_raw(state_in, qt, dim, raw.data(), raw_r);  // inherited-state term
    for (std::size_t kk = 0; kk <= t; ++kk) {
      const double w = d_chunk.weight(kk);
      if (w == 0.0) continue;
      const double score = w * dot(qt, k_chunk.row(kk).data(), dim);
      raw_r += score;
      const double* vk = v_chunk.row(kk).data();
      for (std::size_t j = 0; j < dim; ++j) raw[j] += score * vk[j];
    }
    finish_row(res.outputs.row(t), raw, raw_r, state_in.weight_sum + d_chunk.row_sum(t), dim,
               normalized);
  }
  for (std::size_t t = 0; t < len; ++t)
    absorb(res.state, k_chunk.row(t).data(), v_chunk.row(t).data(), d_chunk.weight(t), dim);
  return res;
}

RetentionResult retention_chunkwise(const Matrix& x_dst_prev, const Matrix& x_src_chunk,
                                    const RetentionParams& params, const DecayMask& d_chunk,
                                    const RetentionState& state_in, bool normalized) {
  require(x_dst_prev.rows() == 1, "retention_chunkwise: x_dst_prev must be a single row");
  const Qkv p = project_qkv(x_dst_prev, x_src_chunk, params, QueryRows::PerEvent);
  return retention_chunkwise(p.q, p.k, p.v, d_chunk, state_in, normalized);
}

Paradigm Paradigm::chunkwise(std::size_t b) {
  require(b >= 1, "Paradigm: chunk size must be >= 1");
  return {Kind::Chunkwise, b};
}

std::string Paradigm::to_string() const {
  switch (kind) {
    case Kind::Parallel:
      return "parallel";
    case Kind::Recurrent:
      return "recurrent";
    case Kind::Chunkwise:
      return "chunkwise(" + std::to_string(chunk_size) + ")";
  }
  return "?";
}

Paradigm Paradigm::parse(std::string_view name, std::size_t chunk_size) {
  if (name == "parallel") return parallel();
  if (name == "recurrent") return recurrent();
  if (name == "chunkwise") return chunkwise(chunk_size == 0 ? 1 : chunk_size);
  throw std::invalid_argument("unknown paradigm '" + std::string(name) +
                              "' (expected parallel|recurrent|chunkwise)");
}

RetentionResult graph_retention(const Matrix& q, const Matrix& k, const Matrix& v,
                                const DecayMask& d, const RetentionState& state_in,
                                Paradigm paradigm, bool normalized) {
  check_qkv("graph_retention", q, k, v);
  require(q.rows() == k.rows() && d.size() == k.rows(),
          "graph_retention: Q " + q.shape() + ", K " + k.shape() + " and mask of size " +
              std::to_string(d.size()) + " disagree");
  const std::size_t len = k.rows();
  const std::size_t dim = q.cols();
  if (len == 0) return {Matrix(0, dim), state_in};

  switch (paradigm.kind) {
    case Paradigm::Kind::Parallel:
      return retention_chunkwise(q, k, v, d, state_in, normalized);
    case Paradigm::Kind::Recurrent: {
      RetentionResult res{Matrix(len, dim), state_in};
      for (std::size_t t = 0; t < len; ++t) {
        const Matrix o =
            retention_recurrent(res.state, q.row(t), k.row(t), v.row(t), d.weight(t), normalized);
        std::copy(o.data().begin(), o.data().end(), res.outputs.row(t).begin());
      }
      return res;
    }
    case Paradigm::Kind::Chunkwise: {
      require(paradigm.chunk_size >= 1, "graph_retention: chunk size must be >= 1");
      RetentionResult res{Matrix(len, dim), state_in};
      for (std::size_t begin = 0; begin < len; begin += paradigm.chunk_size) {
        const std::size_t count = std::min(paradigm.chunk_size, len - begin);
        RetentionResult part =
            retention_chunkwise(slice_rows(q, begin, count), slice_rows(k, begin, count),
                                slice_rows(v, begin, count), d.slice(begin, count), res.state,
                                normalized);
        std::copy(part.outputs.data().begin(), part.outputs.data().end(),
                  res.outputs.row(begin).begin());
        res.state = std::move(part.state);
      }
      return res;
    }
  }
  throw std::logic_error("graph_retention: unhandled paradigm");
}

RetentionResult graph_retention(const Matrix& x_dst, const Matrix& x_src,
                                std::span<const double> deltas, const RetentionParams& params,
                                const DecayPolicy& policy, const RetentionState& state_in,
                                Paradigm paradigm, bool normalized) {
  require(deltas.size() == x_src.rows(), "graph_retention: " + std::to_string(deltas.size()) +
                                             " deltas for " + std::to_string(x_src.rows()) +
                                             " neighbours");
  const Qkv p = project_qkv(x_dst, x_src, params, QueryRows::PerEvent);
  return graph_retention(p.q, p.k, p.v, build_decay_mask(deltas, policy), state_in, paradigm,
                         normalized);
}

namespace fault {
void set_recurrent_sign_flip(bool enabled) { g_sign_flip.store(enabled); }
bool recurrent_sign_flip() { return g_sign_flip.load(); }
}  // namespace fault

}  // namespace grn
