// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "grn/nn_ops.hpp"
#include "grn/retention.hpp"

namespace grn {
namespace {

// Dense oracle: materialise D, R = (QKᵀ) ⊙ D, optionally apply the three
// rescalings (1/√d, row-normalised D, row sum clamp), then R·V.
Matrix oracle(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<double>& w,
              bool normalized) {
  const std::size_t n = k.rows(), d = k.cols();
  Matrix out(n, d);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> r(n, 0.0);
    double wsum = 0;
    for (std::size_t j = 0; j <= t; ++j) wsum += w[j];
    for (std::size_t j = 0; j <= t; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += q(t, c) * k(j, c);
      r[j] = normalized ? dot / std::sqrt(static_cast<double>(d)) * (w[j] / wsum) : dot * w[j];
    }
    if (normalized) {
      double rs = 0;
      for (double x : r) rs += x;
      const double div = std::max(std::abs(rs), 1.0);
      for (double& x : r) x /= div;
    }
    for (std::size_t j = 0; j <= t; ++j)
      for (std::size_t c = 0; c < d; ++c) out(t, c) += r[j] * v(j, c);
  }
  return out;
}

Matrix col(std::initializer_list<double> v) {
  std::vector<double> d(v);
  return Matrix::column_vector(d);
}

TEST(ProjectQkv, IdentityProjection) {
  const Matrix x_dst = Matrix::from_rows({{1, 2, 3}});
  const Matrix x_src = Matrix::from_rows({{4, 5, 6}, {7, 8, 9}});
  const Qkv p = project_qkv(x_dst, x_src, RetentionParams::identity(3), QueryRows::AsGiven);
  EXPECT_EQ(p.q, x_dst);
  EXPECT_EQ(p.k, x_src);
  EXPECT_EQ(p.v, x_src);
  const Qkv per = project_qkv(x_dst, x_src, RetentionParams::identity(3), QueryRows::PerEvent);
  EXPECT_EQ(per.q, replicate_row(x_dst, 2));
}

TEST(ProjectQkv, EmptyHistoryGivesEmptyKeys) {
  const Qkv p = project_qkv(Matrix(1, 3), Matrix(0, 3), RetentionParams::identity(3), QueryRows::AsGiven);
  EXPECT_EQ(p.k.rows(), 0u);
  EXPECT_EQ(p.v.rows(), 0u);
}

TEST(ProjectQkv, ScalarAffine) {
  RetentionParams p = RetentionParams::identity(1);
  p.w_q(0, 0) = 3;
  p.b_q(0, 0) = 1;
  const Qkv r = project_qkv(col({2}), col({2}), p, QueryRows::AsGiven);
  EXPECT_EQ(r.q(0, 0), 7.0);
}

TEST(ProjectQkv, WidthMismatchRejected) {
  EXPECT_THROW(project_qkv(Matrix(1, 2), Matrix(3, 3), RetentionParams::identity(3)), std::invalid_argument);
}

TEST(DecayMask, UnitLowerTriangle) {
  const double deltas[] = {5, 2, 0};
  const Matrix d = build_decay_mask(deltas, DecayPolicy::unit()).dense();
  EXPECT_EQ(d, Matrix::from_rows({{1, 0, 0}, {1, 1, 0}, {1, 1, 1}}));
}

TEST(DecayMask, TimeDecayIndexedBySourceColumn) {
  const double deltas[] = {1, 0};
  const Matrix d = build_decay_mask(deltas, DecayPolicy::time_decay(1.0)).dense();
  EXPECT_DOUBLE_EQ(d(0, 0), std::exp(-1.0));
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d(1, 0), std::exp(-1.0));
  EXPECT_EQ(d(1, 1), 1.0);
}

TEST(DecayMask, SingleEntry) {
  const double deltas[] = {3};
  const Matrix d = build_decay_mask(deltas, DecayPolicy::time_decay(0.5)).dense();
  EXPECT_EQ(d.rows(), 1u);
  EXPECT_DOUBLE_EQ(d(0, 0), std::exp(-1.5));
}

TEST(DecayMask, UpperTriangleZeroLowerPositive) {
  std::vector<double> deltas(9);
  for (std::size_t i = 0; i < 9; ++i) deltas[i] = 2.0 * static_cast<double>(9 - i);
  const Matrix d = build_decay_mask(deltas, DecayPolicy::time_decay(0.3)).dense();
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t k = 0; k < 9; ++k) {
      if (k > t) EXPECT_EQ(d(t, k), 0.0);
      else EXPECT_GT(d(t, k), 0.0);
    }
}

TEST(DecayPolicy, RejectsNonPositiveLambdaAndParses) {
  EXPECT_THROW(DecayPolicy::time_decay(0.0), std::invalid_argument);
  EXPECT_EQ(DecayPolicy::parse("unit").kind, DecayPolicy::Kind::Unit);
  const DecayPolicy p = DecayPolicy::parse("time:0.25");
  EXPECT_EQ(p.kind, DecayPolicy::Kind::TimeDecay);
  EXPECT_EQ(p.lambda, 0.25);
  EXPECT_EQ(DecayPolicy::parse(p.to_string()).lambda, 0.25);
}

TEST(NormalizeScores, UnitMaskRowNormalised) {
  const Matrix q(3, 4, 0.0), k(3, 4, 0.0);
  const NormalizedScores ns = normalize_scores(q, k, DecayMask(std::vector<double>(3, 1.0)));
  const Matrix expect = Matrix::from_rows({{1, 0, 0}, {0.5, 0.5, 0}, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  EXPECT_LT(max_abs_diff(ns.mask, expect), 1e-15);
}

TEST(NormalizeScores, ScoresScaledByInverseRootDim) {
  // d = 4, single position: score = q·k / 2, row sum 0.5 <= 1 so no clamp.
  const Matrix q = Matrix::from_rows({{0.5, 0, 0, 0}});
  const Matrix k = Matrix::from_rows({{2, 0, 0, 0}});
  const NormalizedScores ns = normalize_scores(q, k, DecayMask({1.0}));
  EXPECT_DOUBLE_EQ(ns.scores(0, 0), 0.5);
}

TEST(NormalizeScores, LargeRowSumClamped) {
  const Matrix q = Matrix::from_rows({{4}, {4}});
  const Matrix k = Matrix::from_rows({{1}, {-3}});
  const NormalizedScores ns = normalize_scores(q, k, DecayMask({1.0, 1.0}));
  EXPECT_DOUBLE_EQ(ns.scores(0, 0), 1.0);  // 4 / max(4, 1)
  // row 1: [2, -6], sum -4 -> divided by 4
  EXPECT_DOUBLE_EQ(ns.scores(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(ns.scores(1, 1), -1.5);
}

TEST(RetentionParallel, HandExample) {
  const Matrix o = retention_parallel(col({1, 1}), col({1, 2}), col({1, 1}), DecayMask({1.0, 1.0}), false);
  EXPECT_EQ(o, col({1, 3}));
}

TEST(RetentionParallel, ZeroValuesGiveZero) {
  Rng rng(1);
  const Matrix q = rng_uniform(rng, 5, 3, -1, 1), k = rng_uniform(rng, 5, 3, -1, 1);
  EXPECT_EQ(retention_parallel(q, k, Matrix(5, 3), DecayMask(std::vector<double>(5, 1.0)), true), Matrix(5, 3));
}

TEST(RetentionParallel, SingleTerm) {
  const Matrix q = Matrix::from_rows({{1, 2}}), k = Matrix::from_rows({{3, -1}}), v = Matrix::from_rows({{2, 5}});
  const Matrix o = retention_parallel(q, k, v, DecayMask({0.5}), false);
  EXPECT_EQ(o, Matrix::from_rows({{0.5 * 1 * 2, 0.5 * 1 * 5}}));
}

TEST(RetentionParallel, MatchesDenseOracle) {
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(s);
    const std::size_t n = 1 + rng.uniform_index(30), d = 1 + rng.uniform_index(8);
    const Matrix q = rng_uniform(rng, n, d, -1, 1), k = rng_uniform(rng, n, d, -1, 1),
                 v = rng_uniform(rng, n, d, -1, 1);
    std::vector<double> w(n);
    for (auto& x : w) x = rng.uniform(0.05, 2.0);
    for (bool norm : {false, true})
      EXPECT_LT(max_abs_diff(retention_parallel(q, k, v, DecayMask(w), norm), oracle(q, k, v, w, norm)), 1e-12)
          << "seed " << s << " normalized " << norm;
  }
}

TEST(RetentionParallel, ShapeMismatchRejected) {
  EXPECT_THROW(retention_parallel(Matrix(2, 3), Matrix(2, 3), Matrix(2, 2), DecayMask({1.0, 1.0}), false),
               std::invalid_argument);
  EXPECT_THROW(retention_parallel(Matrix(2, 3), Matrix(2, 3), Matrix(2, 3), DecayMask({1.0}), false),
               std::invalid_argument);
}

TEST(RetentionRecurrent, FirstAndSecondStep) {
  RetentionState st = RetentionState::zero(1);
  const double one[] = {1.0}, two[] = {2.0};
  Matrix o = retention_recurrent(st, one, one, one, 1.0, false);
  EXPECT_EQ(st.s(0, 0), 1.0);
  EXPECT_EQ(o(0, 0), 1.0);
  o = retention_recurrent(st, one, two, one, 1.0, false);
  EXPECT_EQ(st.s(0, 0), 3.0);
  EXPECT_EQ(o(0, 0), 3.0);
}

TEST(RetentionRecurrent, ZeroWeightFreezesState) {
  Rng rng(2);
  RetentionState st = RetentionState::zero(3);
  const Matrix a = rng_uniform(rng, 3, 3, -1, 1);
  retention_recurrent(st, a.row(0), a.row(1), a.row(2), 1.0, false);
  const RetentionState before = st;
  const Matrix q = rng_uniform(rng, 1, 3, -1, 1);
  const Matrix o = retention_recurrent(st, q.row(0), a.row(0), a.row(1), 0.0, false);
  EXPECT_EQ(st.s, before.s);
  EXPECT_EQ(o, matmul(q, before.s));
  EXPECT_EQ(retention_read(before, q.row(0), false), o);
}

TEST(RetentionRecurrent, EmptyStateReadsZero) {
  const double q[] = {1.0, -2.0};
  EXPECT_EQ(retention_read(RetentionState::zero(2), q, true), Matrix(1, 2));
  EXPECT_EQ(retention_read(RetentionState::zero(2), q, false), Matrix(1, 2));
}

TEST(RetentionChunkwise, CollapsesToParallelForOneChunk) {
  Rng rng(3);
  const Matrix q = rng_uniform(rng, 9, 4, -1, 1), k = rng_uniform(rng, 9, 4, -1, 1), v = rng_uniform(rng, 9, 4, -1, 1);
  const DecayMask m(std::vector<double>(9, 0.7));
  const RetentionResult r = retention_chunkwise(q, k, v, m, RetentionState::zero(4), true);
  EXPECT_LT(max_abs_diff(r.outputs, retention_parallel(q, k, v, m, true)), 1e-14);
}

TEST(RetentionChunkwise, CrossChunkTermHandExample) {
  // Chunks {[1]}, {[2]}: chunk 2 intra = 1*2*1 = 2, cross = q*S1 = 1.
  const RetentionResult c1 = retention_chunkwise(col({1}), col({1}), col({1}), DecayMask({1.0}), RetentionState::zero(1), false);
  const RetentionResult c2 = retention_chunkwise(col({1}), col({2}), col({1}), DecayMask({1.0}), c1.state, false);
  EXPECT_EQ(c2.outputs(0, 0), 3.0);
  EXPECT_EQ(c2.state.s(0, 0), 3.0);
}

TEST(RetentionChunkwise, StageFormReplicatesFrozenQuery) {
  Rng rng(4);
  const RetentionParams p = RetentionParams::xavier(3, rng);
  const Matrix x_prev = rng_uniform(rng, 1, 3, -1, 1), x_src = rng_uniform(rng, 4, 3, -1, 1);
  const DecayMask m(std::vector<double>(4, 1.0));
  const RetentionResult a = retention_chunkwise(x_prev, x_src, p, m, RetentionState::zero(3), false);
  const Qkv qkv = project_qkv(x_prev, x_src, p, QueryRows::PerEvent);
  EXPECT_EQ(a.outputs, retention_chunkwise(qkv.q, qkv.k, qkv.v, m, RetentionState::zero(3), false).outputs);
}

struct Instance {
  Matrix q, k, v;
  DecayMask mask;
};

Instance random_instance(std::uint64_t seed, std::size_t n, std::size_t d) {
  Rng rng(seed);
  Instance in{rng_uniform(rng, n, d, -1, 1), rng_uniform(rng, n, d, -1, 1), rng_uniform(rng, n, d, -1, 1), {}};
  std::vector<double> deltas(n);
  for (auto& x : deltas) x = std::floor(rng.uniform(0, 40));
  in.mask = build_decay_mask(deltas, seed % 2 ? DecayPolicy::unit() : DecayPolicy::time_decay(0.05));
  return in;
}

TEST(GraphRetention, ParadigmsAgree) {
  const std::size_t lens[] = {1, 2, 3, 17, 128};
  const std::size_t dims[] = {1, 4, 32};
  std::uint64_t seed = 100;
  for (std::size_t n : lens)
    for (std::size_t d : dims) {
      const Instance in = random_instance(++seed, n, d);
      for (bool norm : {false, true}) {
        const RetentionResult par = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(d), Paradigm::parallel(), norm);
        for (Paradigm p : {Paradigm::recurrent(), Paradigm::chunkwise(1), Paradigm::chunkwise(2),
                           Paradigm::chunkwise(7), Paradigm::chunkwise(n)}) {
          const RetentionResult o = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(d), p, norm);
          EXPECT_LT(max_abs_diff(o.outputs, par.outputs), 1e-9) << p.to_string() << " L=" << n << " d=" << d;
          EXPECT_LT(max_abs_diff(o.state.s, par.state.s), 1e-9);
        }
        if (!norm) EXPECT_LT(max_abs_diff(par.outputs, oracle(in.q, in.k, in.v, std::vector<double>(in.mask.weights().begin(), in.mask.weights().end()), false)), 1e-9);
      }
    }
}

TEST(GraphRetention, ParallelEqualsChunkwiseOfFullLength) {
  const Instance in = random_instance(5, 23, 4);
  const auto a = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(4), Paradigm::parallel(), true);
  const auto b = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(4), Paradigm::chunkwise(23), true);
  EXPECT_LT(max_abs_diff(a.outputs, b.outputs), 1e-12);
}

TEST(GraphRetention, EmptyHistoryLeavesStateAndReadsZero) {
  RetentionState st = RetentionState::zero(2);
  st.s(0, 1) = 4.0;
  st.weight_sum = 1.0;
  const RetentionResult r = graph_retention(Matrix(0, 2), Matrix(0, 2), Matrix(0, 2), DecayMask(), st, Paradigm::recurrent(), true);
  EXPECT_EQ(r.outputs.rows(), 0u);
  EXPECT_EQ(r.state.s, st.s);
  const double q[] = {0.3, 0.1};
  EXPECT_EQ(retention_read(RetentionState::zero(2), q, true), Matrix(1, 2));
}

TEST(GraphRetention, NeighbourFormMatchesProjectedForm) {
  Rng rng(6);
  const RetentionParams p = RetentionParams::xavier(4, rng);
  const Matrix x_dst = rng_uniform(rng, 1, 4, -1, 1), x_src = rng_uniform(rng, 6, 4, -1, 1);
  const std::vector<double> deltas = {9, 7, 7, 4, 1, 0};
  const auto policy = DecayPolicy::time_decay(0.1);
  const auto a = graph_retention(x_dst, x_src, deltas, p, policy, RetentionState::zero(4), Paradigm::chunkwise(4), true);
  const Qkv qkv = project_qkv(x_dst, x_src, p, QueryRows::PerEvent);
  const auto b = graph_retention(qkv.q, qkv.k, qkv.v, build_decay_mask(deltas, policy), RetentionState::zero(4), Paradigm::parallel(), true);
  EXPECT_LT(max_abs_diff(a.outputs, b.outputs), 1e-12);
}

TEST(GraphRetention, CausalityBitExact) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    Instance in = random_instance(s, 20, 4);
    const Matrix base = retention_parallel(in.q, in.k, in.v, in.mask, s % 3 == 0);
    Rng rng(s + 1000);
    const std::size_t t = rng.uniform_index(19);
    std::vector<double> w(in.mask.weights().begin(), in.mask.weights().end());
    for (std::size_t j = t + 1; j < 20; ++j) {
      in.k(j, 0) += 5.0;
      in.v(j, 1) -= 3.0;
      w[j] *= 0.25;
    }
    const Matrix pert = retention_parallel(in.q, in.k, in.v, DecayMask(w), s % 3 == 0);
    EXPECT_EQ(slice_rows(pert, 0, t + 1), slice_rows(base, 0, t + 1)) << "seed " << s;
  }
}

TEST(GraphRetention, StateAdditivity) {
  const Instance in = random_instance(9, 30, 4);
  const auto whole = retention_chunkwise(in.q, in.k, in.v, in.mask, RetentionState::zero(4), false);
  const auto a = retention_chunkwise(slice_rows(in.q, 0, 11), slice_rows(in.k, 0, 11), slice_rows(in.v, 0, 11),
                                     in.mask.slice(0, 11), RetentionState::zero(4), false);
  const auto b = retention_chunkwise(slice_rows(in.q, 11, 19), slice_rows(in.k, 11, 19), slice_rows(in.v, 11, 19),
                                     in.mask.slice(11, 19), a.state, false);
  EXPECT_LT(max_abs_diff(b.state.s, whole.state.s), 1e-12);
  EXPECT_NEAR(b.state.weight_sum, whole.state.weight_sum, 1e-12);
}

TEST(GraphRetention, NormalisationIsPositiveRowRescaling) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Instance in = random_instance(s, 12, 8);
    const Matrix a = retention_parallel(in.q, in.k, in.v, in.mask, true);
    const Matrix u = retention_parallel(in.q, in.k, in.v, in.mask, false);
    for (std::size_t r = 0; r < 12; ++r) {
      const double ratio = a(r, 0) / u(r, 0);
      EXPECT_GT(ratio, 0.0);
      for (std::size_t c = 1; c < 8; ++c) EXPECT_NEAR(a(r, c), ratio * u(r, c), 1e-12 * (1 + std::abs(u(r, c))));
    }
  }
}

TEST(GraphRetention, LinearInValues) {
  const Instance in = random_instance(12, 15, 4);
  Rng rng(13);
  const Matrix v2 = rng_uniform(rng, 15, 4, -1, 1);
  const Matrix lhs = retention_parallel(in.q, in.k, add(scale(in.v, 2.5), scale(v2, -0.75)), in.mask, false);
  const Matrix rhs = add(scale(retention_parallel(in.q, in.k, in.v, in.mask, false), 2.5),
                         scale(retention_parallel(in.q, in.k, v2, in.mask, false), -0.75));
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-9);
}

TEST(Paradigm, ParseAndPrint) {
  EXPECT_EQ(Paradigm::parse("parallel"), Paradigm::parallel());
  EXPECT_EQ(Paradigm::parse("recurrent"), Paradigm::recurrent());
  EXPECT_EQ(Paradigm::parse("chunkwise", 7), Paradigm::chunkwise(7));
  EXPECT_EQ(Paradigm::chunkwise(7).to_string(), "chunkwise(7)");
  EXPECT_THROW(Paradigm::parse("sideways"), std::invalid_argument);
}

TEST(Fault, SignFlipBreaksRecurrentEquivalence) {
  const Instance in = random_instance(21, 10, 4);
  fault::set_recurrent_sign_flip(true);
  const auto rec = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(4), Paradigm::recurrent(), false);
  fault::set_recurrent_sign_flip(false);
  const auto par = graph_retention(in.q, in.k, in.v, in.mask, RetentionState::zero(4), Paradigm::parallel(), false);
  EXPECT_GT(max_abs_diff(rec.outputs, par.outputs), 1e-3);
}

}  // namespace
}  // namespace grn
