// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Activations and normalisations, each with the adjoint used by the tape.

#pragma once

#include <cstddef>
#include <span>

#include "grn/tensor.hpp"

namespace grn {

/// Row-wise layer normalisation with affine gain/bias (length == x.cols()).
Matrix layer_norm(const Matrix& x, double eps, std::span<const double> gain,
                  std::span<const double> bias);

/// Row-wise group normalisation: each row is split into `groups` contiguous
/// channel groups, and each group is normalised to zero mean / unit variance
/// before the per-channel affine. groups == 1 is layer_norm.
Matrix group_norm(const Matrix& x, std::size_t groups, double eps, std::span<const double> gain,
                  std::span<const double> bias);

struct NormGrads {
  Matrix dx;
  Matrix dgain;  // 1×c
  Matrix dbias;  // 1×c
};

NormGrads group_norm_backward(const Matrix& x, const Matrix& dy, std::size_t groups, double eps,
                              std::span<const double> gain);

/// x · ReLU6(x + 3) / 6
double hswish(double x);
double hswish_derivative(double x);
Matrix hswish(const Matrix& x);

double sigmoid(double x);
Matrix sigmoid(const Matrix& x);

/// Numerically stable softmax over each row.
Matrix softmax_rows(const Matrix& logits);

}  // namespace grn
