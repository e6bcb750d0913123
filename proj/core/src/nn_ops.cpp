// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace grn {
namespace {

void check_norm_args(const char* op, const Matrix& x, std::size_t groups, double eps,
                     std::span<const double> gain, std::span<const double> bias) {
  if (x.cols() == 0) throw std::invalid_argument(std::string(op) + ": zero-length rows");
  if (groups == 0 || x.cols() % groups != 0) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(x.cols()) +
                                " channels not divisible into " + std::to_string(groups) +
                                " groups");
  }
  if (!(eps > 0.0)) throw std::invalid_argument(std::string(op) + ": eps must be positive");
  if (gain.size() != x.cols() || bias.size() != x.cols()) {
    throw std::invalid_argument(std::string(op) + ": gain/bias length must equal " +
                                std::to_string(x.cols()));
  }
}

}  // namespace

Matrix layer_norm(const Matrix& x, double eps, std::span<const double> gain,
                  std::span<const double> bias) {
  check_norm_args("layer_norm", x, 1, eps, gain, bias);
  return group_norm(x, 1, eps, gain, bias);
}

Matrix group_norm(const Matrix& x, std::size_t groups, double eps, std::span<const double> gain,
                  std::span<const double> bias) {
  check_norm_args("group_norm", x, groups, eps, gain, bias);
  const std::size_t width = x.cols() / groups;
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t begin = g * width;
      double mean = 0.0;
      for (std::size_t c = begin; c < begin + width; ++c) mean += in[c];
      mean /= static_cast<double>(width);
      double var = 0.0;
      for (std::size_t c = begin; c < begin + width; ++c) var += (in[c] - mean) * (in[c] - mean);
      var /= static_cast<double>(width);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      for (std::size_t c = begin; c < begin + width; ++c)
        o[c] = gain[c] * (in[c] - mean) * inv_std + bias[c];
    }
  }
  return out;
}

NormGrads group_norm_backward(const Matrix& x, const Matrix& dy, std::size_t groups, double eps,
                              std::span<const double> gain) {
  const std::size_t width = x.cols() / groups;
  NormGrads g{Matrix(x.rows(), x.cols()), Matrix(1, x.cols()), Matrix(1, x.cols())};
  std::vector<double> xhat(width), dxhat(width);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto d = dy.row(r);
    auto dx = g.dx.row(r);
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t begin = grp * width;
      double mean = 0.0;
      for (std::size_t c = 0; c < width; ++c) mean += in[begin + c];
      mean /= static_cast<double>(width);
      double var = 0.0;
      for (std::size_t c = 0; c < width; ++c) var += (in[begin + c] - mean) * (in[begin + c] - mean);
      var /= static_cast<double>(width);
      const double inv_std = 1.0 / std::sqrt(var + eps);
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t c = 0; c < width; ++c) {
        xhat[c] = (in[begin + c] - mean) * inv_std;
        dxhat[c] = d[begin + c] * gain[begin + c];
        mean_dxhat += dxhat[c];
        mean_dxhat_xhat += dxhat[c] * xhat[c];
        g.dgain(0, begin + c) += d[begin + c] * xhat[c];
        g.dbias(0, begin + c) += d[begin + c];
      }
      mean_dxhat /= static_cast<double>(width);
      mean_dxhat_xhat /= static_cast<double>(width);
      for (std::size_t c = 0; c < width; ++c)
        dx[begin + c] = inv_std * (dxhat[c] - mean_dxhat - xhat[c] * mean_dxhat_xhat);
    }
  }
  return g;
}

double hswish(double x) { return x * std::min(std::max(0.0, x + 3.0), 6.0) / 6.0; }

double hswish_derivative(double x) {
  if (x <= -3.0) return 0.0;
  if (x >= 3.0) return 1.0;
  return (2.0 * x + 3.0) / 6.0;
}

Matrix hswish(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = hswish(v);
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = sigmoid(v);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) total += (o[c] = std::exp(in[c] - mx));
    for (double& v : o) v /= total;
  }
  return out;
}

}  // namespace grn
