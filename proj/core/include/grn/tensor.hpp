// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major double-precision matrices and the linear-algebra primitives
// every numeric layer above is written in. Rows are events/tokens, columns are
// feature channels.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace grn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix row_vector(std::span<const double> values);
  static Matrix column_vector(std::span<const double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  void fill(double value);
  bool all_finite() const noexcept;
  std::string shape() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_inplace(Matrix& a, const Matrix& b);
void axpy_inplace(Matrix& y, double alpha, const Matrix& x);

/// Element-wise product. Either operand may be a 1×c row vector, in which case
/// it is replicated down every row of the other operand.
Matrix hadamard(const Matrix& a, const Matrix& b);
/// a + row, with `row` (1×c) broadcast over every row of a.
Matrix add_row_broadcast(const Matrix& a, const Matrix& row);

Matrix transpose(const Matrix& a);
Matrix concat_rows(const Matrix& top, const Matrix& bottom);
Matrix concat_cols(std::span<const Matrix> blocks);
Matrix slice_cols(const Matrix& a, std::size_t begin, std::size_t count);
Matrix slice_rows(const Matrix& a, std::size_t begin, std::size_t count);
Matrix replicate_row(const Matrix& row, std::size_t times);
/// r×1 column of per-row sums.
Matrix row_sum(const Matrix& a);
/// 1×c row of per-column sums.
Matrix column_sum(const Matrix& a);

double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs(const Matrix& a);

}  // namespace grn
