// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace grn {

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h) {
  std::vector<std::size_t> all(x.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return finite_diff_grad(f, x, h, all);
}

std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h,
                                     std::span<const std::size_t> coords) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad;
  grad.reserve(coords.size());
  for (std::size_t i : coords) {
    if (i >= probe.size()) throw std::out_of_range("finite_diff_grad: coordinate out of range");
    const double saved = probe[i];
    probe[i] = saved + h;
    const double fp = f(probe);
    probe[i] = saved - h;
    const double fm = f(probe);
    probe[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("finite_diff_grad: non-finite function value at coordinate " +
                              std::to_string(i));
    }
    grad.push_back((fp - fm) / (2.0 * h));
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace grn
