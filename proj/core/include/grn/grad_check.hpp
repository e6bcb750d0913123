// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

namespace grn {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central-difference gradient (f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h for every
/// coordinate. Throws std::domain_error naming the coordinate if f is not
/// finite at a probe point.
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h);

/// Same, restricted to the listed coordinates (result[i] is d f / d x[coords[i]]).
std::vector<double> finite_diff_grad(const ScalarFunction& f, std::span<const double> x, double h,
                                     std::span<const std::size_t> coords);

/// |a − b| / max(|a|, |b|, floor). The floor keeps near-zero pairs from
/// dominating; callers pick it relative to the gradient scale.
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace grn
