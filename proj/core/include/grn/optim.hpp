// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "grn/tensor.hpp"

namespace grn {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  /// Zero moments shaped like `params`.
  static AdamState for_params(const std::vector<Matrix>& params, double lr, double weight_decay);
};

/// p ← p·(1 − lr·wd), then the bias-corrected Adam update.
void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& state);

}  // namespace grn
