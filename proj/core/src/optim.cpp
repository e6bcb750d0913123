// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace grn {

AdamState AdamState::for_params(const std::vector<Matrix>& params, double lr, double weight_decay) {
  AdamState s;
  s.lr = lr;
  s.weight_decay = weight_decay;
  for (const auto& p : params) {
    s.m.emplace_back(p.rows(), p.cols());
    s.v.emplace_back(p.rows(), p.cols());
  }
  return s;
}

void adam_step(std::vector<Matrix>& params, const std::vector<Matrix>& grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size() || s.v.size() != params.size())
    throw std::invalid_argument("adam_step: parameter, gradient and moment counts differ");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  const double shrink = 1.0 - s.lr * s.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = s.m[i].data();
    auto v = s.v[i].data();
    if (g.size() != p.size())
      throw std::invalid_argument("adam_step: gradient " + grads[i].shape() + " vs parameter " +
                                  params[i].shape());
    for (std::size_t j = 0; j < p.size(); ++j) {
      p[j] *= shrink;
      m[j] = s.beta1 * m[j] + (1.0 - s.beta1) * g[j];
      v[j] = s.beta2 * v[j] + (1.0 - s.beta2) * g[j] * g[j];
      p[j] -= s.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + s.eps);
    }
  }
}

}  // namespace grn
