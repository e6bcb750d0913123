// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "grn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace grn {
namespace {

void check_lengths(const char* op, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(a.size()) + " scores vs " +
                                std::to_string(b.size()) + " labels");
}

}  // namespace

double bce_loss(std::span<const double> p, std::span<const double> y) {
  check_lengths("bce_loss", p, y);
  if (p.empty()) throw std::invalid_argument("bce_loss: empty input");
  constexpr double kEps = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kEps, 1.0 - kEps);
    total -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  return total / static_cast<double>(p.size());
}

double average_precision(std::span<const double> scores, std::span<const double> labels) {
  check_lengths("average_precision", scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, total = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] > 0.5) {
      hits += 1.0;
      total += hits / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0.0) throw std::invalid_argument("average_precision: no positive labels");
  return total / hits;
}

double auc_roc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths("auc_roc", scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of mid-ranks of the positives; tied groups share their average rank.
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 1);  // 1-based ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) {
        pos += 1.0;
        rank_sum += mid;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw std::invalid_argument("auc_roc: need both classes");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

}  // namespace grn
