// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

namespace grn {

/// Mean −[y ln p + (1 − y) ln(1 − p)] with p clamped to [1e-12, 1 − 1e-12].
double bce_loss(std::span<const double> probabilities, std::span<const double> labels);

/// Scores sorted descending (ties keep input order); mean precision at the
/// rank of each positive. Throws if there is no positive label.
double average_precision(std::span<const double> scores, std::span<const double> labels);

/// Mann–Whitney AUC: share of (positive, negative) pairs ordered correctly,
/// ties counting one half. Throws unless both classes are present.
double auc_roc(std::span<const double> scores, std::span<const double> labels);

}  // namespace grn
