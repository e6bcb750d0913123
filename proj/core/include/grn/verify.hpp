// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Property suite behind `grn verify`: every invariant of the tensor, graph,
// retention, model and training layers, checked over seeded random trials.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace grn {

struct PropertyOutcome {
  std::string module;    // tensor_kernel, temporal_graph, ...
  std::string family;    // equivalence, causality, oracle, ...
  std::string property;  // short name printed on the pass/fail line
  bool passed = false;
  std::size_t trials = 0;
  std::uint64_t failing_seed = 0;  // valid when !passed
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Mutation test: negate recurrent retention outputs while the suite runs.
  bool inject_fault = false;
  /// Called as each property finishes.
  std::function<void(const PropertyOutcome&)> on_result;
};

struct VerifyReport {
  std::vector<PropertyOutcome> outcomes;

  bool all_passed() const;
  std::size_t family_count() const;
  /// module | property | family | trials | status
  std::string traceability_table() const;
};

VerifyReport run_verify(const VerifyOptions& options);

/// "PASS <module>/<property> (<trials> trials)" or "FAIL ... seed=<s>: <detail>".
std::string format_outcome(const PropertyOutcome& outcome);

}  // namespace grn
