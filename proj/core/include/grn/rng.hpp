// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

#include "grn/tensor.hpp"

namespace grn {

/// Seeded random source. The engine (mt19937_64) and every conversion below
/// are fully specified, so identical seeds give identical draws on every
/// platform. Single owner: do not draw from one instance concurrently.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n), rejection-sampled so there is no modulo bias.
  std::size_t uniform_index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream keyed by a tag and an index; the parent is not advanced.
  Rng derive(std::string_view tag, std::uint64_t index = 0) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

/// Xavier/Glorot-uniform matrix: entries in ±sqrt(6 / (rows + cols)).
Matrix rng_init_xavier(Rng& rng, std::size_t rows, std::size_t cols);
Matrix rng_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

}  // namespace grn
