// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian:
//   "GRNCKPT1"            8-byte magic
//   u32 version           currently 1
//   u64 n, n bytes        run configuration in its key = value text form
//   u64 count             parameter matrices, each:
//     u32 n, n bytes        name
//     u64 rows, u64 cols    shape
//     rows*cols f64         row-major values
//   f64 lr, beta1, beta2, eps, weight_decay; u64 step
//   u64 count             Adam first moments (shape + values, as above, no name)
//   u64 count             Adam second moments
// Doubles are stored bit-for-bit, so save/load round-trips exactly.

#pragma once

#include <string>
#include <vector>

#include "grn/model.hpp"
#include "grn/optim.hpp"
#include "grn/run_config.hpp"

namespace grn {

struct Checkpoint {
  RunConfig run;
  std::vector<std::string> names;
  std::vector<Matrix> values;
  AdamState adam;
};

Checkpoint make_checkpoint(const RunConfig& run, const GrnModel& model, const AdamState& adam);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
/// Rebuilds the model; throws if names or shapes disagree with the config.
GrnModel restore_model(const Checkpoint& ckpt);

}  // namespace grn
