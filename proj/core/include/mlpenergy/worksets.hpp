#pragma once

#include <cstdint>
#include <vector>

#include "mlpenergy/arch.hpp"
#include "mlpenergy/hardware.hpp"

namespace mlpe {

// Byte sizes of the working sets a training run touches:
//   forward      — the parameter block read by a training forward pass
//   forward_test — the same block during test passes (placed separately)
//   backward     — parameters, their gradients, and one value per unit per
//                  batch datum (pre-activation or gradient, never both)
//   inter_layer  — per layer: input plus output activations (or activation
//                  gradients) for one batch
//   dataset      — training and test data
struct WorkingSets {
  std::uint64_t forward_bytes = 0;
  std::uint64_t forward_test_bytes = 0;
  std::uint64_t backward_bytes = 0;
  std::vector<std::uint64_t> inter_layer_bytes;
  std::uint64_t dataset_bytes = 0;

  std::uint64_t total_units = 0;            // sum of layer widths
  std::uint64_t param_bytes = 0;            // parameter block, replicated per unit
  std::uint64_t max_layer_param_bytes = 0;  // largest single-layer parameter slab
  std::uint64_t unit_batch_bytes = 0;       // per-unit values, distributed across units

  std::uint64_t max_inter_layer_bytes() const;
};

WorkingSets compute_working_sets(const NetworkArchitecture& arch, const TaskSpec& task);

// whole_set: a pass set must fit next to the largest inter-layer set in its
// entirety. per_layer: only the largest per-layer parameter slab competes for
// the level instead of the whole parameter block.
enum class PlacementPolicy { whole_set, per_layer };

// Memory-level index per working set (0 = fastest). Maintains
// inter_layer_max <= forward_test <= forward == backward <= dataset.
struct Placement {
  std::vector<std::size_t> inter_layer;
  std::size_t inter_layer_max = 0;
  std::size_t forward_test = 0;
  std::size_t forward = 0;
  std::size_t backward = 0;
  std::size_t dataset = 0;
};

// Distributed data (inter-layer values, the per-unit part of backward, the
// dataset) splits evenly across all processing units; parameter blocks are
// replicated into each unit's private cache but occupy a single copy in a
// shared one.
Placement place_working_sets(const WorkingSets& ws, const HardwareSpec& hw,
                             PlacementPolicy policy = PlacementPolicy::whole_set);

} // namespace mlpe
