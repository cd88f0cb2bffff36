#include "mlpenergy/worksets.hpp"

#include <algorithm>

#include "mlpenergy/errors.hpp"

namespace mlpe {

std::uint64_t WorkingSets::max_inter_layer_bytes() const {
  std::uint64_t best = 0;
  for (std::uint64_t s : inter_layer_bytes)
    best = std::max(best, s);
  return best;
}

WorkingSets compute_working_sets(const NetworkArchitecture& arch, const TaskSpec& task) {
  arch.validate();
  task.validate();

  const auto dtype = static_cast<std::uint64_t>(task.dtype_bytes);
  const auto batch = static_cast<std::uint64_t>(task.batch_size);
  const std::uint64_t params = count_parameters(arch);

  WorkingSets ws;
  ws.param_bytes = params * dtype;
  ws.forward_bytes = ws.param_bytes;
  ws.forward_test_bytes = ws.param_bytes;

  std::uint64_t units = 0;
  std::int64_t fan_in = arch.input_width;
  for (std::int64_t width : arch.layer_widths) {
    units += static_cast<std::uint64_t>(width);
    const auto slab = static_cast<std::uint64_t>(fan_in + 1) * static_cast<std::uint64_t>(width) * dtype;
    ws.max_layer_param_bytes = std::max(ws.max_layer_param_bytes, slab);
    ws.inter_layer_bytes.push_back(
        (static_cast<std::uint64_t>(width) + static_cast<std::uint64_t>(fan_in)) * batch * dtype);
    fan_in = width;
  }
  ws.total_units = units;
  ws.unit_batch_bytes = units * batch * dtype;
  ws.backward_bytes = 2 * ws.param_bytes + ws.unit_batch_bytes;
  ws.dataset_bytes = static_cast<std::uint64_t>(task.n_train + task.n_test) *
                     static_cast<std::uint64_t>(task.n_features + task.n_outputs) * dtype;
  return ws;
}

namespace {

// Footprint competing for one level: bytes every unit holds privately plus
// bytes split evenly across all units.
struct Footprint {
  double replicated = 0;
  double distributed = 0;
};

Footprint operator+(Footprint a, Footprint b) {
  return {a.replicated + b.replicated, a.distributed + b.distributed};
}

bool fits(const MemoryLevel& level, std::uint32_t n_units, const Footprint& fp) {
  if (level.unbounded())
    return true;
  const auto capacity = static_cast<double>(level.capacity_bytes);
  if (level.scope == MemoryLevel::Scope::per_unit)
    return fp.replicated + fp.distributed / n_units <= capacity;
  // One copy of replicated data serves every unit behind a shared level; the
  // distributed shares of the units behind it add up.
  return fp.replicated + fp.distributed * level.shared_by / n_units <= capacity;
}

std::size_t lowest_fitting_level(const HardwareSpec& hw, const Footprint& fp) {
  for (std::size_t i = 0; i + 1 < hw.levels.size(); ++i)
    if (fits(hw.levels[i], hw.n_units, fp))
      return i;
  return hw.levels.size() - 1; // top level absorbs everything
}

} // namespace

Placement place_working_sets(const WorkingSets& ws, const HardwareSpec& hw, PlacementPolicy policy) {
  hw.validate();
  if (ws.inter_layer_bytes.empty())
    raise(errc::invalid_architecture, "working sets carry no layers");

  const double param_block = static_cast<double>(
      policy == PlacementPolicy::whole_set ? ws.param_bytes : ws.max_layer_param_bytes);

  Placement placement;
  const Footprint inter_max{0, static_cast<double>(ws.max_inter_layer_bytes())};
  for (std::uint64_t bytes : ws.inter_layer_bytes)
    placement.inter_layer.push_back(lowest_fitting_level(hw, {0, static_cast<double>(bytes)}));
  placement.inter_layer_max = lowest_fitting_level(hw, inter_max);

  const Footprint backward_fp{2 * param_block, static_cast<double>(ws.unit_batch_bytes)};
  placement.backward = lowest_fitting_level(hw, inter_max + backward_fp);
  placement.forward = placement.backward; // training forward alternates with backward

  const Footprint forward_fp{param_block, 0};
  placement.forward_test =
      std::min(lowest_fitting_level(hw, inter_max + forward_fp), placement.forward);

  const Footprint dataset_fp{0, static_cast<double>(ws.dataset_bytes)};
  placement.dataset =
      std::max(lowest_fitting_level(hw, inter_max + backward_fp + dataset_fp), placement.backward);

  return placement;
}

} // namespace mlpe
