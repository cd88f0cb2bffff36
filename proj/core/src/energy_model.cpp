#include "mlpenergy/energy_model.hpp"

#include "mlpenergy/errors.hpp"

namespace mlpe {

double access_energy(const EnergyCoefficients& coeffs, std::size_t level, double bytes) {
  if (level >= coeffs.levels.size())
    raise(errc::config_mismatch, "memory level index " + std::to_string(level) +
                                     " out of range for coefficient set '" + coeffs.hardware_class + "'");
  const auto& cost = coeffs.levels[level];
  return cost.access_j + cost.byte_j * bytes;
}

namespace {

double inter_layer_energy(const WorkingSets& ws, const Placement& placement,
                          const EnergyCoefficients& coeffs) {
  double total = 0;
  for (std::size_t l = 0; l < ws.inter_layer_bytes.size(); ++l)
    total += access_energy(coeffs, placement.inter_layer[l], static_cast<double>(ws.inter_layer_bytes[l]));
  return total;
}

} // namespace

double pass_energy(PassKind kind, const WorkingSets& ws, const Placement& placement,
                   const OpCounts& ops, std::size_t depth, const EnergyCoefficients& coeffs) {
  double energy = coeffs.pass_overhead_j + coeffs.layer_j * static_cast<double>(depth) +
                  inter_layer_energy(ws, placement, coeffs);
  switch (kind) {
  case PassKind::training_forward:
    energy += coeffs.flop_j * static_cast<double>(ops.forward);
    energy += access_energy(coeffs, placement.dataset, static_cast<double>(ws.dataset_bytes));
    energy += access_energy(coeffs, placement.forward, static_cast<double>(ws.forward_bytes));
    break;
  case PassKind::testing_forward:
    energy += coeffs.flop_j * static_cast<double>(ops.forward);
    energy += access_energy(coeffs, placement.dataset, static_cast<double>(ws.dataset_bytes));
    energy += access_energy(coeffs, placement.forward_test, static_cast<double>(ws.forward_test_bytes));
    break;
  case PassKind::training_backward:
    energy += coeffs.flop_j * static_cast<double>(ops.backward);
    energy += access_energy(coeffs, placement.backward, static_cast<double>(ws.backward_bytes));
    break;
  }
  return energy;
}

double total_energy(const RunCounts& counts, const WorkingSets& ws, const Placement& placement,
                    const OpCounts& ops, std::size_t depth, const EnergyCoefficients& coeffs) {
  const double forward = pass_energy(PassKind::training_forward, ws, placement, ops, depth, coeffs);
  const double backward = pass_energy(PassKind::training_backward, ws, placement, ops, depth, coeffs);
  const double testing = pass_energy(PassKind::testing_forward, ws, placement, ops, depth, coeffs);
  return coeffs.run_overhead_j +
         static_cast<double>(counts.epochs) *
             (static_cast<double>(counts.train_batches) * (forward + backward) +
              static_cast<double>(counts.test_batches) * testing);
}

DesignRow build_design_row(const RunCounts& counts, const WorkingSets& ws, const Placement& placement,
                           const OpCounts& ops, std::size_t depth, std::size_t level_count) {
  const auto n = static_cast<double>(counts.epochs);
  const auto h_train = static_cast<double>(counts.train_batches);
  const auto h_test = static_cast<double>(counts.test_batches);
  const double all_passes = n * (2 * h_train + h_test);

  DesignRow row;
  row.features.assign(4 + 2 * level_count, 0.0);
  row.features[0] = 1;
  row.features[1] = all_passes;
  row.features[2] = n * ((h_train + h_test) * static_cast<double>(ops.forward) +
                         h_train * static_cast<double>(ops.backward));
  row.features[3] = all_passes * static_cast<double>(depth);

  const auto touch = [&](std::size_t level, double accesses, double bytes) {
    row.features[DesignRow::access_index(level)] += accesses;
    row.features[4 + level_count + level] += accesses * bytes;
  };
  touch(placement.dataset, n * (h_train + h_test), static_cast<double>(ws.dataset_bytes));
  touch(placement.forward, n * h_train, static_cast<double>(ws.forward_bytes));
  touch(placement.backward, n * h_train, static_cast<double>(ws.backward_bytes));
  touch(placement.forward_test, n * h_test, static_cast<double>(ws.forward_test_bytes));
  for (std::size_t l = 0; l < ws.inter_layer_bytes.size(); ++l)
    touch(placement.inter_layer[l], all_passes, static_cast<double>(ws.inter_layer_bytes[l]));
  return row;
}

std::vector<double> coefficient_vector(const EnergyCoefficients& coeffs) {
  std::vector<double> k;
  k.reserve(4 + 2 * coeffs.levels.size());
  k.push_back(coeffs.run_overhead_j);
  k.push_back(coeffs.pass_overhead_j);
  k.push_back(coeffs.flop_j);
  k.push_back(coeffs.layer_j);
  for (const auto& level : coeffs.levels)
    k.push_back(level.access_j);
  for (const auto& level : coeffs.levels)
    k.push_back(level.byte_j);
  return k;
}

std::vector<std::string> coefficient_names(const std::vector<std::string>& level_labels) {
  std::vector<std::string> names = {"run_overhead_j", "pass_overhead_j", "flop_j", "layer_j"};
  for (const auto& label : level_labels)
    names.push_back("access_j[" + label + "]");
  for (const auto& label : level_labels)
    names.push_back("byte_j[" + label + "]");
  return names;
}

EnergyCoefficients coefficients_from_vector(const std::vector<double>& k,
                                            const std::vector<std::string>& level_labels,
                                            const std::string& hardware_class) {
  if (k.size() != 4 + 2 * level_labels.size())
    raise(errc::numeric, "coefficient vector length " + std::to_string(k.size()) +
                             " does not match " + std::to_string(level_labels.size()) + " levels");
  EnergyCoefficients coeffs;
  coeffs.hardware_class = hardware_class;
  coeffs.run_overhead_j = k[0];
  coeffs.pass_overhead_j = k[1];
  coeffs.flop_j = k[2];
  coeffs.layer_j = k[3];
  for (std::size_t i = 0; i < level_labels.size(); ++i)
    coeffs.levels.push_back({level_labels[i], k[4 + i], k[4 + level_labels.size() + i]});
  return coeffs;
}

double dot(const DesignRow& row, const EnergyCoefficients& coeffs) {
  const auto k = coefficient_vector(coeffs);
  if (k.size() != row.features.size())
    raise(errc::config_mismatch, "design row has " + std::to_string(row.level_count()) +
                                     " levels but coefficient set has " +
                                     std::to_string(coeffs.levels.size()));
  double sum = 0;
  for (std::size_t i = 0; i < k.size(); ++i)
    sum += row.features[i] * k[i];
  return sum;
}

double EnergyBreakdown::total() const {
  double sum = run_overhead_j + pass_overhead_j + operations_j + layers_j;
  for (double level : per_level_j)
    sum += level;
  return sum;
}

EnergyBreakdown energy_breakdown(const DesignRow& row, const EnergyCoefficients& coeffs) {
  if (coeffs.levels.size() != row.level_count())
    raise(errc::config_mismatch, "design row / coefficient level count mismatch");
  EnergyBreakdown breakdown;
  breakdown.run_overhead_j = row.features[0] * coeffs.run_overhead_j;
  breakdown.pass_overhead_j = row.features[1] * coeffs.pass_overhead_j;
  breakdown.operations_j = row.features[2] * coeffs.flop_j;
  breakdown.layers_j = row.features[3] * coeffs.layer_j;
  for (std::size_t i = 0; i < coeffs.levels.size(); ++i)
    breakdown.per_level_j.push_back(row.features[DesignRow::access_index(i)] * coeffs.levels[i].access_j +
                                    row.features[row.byte_index(i)] * coeffs.levels[i].byte_j);
  return breakdown;
}

} // namespace mlpe
