#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlpenergy/arch.hpp"
#include "mlpenergy/coefficients.hpp"
#include "mlpenergy/worksets.hpp"

namespace mlpe {

// Epoch and batch counts of one experiment.
struct RunCounts {
  std::int64_t epochs = 1;        // n
  std::int64_t train_batches = 1; // per epoch
  std::int64_t test_batches = 0;  // per epoch
};

enum class PassKind { training_forward, training_backward, testing_forward };

// Energy to touch `bytes` of data resident at `level` once.
double access_energy(const EnergyCoefficients& coeffs, std::size_t level, double bytes);

// One pass over one batch. Training and test forward passes read the dataset
// and the parameter block; the backward pass reads the backward set instead
// and skips the dataset. Every pass touches each inter-layer set once.
double pass_energy(PassKind kind, const WorkingSets& ws, const Placement& placement,
                   const OpCounts& ops, std::size_t depth, const EnergyCoefficients& coeffs);

// run_overhead + epochs * (train_batches * (forward + backward) +
// test_batches * testing_forward).
double total_energy(const RunCounts& counts, const WorkingSets& ws, const Placement& placement,
                    const OpCounts& ops, std::size_t depth, const EnergyCoefficients& coeffs);

// Feature vector aligned with [run_overhead, pass_overhead, flop, layer,
// access counts per level..., byte counts per level...]; its dot product with
// the coefficient vector reproduces total_energy exactly.
struct DesignRow {
  std::vector<double> features;

  std::size_t level_count() const { return (features.size() - 4) / 2; }
  static std::size_t access_index(std::size_t level) { return 4 + level; }
  std::size_t byte_index(std::size_t level) const { return 4 + level_count() + level; }
};

DesignRow build_design_row(const RunCounts& counts, const WorkingSets& ws, const Placement& placement,
                           const OpCounts& ops, std::size_t depth, std::size_t level_count);

// Coefficients flattened in design-row order.
std::vector<double> coefficient_vector(const EnergyCoefficients& coeffs);
std::vector<std::string> coefficient_names(const std::vector<std::string>& level_labels);
EnergyCoefficients coefficients_from_vector(const std::vector<double>& k,
                                            const std::vector<std::string>& level_labels,
                                            const std::string& hardware_class);

double dot(const DesignRow& row, const EnergyCoefficients& coeffs);

// Per-term totals of one prediction; terms sum to the total.
struct EnergyBreakdown {
  double run_overhead_j = 0;
  double pass_overhead_j = 0;
  double operations_j = 0;
  double layers_j = 0;
  std::vector<double> per_level_j; // access + byte energy per level

  double total() const;
};

EnergyBreakdown energy_breakdown(const DesignRow& row, const EnergyCoefficients& coeffs);

} // namespace mlpe
