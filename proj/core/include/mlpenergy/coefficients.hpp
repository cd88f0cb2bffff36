#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlpenergy/hardware.hpp"

namespace mlpe {

// Affine access cost for one memory level: access_j per touch of a working
// set plus byte_j per byte of it. byte_j is J/byte in memory; the file format
// carries J/MiB (the scaling is a power of two, so it round-trips exactly).
struct LevelCost {
  std::string label;
  double access_j = 0;
  double byte_j = 0;
};

struct EnergyCoefficients {
  std::string hardware_class; // "cpu", "gpu", or a user label
  double run_overhead_j = 0;  // once per experiment
  double pass_overhead_j = 0; // once per pass
  double flop_j = 0;          // per floating-point operation
  double layer_j = 0;         // per layer per pass
  std::vector<LevelCost> levels;

  std::size_t level_count() const { return levels.size(); }
  void validate() const; // all entries >= 0

  // errc::config_mismatch when the level labels do not match the hardware's.
  void check_compatible(const HardwareSpec& hw) const;

  std::string to_json() const;
  static EnergyCoefficients from_json(const std::string& text, const std::string& source);
  static EnergyCoefficients load(const std::string& path);
  void save(const std::string& path) const;

  // Bundled fitted coefficient sets for the cpu1 and gpu1 node specs. The
  // absolute scales come straight from the source regression; refit on your
  // own measurements before trusting them (see README).
  static EnergyCoefficients builtin_cpu();
  static EnergyCoefficients builtin_gpu();
};

} // namespace mlpe
