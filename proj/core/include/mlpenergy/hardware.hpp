#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mlpe {

// One level of the memory hierarchy. capacity_bytes == 0 marks an unbounded
// level; the last (slowest) level is always treated as unbounded.
struct MemoryLevel {
  enum class Scope { per_unit, shared };

  std::string label;
  std::uint64_t capacity_bytes = 0;
  Scope scope = Scope::per_unit;
  std::uint32_t shared_by = 1; // units sharing one instance (shared scope)

  bool unbounded() const { return capacity_bytes == 0; }
};

// Processing units plus the memory hierarchy, fastest level first.
struct HardwareSpec {
  std::string name;
  std::uint32_t n_units = 1;
  std::vector<MemoryLevel> levels;
  double idle_power_w = 0;

  std::size_t level_count() const { return levels.size(); }
  void validate() const;

  std::string to_json() const;
  static HardwareSpec from_json(const std::string& text, const std::string& source);
  static HardwareSpec load(const std::string& path);
  void save(const std::string& path) const;

  // Bundled node specs. cpu1 uses the 64 KiB per-core L1 budget; the _l1_32k
  // variant carries the 32 KiB data-cache figure instead. L3 capacity is per
  // package (18 cores); dual-socket totals can be expressed in a custom file.
  static HardwareSpec builtin_cpu1();
  static HardwareSpec builtin_cpu1_l1_32k();
  static HardwareSpec builtin_gpu1();
};

} // namespace mlpe
