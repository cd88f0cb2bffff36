#include "mlpenergy/hardware.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mlpenergy/errors.hpp"

namespace mlpe {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t KiB = 1024;
constexpr std::uint64_t MiB = 1024 * 1024;

} // namespace

void HardwareSpec::validate() const {
  if (n_units < 1)
    raise(errc::config_mismatch, "hardware spec '" + name + "': n_units must be >= 1");
  if (levels.empty())
    raise(errc::config_mismatch, "hardware spec '" + name + "': needs at least one memory level");
  for (std::size_t i = 0; i + 1 < levels.size(); ++i)
    if (levels[i].capacity_bytes == 0)
      raise(errc::config_mismatch, "hardware spec '" + name + "': level '" + levels[i].label +
                                       "' needs a positive capacity (only the last level is unbounded)");
  for (const auto& level : levels) {
    if (level.label.empty())
      raise(errc::config_mismatch, "hardware spec '" + name + "': empty level label");
    if (level.scope == MemoryLevel::Scope::shared && (level.shared_by < 1 || level.shared_by > n_units))
      raise(errc::config_mismatch, "hardware spec '" + name + "': level '" + level.label +
                                       "' shared_by must be in [1, n_units]");
  }
}

std::string HardwareSpec::to_json() const {
  ordered_json doc;
  doc["name"] = name;
  doc["n_units"] = n_units;
  doc["idle_power_w"] = idle_power_w;
  doc["levels"] = ordered_json::array();
  for (const auto& level : levels) {
    ordered_json entry;
    entry["label"] = level.label;
    entry["capacity_bytes"] = level.capacity_bytes;
    entry["scope"] = level.scope == MemoryLevel::Scope::per_unit ? "per-unit" : "shared";
    if (level.scope == MemoryLevel::Scope::shared)
      entry["shared_by"] = level.shared_by;
    doc["levels"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

HardwareSpec HardwareSpec::from_json(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::parse, source + ": " + e.what());
  }
  HardwareSpec spec;
  try {
    spec.name = doc.at("name").get<std::string>();
    spec.n_units = doc.at("n_units").get<std::uint32_t>();
    spec.idle_power_w = doc.at("idle_power_w").get<double>();
    for (const auto& entry : doc.at("levels")) {
      MemoryLevel level;
      level.label = entry.at("label").get<std::string>();
      level.capacity_bytes = entry.at("capacity_bytes").get<std::uint64_t>();
      const auto scope = entry.at("scope").get<std::string>();
      if (scope == "per-unit") {
        level.scope = MemoryLevel::Scope::per_unit;
        level.shared_by = 1;
      } else if (scope == "shared") {
        level.scope = MemoryLevel::Scope::shared;
        level.shared_by = entry.at("shared_by").get<std::uint32_t>();
      } else {
        raise(errc::parse, source + ": level scope must be 'per-unit' or 'shared', got '" + scope + "'");
      }
      spec.levels.push_back(std::move(level));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(errc::parse, source + ": " + e.what());
  }
  spec.validate();
  return spec;
}

HardwareSpec HardwareSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(errc::parse, "cannot open hardware spec '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str(), path);
}

void HardwareSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    raise(errc::parse, "cannot write hardware spec '" + path + "'");
  out << to_json();
}

HardwareSpec HardwareSpec::builtin_cpu1() {
  HardwareSpec spec;
  spec.name = "cpu1";
  spec.n_units = 36; // 2 sockets x 18 cores
  spec.idle_power_w = 220;
  spec.levels = {
      {"L1", 64 * KiB, MemoryLevel::Scope::per_unit, 1},
      {"L2", 1 * MiB, MemoryLevel::Scope::per_unit, 1},
      // 24.75 MiB per package, shared by the 18 cores of one socket.
      {"L3", 25952256, MemoryLevel::Scope::shared, 18},
      {"RAM", 0, MemoryLevel::Scope::shared, 36},
  };
  return spec;
}

HardwareSpec HardwareSpec::builtin_cpu1_l1_32k() {
  HardwareSpec spec = builtin_cpu1();
  spec.name = "cpu1_l1_32k";
  spec.levels[0].capacity_bytes = 32 * KiB;
  return spec;
}

HardwareSpec HardwareSpec::builtin_gpu1() {
  HardwareSpec spec;
  spec.name = "gpu1";
  spec.n_units = 168; // 2 GPUs x 84 SMs, parameters mirrored per device
  spec.idle_power_w = 374;
  spec.levels = {
      {"L1", 96 * KiB, MemoryLevel::Scope::per_unit, 1},
      {"L2", 6 * MiB, MemoryLevel::Scope::shared, 84},
      {"RAM", 0, MemoryLevel::Scope::shared, 168},
  };
  return spec;
}

} // namespace mlpe
