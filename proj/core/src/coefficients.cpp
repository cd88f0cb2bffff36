#include "mlpenergy/coefficients.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mlpenergy/errors.hpp"

namespace mlpe {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kBytesPerMiB = 1024.0 * 1024.0;

} // namespace

void EnergyCoefficients::validate() const {
  const bool scalars_ok =
      run_overhead_j >= 0 && pass_overhead_j >= 0 && flop_j >= 0 && layer_j >= 0;
  if (!scalars_ok)
    raise(errc::config_mismatch, "energy coefficients must be nonnegative");
  for (const auto& level : levels)
    if (level.access_j < 0 || level.byte_j < 0)
      raise(errc::config_mismatch, "level '" + level.label + "': energy coefficients must be nonnegative");
}

void EnergyCoefficients::check_compatible(const HardwareSpec& hw) const {
  if (levels.size() != hw.levels.size())
    raise(errc::config_mismatch, "coefficient set '" + hardware_class + "' has " +
                                     std::to_string(levels.size()) + " levels but hardware '" + hw.name +
                                     "' has " + std::to_string(hw.levels.size()));
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i].label != hw.levels[i].label)
      raise(errc::config_mismatch, "coefficient level '" + levels[i].label +
                                       "' does not match hardware level '" + hw.levels[i].label + "'");
}

std::string EnergyCoefficients::to_json() const {
  ordered_json doc;
  doc["hardware_class"] = hardware_class;
  doc["run_overhead_j"] = run_overhead_j;
  doc["pass_overhead_j"] = pass_overhead_j;
  doc["flop_j"] = flop_j;
  doc["layer_j"] = layer_j;
  doc["levels"] = ordered_json::array();
  for (const auto& level : levels) {
    ordered_json entry;
    entry["label"] = level.label;
    entry["access_j"] = level.access_j;
    entry["per_mib_j"] = level.byte_j * kBytesPerMiB;
    doc["levels"].push_back(std::move(entry));
  }
  return doc.dump(2) + "\n";
}

EnergyCoefficients EnergyCoefficients::from_json(const std::string& text, const std::string& source) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(errc::parse, source + ": " + e.what());
  }
  EnergyCoefficients coeffs;
  try {
    coeffs.hardware_class = doc.at("hardware_class").get<std::string>();
    coeffs.run_overhead_j = doc.at("run_overhead_j").get<double>();
    coeffs.pass_overhead_j = doc.at("pass_overhead_j").get<double>();
    coeffs.flop_j = doc.at("flop_j").get<double>();
    coeffs.layer_j = doc.at("layer_j").get<double>();
    for (const auto& entry : doc.at("levels")) {
      LevelCost level;
      level.label = entry.at("label").get<std::string>();
      level.access_j = entry.at("access_j").get<double>();
      level.byte_j = entry.at("per_mib_j").get<double>() / kBytesPerMiB;
      coeffs.levels.push_back(std::move(level));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(errc::parse, source + ": " + e.what());
  }
  coeffs.validate();
  return coeffs;
}

EnergyCoefficients EnergyCoefficients::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    raise(errc::parse, "cannot open coefficient file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json(buffer.str(), path);
}

void EnergyCoefficients::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out)
    raise(errc::parse, "cannot write coefficient file '" + path + "'");
  out << to_json();
}

EnergyCoefficients EnergyCoefficients::builtin_cpu() {
  EnergyCoefficients coeffs;
  coeffs.hardware_class = "cpu";
  coeffs.run_overhead_j = 10200;
  coeffs.pass_overhead_j = 1460;
  coeffs.flop_j = 744e-9; // 744 J/GFLOP
  coeffs.layer_j = 0;
  coeffs.levels = {
      {"L1", 0, 0},
      {"L2", 59.3, 23.0 / kBytesPerMiB},
      {"L3", 215, 22.5 / kBytesPerMiB},
      {"RAM", 305, 36.3 / kBytesPerMiB},
  };
  return coeffs;
}

EnergyCoefficients EnergyCoefficients::builtin_gpu() {
  EnergyCoefficients coeffs;
  coeffs.hardware_class = "gpu";
  coeffs.run_overhead_j = 272000;
  coeffs.pass_overhead_j = 3080;
  coeffs.flop_j = 890e-9; // 890 J/GFLOP
  coeffs.layer_j = 33.0;
  coeffs.levels = {
      {"L1", 16.4, 0},
      {"L2", 19.8, 0},
      {"RAM", 0, 5.7 / kBytesPerMiB},
  };
  return coeffs;
}

} // namespace mlpe
