#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mlpenergy/arch.hpp"
#include "mlpenergy/coefficients.hpp"
#include "mlpenergy/hardware.hpp"

namespace mlpe {

// Affine relation between (minimizing epoch)^(-1/3) and ln(parameter count).
struct EpochModel {
  double alpha = 0;
  double c = 1;

  // round((alpha * ln ntp + c)^-3), clamped to >= 1.
  // errc::invalid_epoch_model when the base is not positive.
  std::int64_t epochs(double ntp) const;
};

// Ordinary least squares in the transformed space over (ntp, minimizing
// epoch) observations.
EpochModel fit_epoch_model(std::span<const std::pair<double, double>> ntp_epoch);

struct Recommendation {
  std::uint64_t ntp = 0;
  std::size_t level = 0;
  std::string level_label;
  enum class Anchor { backward, forward, inter_layer } anchor = Anchor::backward;
  double anchor_bytes = 0;
  double anchor_capacity_bytes = 0; // effective capacity the anchor fills
  double energy_per_datum_j = 0;
  std::optional<double> energy_to_loss_j;
  std::string rationale;

  static const char* anchor_name(Anchor a);
};

// Candidate parameter counts sized so a pass working set lands between one
// and two times a cache level's effective capacity. The backward set is the
// primary anchor; forward and inter-layer anchors are alternatives. Ranked by
// energy to reach the target loss when an epoch model is given, else by
// marginal energy per training datum. Empty when no candidate fills any
// level.
std::vector<Recommendation> recommend_ntp(const TaskSpec& task, const ShapeFamily& shape, int depth,
                                          const HardwareSpec& hw, const EnergyCoefficients& coeffs,
                                          const std::optional<EpochModel>& epoch_model = {});

// Total energy to reach the loss-minimizing epoch predicted for this
// architecture's size.
double energy_to_loss(const TaskSpec& task, const NetworkArchitecture& arch, const HardwareSpec& hw,
                      const EnergyCoefficients& coeffs, const EpochModel& epoch_model);

struct LossGridPoint {
  std::uint64_t ntp = 0;
  double loss = 0;
  double energy_j = 0;
};

struct IsolossPoint {
  std::uint64_t ntp = 0;
  double energy_j = 0;
};

// Energy to reach target_loss per parameter count, interpolated linearly in
// (log loss, log energy) on the first bracketing segment scanning from worst
// to best loss. Parameter counts never reaching the target are omitted.
std::vector<IsolossPoint> isoloss_energy(std::span<const LossGridPoint> grid, double target_loss);

} // namespace mlpe
