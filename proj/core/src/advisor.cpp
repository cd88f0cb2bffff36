#include "mlpenergy/advisor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mlpenergy/csv.hpp"
#include "mlpenergy/energy_model.hpp"
#include "mlpenergy/errors.hpp"
#include "mlpenergy/worksets.hpp"

namespace mlpe {

std::int64_t EpochModel::epochs(double ntp) const {
  const double base = alpha * std::log(ntp) + c;
  if (!(base > 0))
    raise(errc::invalid_epoch_model,
          "epoch model predicts a non-positive transformed epoch at ntp " + csv::format_number(ntp));
  const double predicted = 1.0 / (base * base * base);
  return std::max<std::int64_t>(1, std::llround(predicted));
}

EpochModel fit_epoch_model(std::span<const std::pair<double, double>> ntp_epoch) {
  if (ntp_epoch.size() < 2)
    raise(errc::invalid_epoch_model, "epoch model needs at least two (ntp, epoch) observations");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [ntp, epoch] : ntp_epoch) {
    if (!(ntp > 0) || !(epoch >= 1))
      raise(errc::invalid_epoch_model, "epoch observations need ntp > 0 and epoch >= 1");
    const double x = std::log(ntp);
    const double y = std::pow(epoch, -1.0 / 3.0);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const auto n = static_cast<double>(ntp_epoch.size());
  const double denom = n * sxx - sx * sx;
  if (denom == 0)
    raise(errc::invalid_epoch_model, "epoch observations need at least two distinct ntp values");
  EpochModel model;
  model.alpha = (n * sxy - sx * sy) / denom;
  model.c = (sy - model.alpha * sx) / n;
  return model;
}

const char* Recommendation::anchor_name(Anchor a) {
  switch (a) {
  case Anchor::backward:
    return "backward";
  case Anchor::forward:
    return "forward";
  case Anchor::inter_layer:
    return "inter_layer";
  }
  return "?";
}

double energy_to_loss(const TaskSpec& task, const NetworkArchitecture& arch, const HardwareSpec& hw,
                      const EnergyCoefficients& coeffs, const EpochModel& epoch_model) {
  const auto ws = compute_working_sets(arch, task);
  const auto placement = place_working_sets(ws, hw);
  const auto ops = count_ops(arch, task);
  RunCounts counts;
  counts.epochs = epoch_model.epochs(static_cast<double>(count_parameters(arch)));
  counts.train_batches = (task.n_train + task.batch_size - 1) / task.batch_size;
  counts.test_batches = (task.n_test + task.batch_size - 1) / task.batch_size;
  return total_energy(counts, ws, placement, ops, arch.depth(), coeffs);
}

namespace {

// Largest raw set still fitting a level, by anchor kind. Replicated sets must
// fit each private cache but occupy one copy of a shared one; distributed
// sets split across the units behind the level.
double effective_capacity(const MemoryLevel& level, std::uint32_t n_units,
                          Recommendation::Anchor anchor) {
  const auto capacity = static_cast<double>(level.capacity_bytes);
  if (anchor != Recommendation::Anchor::inter_layer)
    return capacity;
  if (level.scope == MemoryLevel::Scope::per_unit)
    return capacity * n_units;
  return capacity * n_units / level.shared_by;
}

std::vector<std::uint64_t> candidate_grid() {
  std::vector<std::uint64_t> grid;
  for (int exponent = 5; exponent <= 25; ++exponent) {
    const auto base = std::uint64_t{1} << exponent;
    for (double factor : {1.0, 1.25, 1.5, 1.75})
      grid.push_back(static_cast<std::uint64_t>(std::llround(static_cast<double>(base) * factor)));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

} // namespace

std::vector<Recommendation> recommend_ntp(const TaskSpec& task, const ShapeFamily& shape, int depth,
                                          const HardwareSpec& hw, const EnergyCoefficients& coeffs,
                                          const std::optional<EpochModel>& epoch_model) {
  hw.validate();
  coeffs.check_compatible(hw);

  struct Candidate {
    std::uint64_t ntp;
    NetworkArchitecture arch;
    WorkingSets ws;
    double energy_per_datum;
    std::optional<double> to_loss;
  };
  std::vector<Candidate> candidates;
  for (std::uint64_t target : candidate_grid()) {
    NetworkArchitecture arch;
    try {
      arch = solve_widths(shape, depth, target, task);
    } catch (const error& e) {
      if (e.code() == errc::infeasible_target)
        continue;
      throw;
    }
    Candidate candidate;
    candidate.ntp = count_parameters(arch);
    candidate.arch = std::move(arch);
    candidate.ws = compute_working_sets(candidate.arch, task);
    const auto placement = place_working_sets(candidate.ws, hw);
    const auto ops = count_ops(candidate.arch, task);
    const double forward =
        pass_energy(PassKind::training_forward, candidate.ws, placement, ops, candidate.arch.depth(), coeffs);
    const double backward =
        pass_energy(PassKind::training_backward, candidate.ws, placement, ops, candidate.arch.depth(), coeffs);
    candidate.energy_per_datum = (forward + backward) / static_cast<double>(task.batch_size);
    if (epoch_model)
      candidate.to_loss = energy_to_loss(task, candidate.arch, hw, coeffs, *epoch_model);
    candidates.push_back(std::move(candidate));
  }

  // Best candidate per (level, anchor) whose anchor set lands in [1x, 2x] of
  // the level's effective capacity.
  std::vector<Recommendation> picks;
  using Anchor = Recommendation::Anchor;
  for (std::size_t level = 0; level + 1 < hw.levels.size(); ++level) {
    for (Anchor anchor : {Anchor::backward, Anchor::forward, Anchor::inter_layer}) {
      const double capacity = effective_capacity(hw.levels[level], hw.n_units, anchor);
      if (capacity <= 0)
        continue;
      const Candidate* best = nullptr;
      double best_metric = 0;
      double best_bytes = 0;
      for (const auto& candidate : candidates) {
        double bytes = 0;
        switch (anchor) {
        case Anchor::backward:
          bytes = static_cast<double>(candidate.ws.backward_bytes);
          break;
        case Anchor::forward:
          bytes = static_cast<double>(candidate.ws.forward_bytes);
          break;
        case Anchor::inter_layer:
          bytes = static_cast<double>(candidate.ws.max_inter_layer_bytes());
          break;
        }
        if (bytes < capacity || bytes > 2 * capacity)
          continue;
        const double metric = candidate.to_loss ? *candidate.to_loss : candidate.energy_per_datum;
        if (!best || metric < best_metric) {
          best = &candidate;
          best_metric = metric;
          best_bytes = bytes;
        }
      }
      if (!best)
        continue;
      Recommendation pick;
      pick.ntp = best->ntp;
      pick.level = level;
      pick.level_label = hw.levels[level].label;
      pick.anchor = anchor;
      pick.anchor_bytes = best_bytes;
      pick.anchor_capacity_bytes = capacity;
      pick.energy_per_datum_j = best->energy_per_datum;
      pick.energy_to_loss_j = best->to_loss;
      pick.rationale = std::string(Recommendation::anchor_name(anchor)) + " working set " +
                       csv::format_number(best_bytes) + " B fills " + hw.levels[level].label + " (" +
                       csv::format_number(capacity) + " B effective) within a factor of two";
      picks.push_back(std::move(pick));
    }
  }

  std::sort(picks.begin(), picks.end(), [](const Recommendation& a, const Recommendation& b) {
    const double ma = a.energy_to_loss_j ? *a.energy_to_loss_j : a.energy_per_datum_j;
    const double mb = b.energy_to_loss_j ? *b.energy_to_loss_j : b.energy_per_datum_j;
    if (ma != mb)
      return ma < mb;
    if (a.anchor != b.anchor)
      return static_cast<int>(a.anchor) < static_cast<int>(b.anchor);
    return a.level < b.level;
  });
  return picks;
}

std::vector<IsolossPoint> isoloss_energy(std::span<const LossGridPoint> grid, double target_loss) {
  if (!(target_loss > 0))
    raise(errc::numeric, "target loss must be positive for log-log interpolation");
  std::map<std::uint64_t, std::vector<LossGridPoint>> curves;
  for (const auto& point : grid) {
    if (!(point.loss > 0) || !(point.energy_j > 0))
      raise(errc::numeric, "loss-grid points need positive loss and energy");
    curves[point.ntp].push_back(point);
  }

  std::vector<IsolossPoint> result;
  for (auto& [ntp, points] : curves) {
    // Scan from worst to best loss; take the first bracketing segment.
    std::stable_sort(points.begin(), points.end(),
                     [](const LossGridPoint& a, const LossGridPoint& b) { return a.loss > b.loss; });
    std::optional<double> energy;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].loss == target_loss) {
        energy = points[i].energy_j;
        break;
      }
      if (i + 1 == points.size())
        break;
      if (points[i].loss > target_loss && points[i + 1].loss < target_loss) {
        const double x0 = std::log(points[i].loss);
        const double x1 = std::log(points[i + 1].loss);
        const double y0 = std::log(points[i].energy_j);
        const double y1 = std::log(points[i + 1].energy_j);
        const double t = (std::log(target_loss) - x0) / (x1 - x0);
        energy = std::exp(y0 + t * (y1 - y0));
        break;
      }
    }
    if (energy)
      result.push_back({ntp, *energy});
  }
  return result;
}

} // namespace mlpe
