#include "doctest.h"

#include <cmath>

#include "mlpenergy/energy_model.hpp"
#include "mlpenergy/errors.hpp"
#include "support/generators.hpp"

using namespace mlpe;

namespace {

constexpr double MiB = 1024.0 * 1024.0;

struct Scenario {
  NetworkArchitecture arch;
  TaskSpec task;
  WorkingSets ws;
  Placement placement;
  OpCounts ops;
};

Scenario random_scenario(testgen::Rng& rng, const HardwareSpec& hw) {
  Scenario s;
  s.arch = testgen::random_arch(rng, 6, 512);
  s.task = testgen::random_task(rng);
  s.ws = compute_working_sets(s.arch, s.task);
  s.placement = place_working_sets(s.ws, hw);
  s.ops = count_ops(s.arch, s.task);
  return s;
}

} // namespace

TEST_CASE("affine access cost reproduces the fitted-table figures") {
  const auto cpu = EnergyCoefficients::builtin_cpu();
  // L2: 59.3 J per access + 23.0 J per MiB
  CHECK(access_energy(cpu, 1, 1 * MiB) == doctest::Approx(82.3).epsilon(1e-12));
  // RAM: 305 J per access + 36.3 J per MiB over 2 MiB
  CHECK(access_energy(cpu, 3, 2 * MiB) == doctest::Approx(377.6).epsilon(1e-12));
  for (std::size_t level = 0; level < cpu.levels.size(); ++level)
    CHECK(access_energy(cpu, level, 0) == cpu.levels[level].access_j);
}

TEST_CASE("pass energies follow the per-pass equations") {
  testgen::Rng rng(60);
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto scenario = random_scenario(rng, hw);
  const auto depth = scenario.arch.depth();

  SUBCASE("zero coefficients cost nothing") {
    EnergyCoefficients zero;
    zero.hardware_class = "zero";
    for (const auto& level : hw.levels)
      zero.levels.push_back({level.label, 0, 0});
    for (auto kind : {PassKind::training_forward, PassKind::training_backward, PassKind::testing_forward})
      CHECK(pass_energy(kind, scenario.ws, scenario.placement, scenario.ops, depth, zero) == 0);
  }

  SUBCASE("backward minus forward isolates the operation term") {
    EnergyCoefficients coeffs;
    coeffs.hardware_class = "ops-only";
    coeffs.pass_overhead_j = 7;
    coeffs.flop_j = 1e-6;
    for (const auto& level : hw.levels)
      coeffs.levels.push_back({level.label, 0, 0});
    const double forward =
        pass_energy(PassKind::training_forward, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);
    const double backward =
        pass_energy(PassKind::training_backward, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);
    // ops.backward = 2 * ops.forward, so the gap is flop_j * ops.forward
    CHECK(backward - forward ==
          doctest::Approx(coeffs.flop_j * static_cast<double>(scenario.ops.forward)).epsilon(1e-9));
  }

  SUBCASE("layer overhead alone counts layers") {
    EnergyCoefficients coeffs;
    coeffs.hardware_class = "layers-only";
    coeffs.layer_j = 1;
    for (const auto& level : hw.levels)
      coeffs.levels.push_back({level.label, 0, 0});
    NetworkArchitecture single;
    single.input_width = 3;
    single.layer_widths = {1};
    TaskSpec task;
    task.n_features = 3;
    const auto ws = compute_working_sets(single, task);
    const auto placement = place_working_sets(ws, hw);
    const auto ops = count_ops(single, task);
    for (auto kind : {PassKind::training_forward, PassKind::training_backward, PassKind::testing_forward})
      CHECK(pass_energy(kind, ws, placement, ops, 1, coeffs) == 1.0);
  }
}

TEST_CASE("total energy with zero epochs is the run overhead") {
  testgen::Rng rng(61);
  const auto hw = HardwareSpec::builtin_gpu1();
  const auto scenario = random_scenario(rng, hw);
  const auto coeffs = EnergyCoefficients::builtin_gpu();
  RunCounts counts{0, 1, 1};
  CHECK(total_energy(counts, scenario.ws, scenario.placement, scenario.ops, scenario.arch.depth(), coeffs) ==
        coeffs.run_overhead_j);
}

TEST_CASE("energy above the run overhead is linear in the epoch count") {
  testgen::Rng rng(62);
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto coeffs = EnergyCoefficients::builtin_cpu();
  for (int i = 0; i < 50; ++i) {
    const auto scenario = random_scenario(rng, hw);
    const auto counts = testgen::random_counts(rng);
    RunCounts doubled = counts;
    doubled.epochs *= 2;
    const double once =
        total_energy(counts, scenario.ws, scenario.placement, scenario.ops, scenario.arch.depth(), coeffs);
    const double twice =
        total_energy(doubled, scenario.ws, scenario.placement, scenario.ops, scenario.arch.depth(), coeffs);
    CHECK(twice - coeffs.run_overhead_j ==
          doctest::Approx(2 * (once - coeffs.run_overhead_j)).epsilon(1e-12));
  }
}

TEST_CASE("design-row dot product equals direct evaluation") {
  testgen::Rng rng(63);
  for (int i = 0; i < 1000; ++i) {
    const auto hw = testgen::random_hardware(rng);
    const auto scenario = random_scenario(rng, hw);
    const auto coeffs = testgen::random_coefficients(rng, hw.level_count());
    const auto counts = testgen::random_counts(rng);
    const auto depth = scenario.arch.depth();
    const auto row = build_design_row(counts, scenario.ws, scenario.placement, scenario.ops, depth,
                                      hw.level_count());
    const double direct =
        total_energy(counts, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);
    const double via_row = dot(row, coeffs);
    CHECK(via_row == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("design row counts accesses the way the training loop does") {
  // One epoch, one training batch, no test batches, one layer, all in L1.
  WorkingSets ws;
  ws.forward_bytes = 100;
  ws.forward_test_bytes = 100;
  ws.backward_bytes = 220;
  ws.dataset_bytes = 400;
  ws.inter_layer_bytes = {64};
  ws.param_bytes = 100;
  ws.unit_batch_bytes = 20;
  ws.total_units = 5;
  Placement placement;
  placement.inter_layer = {0};

  const RunCounts counts{1, 1, 0};
  const OpCounts ops{10, 20};
  const auto row = build_design_row(counts, ws, placement, ops, 1, 4);
  CHECK(row.features[0] == 1);
  CHECK(row.features[1] == 2); // two passes per training batch
  CHECK(row.features[2] == 30);
  CHECK(row.features[3] == 2); // layer term scales with passes
  // L1 accesses: inter-layer twice, forward once, backward once, dataset once
  CHECK(row.features[DesignRow::access_index(0)] == 5);
  CHECK(row.features[row.byte_index(0)] == 2 * 64 + 100 + 220 + 400);

  // Adding one test batch per epoch adds the test-forward and dataset touches.
  const auto with_test = build_design_row({1, 1, 1}, ws, placement, ops, 1, 4);
  CHECK(with_test.features[1] == 3);
  CHECK(with_test.features[2] == 40);
  CHECK(with_test.features[DesignRow::access_index(0)] == 5 + 1 + 1 + 1);
}

TEST_CASE("total energy is affine in each run count separately") {
  testgen::Rng rng(64);
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto coeffs = EnergyCoefficients::builtin_cpu();
  const auto scenario = random_scenario(rng, hw);
  const auto depth = scenario.arch.depth();
  const auto eval = [&](std::int64_t n, std::int64_t h_t, std::int64_t h_s) {
    return total_energy({n, h_t, h_s}, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);
  };
  const auto collinear = [](double y1, double y2, double y3) {
    // y at 1, 2, 3 on an affine function: midpoint matches the average
    CHECK(y2 == doctest::Approx((y1 + y3) / 2).epsilon(1e-9));
  };
  collinear(eval(1, 7, 3), eval(2, 7, 3), eval(3, 7, 3));
  collinear(eval(5, 1, 3), eval(5, 2, 3), eval(5, 3, 3));
  collinear(eval(5, 7, 1), eval(5, 7, 2), eval(5, 7, 3));
}

TEST_CASE("total energy is monotone in coefficients and sizes") {
  testgen::Rng rng(65);
  for (int i = 0; i < 100; ++i) {
    const auto hw = testgen::random_hardware(rng);
    const auto scenario = random_scenario(rng, hw);
    auto coeffs = testgen::random_coefficients(rng, hw.level_count());
    const auto counts = testgen::random_counts(rng);
    const auto depth = scenario.arch.depth();
    const double base =
        total_energy(counts, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);

    auto bumped = coeffs;
    bumped.flop_j += 1e-7;
    bumped.pass_overhead_j += 1;
    CHECK(total_energy(counts, scenario.ws, scenario.placement, scenario.ops, depth, bumped) >= base);

    auto grown = scenario.ws;
    grown.dataset_bytes += 1024;
    grown.backward_bytes += 1024;
    CHECK(total_energy(counts, grown, scenario.placement, scenario.ops, depth, coeffs) >= base);
  }
}

TEST_CASE("moving a set to a slower level never lowers the prediction") {
  testgen::Rng rng(66);
  for (int i = 0; i < 200; ++i) {
    const auto hw = testgen::random_hardware(rng);
    const auto scenario = random_scenario(rng, hw);
    auto coeffs = testgen::random_coefficients(rng, hw.level_count());
    // Enforce costs non-decreasing with level index.
    for (std::size_t l = 1; l < coeffs.levels.size(); ++l) {
      coeffs.levels[l].access_j =
          std::max(coeffs.levels[l].access_j, coeffs.levels[l - 1].access_j);
      coeffs.levels[l].byte_j = std::max(coeffs.levels[l].byte_j, coeffs.levels[l - 1].byte_j);
    }
    const auto counts = testgen::random_counts(rng);
    const auto depth = scenario.arch.depth();
    const double base =
        total_energy(counts, scenario.ws, scenario.placement, scenario.ops, depth, coeffs);
    auto moved = scenario.placement;
    if (moved.dataset + 1 < hw.level_count()) {
      ++moved.dataset;
      CHECK(total_energy(counts, scenario.ws, moved, scenario.ops, depth, coeffs) >= base);
    }
  }
}

TEST_CASE("breakdown terms sum to the dot product") {
  testgen::Rng rng(67);
  for (int i = 0; i < 100; ++i) {
    const auto hw = testgen::random_hardware(rng);
    const auto scenario = random_scenario(rng, hw);
    const auto coeffs = testgen::random_coefficients(rng, hw.level_count());
    const auto counts = testgen::random_counts(rng);
    const auto row = build_design_row(counts, scenario.ws, scenario.placement, scenario.ops,
                                      scenario.arch.depth(), hw.level_count());
    const auto breakdown = energy_breakdown(row, coeffs);
    CHECK(breakdown.total() == doctest::Approx(dot(row, coeffs)).epsilon(1e-9));
  }
}

TEST_CASE("coefficient vector round-trips through its flat form") {
  const auto cpu = EnergyCoefficients::builtin_cpu();
  const auto k = coefficient_vector(cpu);
  std::vector<std::string> labels;
  for (const auto& level : cpu.levels)
    labels.push_back(level.label);
  const auto rebuilt = coefficients_from_vector(k, labels, cpu.hardware_class);
  CHECK(rebuilt.run_overhead_j == cpu.run_overhead_j);
  CHECK(rebuilt.flop_j == cpu.flop_j);
  CHECK(rebuilt.levels.size() == cpu.levels.size());
  for (std::size_t i = 0; i < cpu.levels.size(); ++i) {
    CHECK(rebuilt.levels[i].access_j == cpu.levels[i].access_j);
    CHECK(rebuilt.levels[i].byte_j == cpu.levels[i].byte_j);
  }
  CHECK(coefficient_names(labels).size() == k.size());
}
