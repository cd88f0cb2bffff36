#include <benchmark/benchmark.h>

#include "mlpenergy/energy_model.hpp"
#include "mlpenergy/hardware.hpp"
#include "mlpenergy/worksets.hpp"
#include "support/generators.hpp"

using namespace mlpe;

static void BM_SolveWidths(benchmark::State& state) {
  TaskSpec task;
  task.n_features = 16;
  task.n_outputs = 1;
  task.n_train = 50000;
  const ShapeFamily shape{ShapeFamily::Kind::rectangle, 2};
  const auto target = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    auto arch = solve_widths(shape, 6, target, task);
    benchmark::DoNotOptimize(arch);
  }
}
BENCHMARK(BM_SolveWidths)->Arg(1 << 10)->Arg(1 << 18)->Arg(1 << 25);

static void BM_PlaceWorkingSets(benchmark::State& state) {
  testgen::Rng rng(1);
  TaskSpec task;
  task.n_features = 16;
  task.n_outputs = 1;
  task.n_train = 50000;
  task.batch_size = 256;
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto arch = solve_widths(ShapeFamily{ShapeFamily::Kind::rectangle, 2}, 8,
                                 static_cast<std::uint64_t>(state.range(0)), task);
  const auto ws = compute_working_sets(arch, task);
  for (auto _ : state) {
    auto placement = place_working_sets(ws, hw);
    benchmark::DoNotOptimize(placement);
  }
}
BENCHMARK(BM_PlaceWorkingSets)->Arg(1 << 12)->Arg(1 << 22);

static void BM_DesignRow(benchmark::State& state) {
  TaskSpec task;
  task.n_features = 16;
  task.n_outputs = 1;
  task.n_train = 50000;
  task.batch_size = 256;
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto arch = solve_widths(ShapeFamily{ShapeFamily::Kind::rectangle, 2}, 12, 1 << 20, task);
  const auto ws = compute_working_sets(arch, task);
  const auto placement = place_working_sets(ws, hw);
  const auto ops = count_ops(arch, task);
  const RunCounts counts{30, 196, 40};
  for (auto _ : state) {
    auto row = build_design_row(counts, ws, placement, ops, arch.depth(), hw.level_count());
    benchmark::DoNotOptimize(row);
  }
}
BENCHMARK(BM_DesignRow);
