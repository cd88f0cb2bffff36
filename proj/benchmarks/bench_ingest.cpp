#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mlpenergy/ingest.hpp"

using namespace mlpe;

static std::vector<PowerSample> trace(int minutes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> watts(180, 420);
  std::vector<PowerSample> samples;
  samples.reserve(static_cast<std::size_t>(minutes));
  for (int i = 0; i < minutes; ++i)
    samples.push_back({"n", i * 60.0, watts(rng)});
  return samples;
}

static void BM_IntegrateEnergy(benchmark::State& state) {
  const auto samples = trace(static_cast<int>(state.range(0)));
  const double end = samples.back().timestamp_s - 30;
  for (auto _ : state) {
    auto joules = integrate_energy(samples, 30, end);
    benchmark::DoNotOptimize(joules);
  }
}
BENCHMARK(BM_IntegrateEnergy)->Arg(60)->Arg(1440)->Arg(131400);

static void BM_ApplyFilters(benchmark::State& state) {
  std::mt19937_64 rng(12);
  std::lognormal_distribution<double> runtime(7, 0.4);
  std::vector<MeasuredRun> base;
  for (int i = 0; i < state.range(0); ++i) {
    MeasuredRun run;
    run.run_id = "r" + std::to_string(i);
    run.meta.dataset = i % 13 ? "a" : "b";
    run.meta.ntp = 1 << (5 + i % 20);
    run.meta.hardware_class = i % 2 ? "cpu" : "gpu";
    run.runtime_s = runtime(rng);
    run.raw_energy_j = run.runtime_s * 250;
    run.has_samples = true;
    run.min_watts = 200;
    base.push_back(std::move(run));
  }
  for (auto _ : state) {
    auto runs = base;
    auto report = apply_filters(runs);
    benchmark::DoNotOptimize(report);
  }
}
BENCHMARK(BM_ApplyFilters)->Arg(1000)->Arg(40000)->Unit(benchmark::kMillisecond);
