#include <benchmark/benchmark.h>

#include "mlpenergy/coefficients.hpp"
#include "mlpenergy/fitting.hpp"
#include "support/synthetic.hpp"

using namespace mlpe;

static void BM_Fit(benchmark::State& state) {
  testgen::Rng rng(7);
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto truth = EnergyCoefficients::builtin_cpu();
  const auto problem =
      testgen::synthetic_problem(rng, hw, static_cast<int>(state.range(0)), truth);
  for (auto _ : state) {
    auto result = fit(problem);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_Fit)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

static void BM_Nnls(benchmark::State& state) {
  testgen::Rng rng(8);
  const auto hw = HardwareSpec::builtin_cpu1();
  const auto rows = testgen::synthetic_rows(rng, hw, static_cast<int>(state.range(0)));
  std::vector<double> rhs;
  for (const auto& row : rows) {
    double sum = 0;
    for (double v : row)
      sum += v;
    rhs.push_back(sum);
  }
  for (auto _ : state) {
    auto x = nnls(rows, rhs);
    benchmark::DoNotOptimize(x);
  }
}
BENCHMARK(BM_Nnls)->Arg(500)->Unit(benchmark::kMillisecond);
