#include <benchmark/benchmark.h>

#include <numbers>

#include "stochlyap/simulate.hpp"

using namespace stochlyap;

static void BM_SimulatePendulum(benchmark::State& state) {
  const auto map = builtin_pendulum(0.5, 5, 0.1);
  constexpr double pi = std::numbers::pi;
  McConfig cfg;
  cfg.n_init = static_cast<std::size_t>(state.range(0));
  cfg.n_steps = 2000;
  cfg.n_noise_paths = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_unstable_fraction(map, {{-pi, -pi}, {pi, pi}, {true, true}}, cfg).unstable_fraction);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5 * 2000);
}
BENCHMARK(BM_SimulatePendulum)->Arg(100)->Unit(benchmark::kMillisecond);

static void BM_PendulumStep(benchmark::State& state) {
  const auto map = builtin_pendulum(0.5, 5, 0.1);
  double x[2] = {0.3, -0.2}, y[2];
  for (auto _ : state) {
    map.step(x, 2, y);
    benchmark::DoNotOptimize(y[0]);
  }
}
BENCHMARK(BM_PendulumStep);
