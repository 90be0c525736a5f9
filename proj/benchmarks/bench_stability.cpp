#include <benchmark/benchmark.h>

#include <numbers>

#include "stochlyap/stability.hpp"

using namespace stochlyap;

namespace {

struct Fixture {
  Partition partition{{{-std::numbers::pi, -std::numbers::pi}, {std::numbers::pi, std::numbers::pi}, {true, true}},
                      {50, 50}};
  TransferMatrix tm = build_transfer_matrix(builtin_pendulum(0.5, 5, 0.1), partition, {100, 1});
  CellSet x0 = partition.attractor_cells(std::vector{0.0, 0.0}, 0.0);
  Decomposition dec = decompose(tm, x0);
  Vector m = reference_measure(partition, dec);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ClosedClasses(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(find_closed_subpartitions(f.dec.p1).size());
}
BENCHMARK(BM_ClosedClasses)->Unit(benchmark::kMicrosecond);

void BM_SeriesMeasure(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(lyapunov_measure_series(f.dec.p1, f.m).index());
}
BENCHMARK(BM_SeriesMeasure)->Unit(benchmark::kMillisecond);

void BM_SolveMeasure(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(lyapunov_measure_solve(f.dec.p1, 1.0, f.m).index());
}
BENCHMARK(BM_SolveMeasure)->Unit(benchmark::kMillisecond);

void BM_InvariantMeasure(benchmark::State& state) {
  const auto& f = fixture();
  const auto closed = attractor_closed_matrix(f.tm, f.x0);
  for (auto _ : state) benchmark::DoNotOptimize(invariant_measure(closed).iterations);
}
BENCHMARK(BM_InvariantMeasure)->Unit(benchmark::kMillisecond);

void BM_Analyze(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(analyze(f.tm, f.partition, f.x0).transient);
}
BENCHMARK(BM_Analyze)->Unit(benchmark::kMillisecond);

}  // namespace
