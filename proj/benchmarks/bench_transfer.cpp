#include <benchmark/benchmark.h>

#include <numbers>

#include "stochlyap/transfer.hpp"

using namespace stochlyap;

namespace {

constexpr double pi = std::numbers::pi;

void BM_BuildPendulum(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto map = builtin_pendulum(0.5, 5, 0.1);
  const Partition p({{-pi, -pi}, {pi, pi}, {true, true}}, {side, side});
  for (auto _ : state) {
    auto tm = build_transfer_matrix(map, p, {100, 1, SinkPolicy::SinkUnstable, 0});
    benchmark::DoNotOptimize(tm.combined.nnz());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side * 100 * 5));
}
BENCHMARK(BM_BuildPendulum)->Arg(16)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_Locate(benchmark::State& state) {
  const Partition p({{-4.0, -4.0}, {4.0, 4.0}, {true, false}}, {50, 50});
  double x[2] = {-3.9, -3.9};
  for (auto _ : state) {
    x[0] += 0.0137;
    x[1] = x[1] > 3.9 ? -3.9 : x[1] + 0.0071;
    benchmark::DoNotOptimize(p.locate(x));
  }
}
BENCHMARK(BM_Locate);

void BM_ComposePower(benchmark::State& state) {
  const auto map = builtin_rantzer(0.5, 5, 0.1);
  const Partition p({{-4.0, -4.0}, {4.0, 4.0}, {true, false}}, {32, 32});
  const auto tm = build_transfer_matrix(map, p, {50, 1});
  for (auto _ : state) benchmark::DoNotOptimize(compose_power(tm, static_cast<unsigned>(state.range(0))).nnz());
}
BENCHMARK(BM_ComposePower)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
