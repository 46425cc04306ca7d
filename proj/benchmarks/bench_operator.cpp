#include "sonic/gradients.hpp"
#include "sonic/operator.hpp"
#include "sonic/rng.hpp"
#include "sonic/tasks.hpp"

#include <benchmark/benchmark.h>

#include <cstdlib>

namespace {

using namespace sonic;

Signal random_input(std::size_t channels, const GridPtr& grid, CounterRng& rng) {
  Signal x(channels, grid);
  for (double& v : x.data) v = rng.normal();
  return x;
}

void BM_BlockForward(benchmark::State& state) {
  ::setenv("SONIC_THREADS", "1", 1);
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(1);
  const SonicBlock block = SonicBlock::initialize({8, 8, 8, 2}, {}, rng);
  const Signal x = random_input(8, make_grid({n, n}), rng);
  for (auto _ : state) benchmark::DoNotOptimize(block_forward(block, x));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(n * n));
}
BENCHMARK(BM_BlockForward)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond)->Complexity();

void BM_AssembleSymbol(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(2);
  const SonicBlock block = SonicBlock::initialize({8, 8, 8, 2}, {}, rng);
  const GridPtr grid = make_grid({n, n});
  for (auto _ : state) benchmark::DoNotOptimize(assemble_symbol(block, grid));
}
BENCHMARK(BM_AssembleSymbol)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMillisecond);

void BM_RealDftRoundTrip(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CounterRng rng(3);
  const Signal x = random_input(8, make_grid({n, n}), rng);
  for (auto _ : state) benchmark::DoNotOptimize(dft_inverse(dft_forward(x)));
}
BENCHMARK(BM_RealDftRoundTrip)->RangeMultiplier(2)->Range(16, 256)->Unit(benchmark::kMicrosecond);

void BM_LossAndGradients(benchmark::State& state) {
  ::setenv("SONIC_THREADS", "1", 1);
  const auto setup = default_gradcheck_setup(4);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(setup.net, setup.batch, setup.objective));
}
BENCHMARK(BM_LossAndGradients)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
