#include <benchmark/benchmark.h>

#include "treeglass/dynamics.hpp"
#include "treeglass/spectral.hpp"

using namespace treeglass;

namespace {

// One sweep = n heat-bath steps at criticality on a free b=2 tree.
void BM_HeatBathSweep(benchmark::State& state) {
  const TreeShape s(2, static_cast<int>(state.range(0)));
  const auto params = IsingParams::critical(2);
  const Pinning pin(s.size(), 0);
  SpinConfig c(s.size(), 1);
  Rng rng(1);
  for (auto _ : state) {
    run_single_site(c, s.forest(), pin, params, rng, s.size());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.size()));
}
BENCHMARK(BM_HeatBathSweep)->DenseRange(6, 16, 5);

void BM_BlockUpdate(benchmark::State& state) {
  const int h = 12;
  const TreeShape s(2, h);
  const auto params = IsingParams::critical(2);
  const BoundaryCondition bc = BoundaryCondition::all_plus();
  const Pinning pin = bc.resolve(s);
  const BlockCover cover = paper_block_cover(s, static_cast<int>(state.range(0)), h - static_cast<int>(state.range(0)));
  std::vector<PreparedBlock> prepared;
  for (const auto& blk : cover.blocks) prepared.push_back(prepare_block(s.forest(), blk, pin));
  SpinConfig c(s.size(), 1);
  Rng rng(2);
  std::size_t i = 0;
  for (auto _ : state) {
    block_update(c, prepared[i++ % prepared.size()], params, rng);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_BlockUpdate)->Arg(2)->Arg(4)->Arg(6);

void BM_BuildKernel(benchmark::State& state) {
  const TreeShape s(2, static_cast<int>(state.range(0)));
  const auto params = IsingParams::critical(2);
  for (auto _ : state) {
    const MarkovKernel k = build_kernel(Dynamics{SingleSite{}}, s, params, BoundaryCondition::free());
    benchmark::DoNotOptimize(k.size());
  }
}
BENCHMARK(BM_BuildKernel)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_SpectralGapDense(benchmark::State& state) {
  const TreeShape s(2, 2);
  const MarkovKernel k = build_kernel(Dynamics{SingleSite{}}, s, IsingParams::critical(2), BoundaryCondition::free());
  for (auto _ : state) benchmark::DoNotOptimize(spectral_gap(k, GapMethod::Dense).gap);
}
BENCHMARK(BM_SpectralGapDense)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
