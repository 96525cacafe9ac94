// Parallel kernels against their serial references.

#include "psdbp/kernel.hpp"
#include "psdbp/simulator.hpp"
#include "psdbp/spectral.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace psdbp;

namespace {

const OffspringModel kModel = OffspringModel::zero_inflated(Family::BevertonHolt, BaseKind::BinarySplitting);
const Theta kTheta{50, 0.7};

void BM_KernelParallel(benchmark::State& st) {
    const auto z_max = static_cast<std::size_t>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(build_kernel(kModel, kTheta, z_max));
}

void BM_KernelSerialReference(benchmark::State& st) {
    const auto z_max = static_cast<std::size_t>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(build_kernel_reference(kModel, kTheta, z_max));
}

void BM_SpectralPower(benchmark::State& st) {
    const auto k = build_kernel(kModel, Theta{8, 0.7}, static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(spectral(k.q));
}

void BM_SpectralDenseOracle(benchmark::State& st) {
    const auto k = build_kernel(kModel, Theta{8, 0.7}, static_cast<std::size_t>(st.range(0)));
    for (auto _ : st) benchmark::DoNotOptimize(spectral_oracle(k.q));
}

void simulate_with_threads(benchmark::State& st, int threads) {
    SimConfig c;
    c.initial_size = 2;
    c.horizon = 500;
    c.replications = 64;
    c.condition_on_survival = true;
    c.seed = 1;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    for (auto _ : st) benchmark::DoNotOptimize(simulate_batch(c, kModel, kTheta));
    omp_set_num_threads(saved);
}

void BM_SimulateBatchParallel(benchmark::State& st) { simulate_with_threads(st, omp_get_num_procs()); }
void BM_SimulateBatchSerial(benchmark::State& st) { simulate_with_threads(st, 1); }

} // namespace

BENCHMARK(BM_KernelParallel)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_KernelSerialReference)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SpectralPower)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SpectralDenseOracle)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SimulateBatchParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateBatchSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
