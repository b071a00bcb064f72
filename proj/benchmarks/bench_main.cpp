#include <benchmark/benchmark.h>

#include "mtrack/experiment.hpp"
#include "mtrack/forward.hpp"
#include "mtrack/imaging.hpp"
#include "mtrack/scattering.hpp"

namespace {

struct Fixture {
  mtrack::ExperimentConfig config = mtrack::preset("paper-default");
  mtrack::Trajectory path = mtrack::config_trajectory(config);
  mtrack::WaveRecord record = mtrack::add_noise(mtrack::config_forward(config, path), 0.05, 1);
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_RetardedSynthesis(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(mtrack::config_forward(f.config, f.path));
}
BENCHMARK(BM_RetardedSynthesis)->Unit(benchmark::kMillisecond);

void BM_GlobalSearch(benchmark::State& state) {
  const auto& f = fixture();
  const auto mesh = mtrack::SamplingMesh::cube(8.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mtrack::reconstruct_global(f.record, mesh, {}));
}
BENCHMARK(BM_GlobalSearch)->Arg(25)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_SequentialSearch(benchmark::State& state) {
  const auto& f = fixture();
  const auto mesh = mtrack::SamplingMesh::cube(8.0, 50);
  for (auto _ : state)
    benchmark::DoNotOptimize(mtrack::reconstruct_sequential(f.record, mesh, f.path.v_max(), {}));
}
BENCHMARK(BM_SequentialSearch)->Unit(benchmark::kMillisecond);

void BM_ParallelSearch(benchmark::State& state) {
  const auto& f = fixture();
  const auto mesh = mtrack::SamplingMesh::cube(8.0, 50);
  for (auto _ : state)
    benchmark::DoNotOptimize(mtrack::reconstruct_parallel(f.record, mesh, f.path.v_max(), {}));
}
BENCHMARK(BM_ParallelSearch)->Unit(benchmark::kMillisecond);

void BM_LippmannSchwinger(benchmark::State& state) {
  const auto medium = mtrack::make_medium(mtrack::MediumCase::CaseII, 330.0, 1500.0);
  const auto grid = mtrack::voxelize(medium, 1.0, static_cast<std::size_t>(state.range(0)));
  const double k0 = 1.0 / 330.0;
  const mtrack::VolumeOperator op(grid, k0);
  for (auto _ : state)
    benchmark::DoNotOptimize(mtrack::solve_lippmann_schwinger({3.0, 1.0, -2.0}, grid, op, k0));
}
BENCHMARK(BM_LippmannSchwinger)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
