#include <benchmark/benchmark.h>

#include "subdetect/detectors.hpp"
#include "subdetect/lower_bound.hpp"
#include "subdetect/observation.hpp"

using namespace subdetect;

namespace {

Matrix sample(int d1, int d2, std::uint64_t stream) {
  return sample_observation(ProblemShape(d1, d2, 1, 1), std::nullopt, SeedSpec{42, stream})
      .values;
}

void BM_NormalDraws(benchmark::State& state) {
  RandomStream rs(SeedSpec{1, 0});
  for (auto _ : state) {
    double acc = 0;
    for (int i = 0; i < 1024; ++i) acc += rs.next_normal();
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_NormalDraws);

void BM_TruncChi2(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Matrix y = sample(d, d, 0);
  TruncationConstant tau = trunc_tau(ProblemShape(d, d, 4, 4), Axis::kOne);
  for (auto _ : state) benchmark::DoNotOptimize(stat_trunc_chi2(y, Axis::kOne, tau));
}
BENCHMARK(BM_TruncChi2)->Arg(64)->Arg(256);

void BM_MaxTruncScan(benchmark::State& state) {
  const int d = 64;
  const int s = static_cast<int>(state.range(0));
  Matrix y = sample(d, d, 1);
  TruncationConstant tau = max_trunc_tau(ProblemShape(d, d, s, s), Axis::kOne);
  std::uint64_t work = 0;
  for (auto _ : state) {
    auto r = stat_max_trunc_chi2(y, Axis::kOne, s, tau, 1000000);
    benchmark::DoNotOptimize(r.value);
    work += r.work;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(work));
}
BENCHMARK(BM_MaxTruncScan)->Arg(2)->Arg(3)->Arg(4);

void BM_MaxLinShortcut(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Matrix y = sample(d, d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(stat_max_lin(y, Axis::kOne, d / 8).value);
}
BENCHMARK(BM_MaxLinShortcut)->Arg(64)->Arg(256);

void BM_SecondMomentExact(benchmark::State& state) {
  ProblemShape shape(64, 64, 8, 8);
  for (auto _ : state) benchmark::DoNotOptimize(log_second_moment_exact(shape, 0.4));
}
BENCHMARK(BM_SecondMomentExact);

}  // namespace

BENCHMARK_MAIN();
