#include "xlt/projection.hpp"
#include "xlt/random.hpp"

#include <benchmark/benchmark.h>

namespace {

xlt::Matrix blobs(Eigen::Index n, Eigen::Index d) {
  xlt::Rng rng(9);
  xlt::Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.normal() + (j == i % 3 ? 6.0 : 0.0);
  }
  return x;
}

void BM_Pca(benchmark::State& state) {
  const xlt::Matrix x = blobs(state.range(0), 64);
  for (auto _ : state) {
    auto r = xlt::pca(x, 50);
    benchmark::DoNotOptimize(r.projected.data());
  }
}
BENCHMARK(BM_Pca)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Affinities(benchmark::State& state) {
  const xlt::Matrix x = blobs(state.range(0), 10);
  for (auto _ : state) {
    auto a = xlt::conditional_affinities(x, 30.0);
    benchmark::DoNotOptimize(a.conditional.data());
  }
}
BENCHMARK(BM_Affinities)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Tsne(benchmark::State& state) {
  const xlt::Matrix x = blobs(state.range(0), 10);
  xlt::TsneConfig cfg;
  cfg.iterations = 300;
  for (auto _ : state) {
    auto r = xlt::tsne(x, cfg);
    benchmark::DoNotOptimize(r.coords.data());
  }
}
BENCHMARK(BM_Tsne)->Arg(150)->Arg(300)->Unit(benchmark::kMillisecond);

}  // namespace
