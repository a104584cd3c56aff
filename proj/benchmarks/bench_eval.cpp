#include "xlt/eval.hpp"
#include "xlt/random.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_Evaluate(benchmark::State& state) {
  xlt::Rng rng(4);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<xlt::LabelSet> p(n), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = xlt::LabelSet::from_mask(static_cast<std::uint8_t>(rng.uniform_int(256)));
    g[i] = xlt::LabelSet::from_mask(static_cast<std::uint8_t>(rng.uniform_int(256)));
  }
  for (auto _ : state) {
    auto r = xlt::evaluate(p, g);
    benchmark::DoNotOptimize(r.macro_f1);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Evaluate)->Arg(640)->Arg(100000);

}  // namespace
