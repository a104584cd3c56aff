#include "xlt/synthetic.hpp"
#include "xlt/tokenizer.hpp"

#include <benchmark/benchmark.h>

namespace {

const xlt::SyntheticBenchmark& corpus() {
  static const auto bench = xlt::generate_synthetic_benchmark({0.5, 0.0, 1000, 0});
  return bench;
}

void BM_TrainVocab(benchmark::State& state) {
  const xlt::Dataset parts[] = {corpus().train_a, corpus().train_b};
  for (auto _ : state) {
    auto v = xlt::train_vocab(parts, static_cast<std::size_t>(state.range(0)));
    benchmark::DoNotOptimize(v.size());
  }
}
BENCHMARK(BM_TrainVocab)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_EncodeDataset(benchmark::State& state) {
  const xlt::Dataset parts[] = {corpus().train_a, corpus().train_b};
  const xlt::Vocab vocab = xlt::train_vocab(parts, 1000);
  std::size_t n = 0;
  for (auto _ : state) {
    for (const auto& e : corpus().train_b) {
      auto enc = xlt::encode(vocab, e.text, 64);
      benchmark::DoNotOptimize(enc.ids.data());
      ++n;
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_EncodeDataset);

}  // namespace
