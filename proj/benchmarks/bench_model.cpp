#include "xlt/model.hpp"
#include "xlt/synthetic.hpp"
#include "xlt/tokenizer.hpp"

#include <benchmark/benchmark.h>

namespace {

struct Setup {
  xlt::ModelConfig cfg;
  xlt::Parameters params;
  xlt::Encoding enc;
};

Setup make_setup(std::size_t layers, std::size_t d, std::size_t len) {
  const auto bench = xlt::generate_synthetic_benchmark({0.5, 0.0, 200, 0});
  const xlt::Vocab vocab = xlt::train_vocab(std::span<const xlt::Dataset>(&bench.train_a, 1), 400);
  Setup s;
  s.cfg.n_layers = layers;
  s.cfg.d_model = d;
  s.cfg.n_heads = 4;
  s.cfg.d_ff = 2 * d;
  s.cfg.max_len = len;
  s.cfg.vocab_size = vocab.size();
  s.params = xlt::init_parameters(s.cfg, 1);
  s.enc = xlt::encode(vocab, bench.train_a[0].text + " " + bench.train_a[1].text, len);
  return s;
}

void BM_Forward(benchmark::State& state) {
  const Setup s = make_setup(2, static_cast<std::size_t>(state.range(0)), 64);
  for (auto _ : state) {
    auto out = xlt::forward(s.params, s.cfg, s.enc, xlt::PoolMode::cls, false, 0);
    benchmark::DoNotOptimize(out.label_probs);
  }
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(64)->Arg(128);

void BM_LossAndGrad(benchmark::State& state) {
  const Setup s = make_setup(2, static_cast<std::size_t>(state.range(0)), 64);
  xlt::Gradients grads = s.params.zeros_like();
  const auto gold = xlt::LabelSet::from_mask(0b101);
  for (auto _ : state) {
    grads.set_zero();
    double loss = xlt::classification_loss_and_grad(s.params, s.cfg, s.enc, gold, xlt::PoolMode::cls, true, 3, grads);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_LossAndGrad)->Arg(32)->Arg(64)->Arg(128);

}  // namespace
