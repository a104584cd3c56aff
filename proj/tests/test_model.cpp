#include "test_util.hpp"
#include "xlt/errors.hpp"
#include "xlt/model.hpp"
#include "xlt/optim.hpp"
#include "xlt/pretrain.hpp"
#include "xlt/tokenizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

using namespace xlt;

namespace {

ModelConfig tiny(std::size_t vocab_size, std::size_t layers = 2, std::size_t d = 16) {
  ModelConfig c;
  c.n_layers = layers;
  c.d_model = d;
  c.n_heads = 2;
  c.d_ff = 24;
  c.max_len = 16;
  c.vocab_size = vocab_size;
  c.dropout_rate = 0.1;
  return c;
}

Encoding random_encoding(Rng& rng, std::size_t vocab, std::size_t max_len, std::size_t n_real) {
  Encoding e;
  e.ids.assign(max_len, Vocab::kPad);
  e.attention_mask.assign(max_len, 0);
  e.ids[0] = Vocab::kCls;
  for (std::size_t i = 1; i + 1 < n_real; ++i) e.ids[i] = static_cast<int>(5 + rng.uniform_int(vocab - 5));
  e.ids[n_real - 1] = Vocab::kSep;
  for (std::size_t i = 0; i < n_real; ++i) e.attention_mask[i] = 1;
  return e;
}

Encoding pad_to(const Encoding& e, std::size_t len) {
  Encoding out = e;
  out.ids.resize(len, Vocab::kPad);
  out.attention_mask.resize(len, 0);
  if (!out.segment_ids.empty()) out.segment_ids.resize(len, 0);
  return out;
}

}  // namespace

TEST(ModelConfig, Validation) {
  ModelConfig c = tiny(20);
  EXPECT_NO_THROW(c.validate());
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(20);
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(5);
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Parameters, NamesShapesAndInit) {
  const ModelConfig c = tiny(30);
  const Parameters p = init_parameters(c, 1);
  EXPECT_EQ(p["embeddings.token"].rows(), 30);
  EXPECT_EQ(p["embeddings.token"].cols(), 16);
  EXPECT_EQ(p["embeddings.position"].rows(), 16);
  EXPECT_EQ(p["embeddings.segment"].rows(), 2);
  EXPECT_EQ(p["heads.cls.weight"].rows(), 8);
  EXPECT_EQ(p["heads.cls.weight"].cols(), 16);
  EXPECT_EQ(p["heads.cls.bias"].size(), 8);
  EXPECT_EQ(p["heads.mlm.weight"].rows(), 30);
  EXPECT_EQ(p["heads.nsp.weight"].rows(), 1);
  EXPECT_EQ(p["layer.1.ffn.in.weight"].rows(), 24);
  EXPECT_EQ(p["layer.1.ffn.in.weight"].cols(), 16);
  EXPECT_TRUE((p["layer.0.attn.ln.scale"].array() == 1.0).all());
  EXPECT_TRUE((p["layer.0.attn.query.bias"].array() == 0.0).all());
  for (const auto& name : p.names()) {
    EXPECT_TRUE(name.starts_with("embeddings") || name.starts_with("layer.") || name.starts_with("heads."))
        << name;
  }
  // weight draws are N(0, 0.02)
  const Matrix& w = p["embeddings.token"];
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().mean());
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(sd, 0.02, 0.005);
  EXPECT_EQ(init_parameters(c, 1).checksum(), p.checksum());
  EXPECT_NE(init_parameters(c, 2).checksum(), p.checksum());
  EXPECT_NO_THROW(check_parameters(p, c));
  EXPECT_THROW(check_parameters(p, tiny(31)), ConfigError);
}

TEST(Forward, AttentionRowsSumToOneOverRealPositions) {
  Rng rng(1);
  const ModelConfig c = tiny(40);
  const Parameters p = init_parameters(c, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(15);
    const Encoding e = random_encoding(rng, 40, 16, n);
    const ForwardTrace t = forward_trace(p, c, e, PoolMode::cls, false, 0);
    for (const auto& layer : t.layers) {
      for (const auto& a : layer.attention) {
        for (std::size_t i = 0; i < n; ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          EXPECT_NEAR(a.row(ii).head(static_cast<Eigen::Index>(n)).sum(), 1.0, 1e-6);
          for (std::size_t j = n; j < 16; ++j) EXPECT_EQ(a(ii, static_cast<Eigen::Index>(j)), 0.0);
        }
      }
    }
    for (double q : t.label_probs) {
      EXPECT_GT(q, 0.0);
      EXPECT_LT(q, 1.0);
    }
  }
}

TEST(Forward, PaddingInvariance) {
  Rng rng(2);
  const ModelConfig c = tiny(40);
  const Parameters p = init_parameters(c, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(7);
    const Encoding shortest = random_encoding(rng, 40, n, n);
    for (PoolMode mode : {PoolMode::cls, PoolMode::max}) {
      const auto a = forward(p, c, pad_to(shortest, 9), mode, false, 0);
      const auto b = forward(p, c, pad_to(shortest, 16), mode, false, 0);
      EXPECT_EQ(a.pooled.size(), b.pooled.size());
      for (std::size_t k = 0; k < kNumLabels; ++k) EXPECT_NEAR(a.label_probs[k], b.label_probs[k], 1e-6);
    }
  }
}

TEST(Forward, PermutationEquivarianceWithoutPositions) {
  Rng rng(3);
  const ModelConfig c = tiny(40);
  Parameters p = init_parameters(c, 5);
  p["embeddings.position"].setZero();
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 4 + rng.uniform_int(10);
    const Encoding e = random_encoding(rng, 40, 16, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    Encoding pe = e;
    for (std::size_t i = 0; i < n; ++i) pe.ids[i] = e.ids[perm[i]];
    const auto a = forward(p, c, e, PoolMode::max, false, 0);
    const auto b = forward(p, c, pe, PoolMode::max, false, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row_b = b.hidden_states.row(static_cast<Eigen::Index>(i));
      const auto row_a = a.hidden_states.row(static_cast<Eigen::Index>(perm[i]));
      EXPECT_LT((row_a - row_b).cwiseAbs().maxCoeff(), 1e-9);
    }
    for (std::size_t k = 0; k < kNumLabels; ++k) EXPECT_NEAR(a.label_probs[k], b.label_probs[k], 1e-6);
  }
}

TEST(Forward, DeterminismAndDropout) {
  Rng rng(4);
  const ModelConfig c = tiny(40);
  const Parameters p = init_parameters(c, 6);
  const Encoding e = random_encoding(rng, 40, 16, 10);
  const auto a = forward(p, c, e, PoolMode::cls, false, 1);
  const auto b = forward(p, c, e, PoolMode::cls, false, 2);
  EXPECT_EQ(a.hidden_states, b.hidden_states);
  const auto d1 = forward(p, c, e, PoolMode::cls, true, 7);
  const auto d2 = forward(p, c, e, PoolMode::cls, true, 7);
  const auto d3 = forward(p, c, e, PoolMode::cls, true, 8);
  EXPECT_EQ(d1.hidden_states, d2.hidden_states);
  EXPECT_NE(d1.hidden_states, d3.hidden_states);
  EXPECT_NE(d1.hidden_states, a.hidden_states);
}

TEST(Forward, InputErrors) {
  Rng rng(5);
  const ModelConfig c = tiny(40);
  const Parameters p = init_parameters(c, 6);
  Encoding e = random_encoding(rng, 40, 16, 5);
  e.ids[1] = 40;
  EXPECT_THROW(forward(p, c, e, PoolMode::cls, false, 0), DataError);
  EXPECT_THROW(forward(p, c, random_encoding(rng, 40, 17, 5), PoolMode::cls, false, 0), DataError);
  Encoding bad = random_encoding(rng, 40, 16, 5);
  bad.attention_mask.pop_back();
  EXPECT_THROW(forward(p, c, bad, PoolMode::cls, false, 0), DataError);
}

TEST(LayerNorm, NormalizedMomentsProperty) {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    Matrix x(1 + static_cast<Eigen::Index>(rng.uniform_int(8)), 2 + static_cast<Eigen::Index>(rng.uniform_int(30)));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 10.0 * rng.normal() + 3.0;
    Matrix scale = Matrix::Constant(1, x.cols(), 2.0);
    Matrix offset = Matrix::Constant(1, x.cols(), -1.0);
    LayerNormCache cache;
    const Matrix y = nn::layer_norm(x, scale, offset, cache);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const auto row = cache.normalized.row(r);
      const double mean = row.mean();
      EXPECT_NEAR(mean, 0.0, 1e-6);
      EXPECT_NEAR((row.array() - mean).square().mean(), 1.0, 1e-4);
      EXPECT_LT((y.row(r) - (2.0 * row.array() - 1.0).matrix()).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Gelu, ExactErfFormAndDerivative) {
  for (double x : {-3.0, -1.0, -0.1, 0.0, 0.5, 2.0}) {
    EXPECT_NEAR(nn::gelu(x), 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))), 1e-15);
    const double h = 1e-6;
    EXPECT_NEAR(nn::gelu_grad(x), (nn::gelu(x + h) - nn::gelu(x - h)) / (2 * h), 1e-8);
  }
}

TEST(BceLoss, AnalyticValues) {
  std::array<double, 8> probs{};
  LabelSet gold;
  gold.set(3);
  for (std::size_t k = 0; k < 8; ++k) probs[k] = gold.test(k) ? 1 - 1e-7 : 1e-7;
  EXPECT_LE(bce_loss(probs, gold), 1.2e-6);
  probs.fill(0.5);
  EXPECT_NEAR(bce_loss(probs, gold), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(probs, LabelSet{}), std::log(2.0), 1e-12);
  probs.fill(0.1);
  probs[3] = 0.9;
  EXPECT_NEAR(bce_loss(probs, gold), std::log(1.0 / 0.9), 1e-12);
  probs.fill(0.0);
  EXPECT_TRUE(std::isfinite(bce_loss(probs, gold)));
}

TEST(PredictLabels, StrictThreshold) {
  std::array<double, 8> probs{};
  probs.fill(0.99);
  EXPECT_EQ(predict_labels(probs).mask(), 0xff);
  probs.fill(0.5);
  EXPECT_TRUE(predict_labels(probs, 0.5).empty());
  probs = {0.7, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2};
  EXPECT_EQ(predict_labels(probs), LabelSet::from_mask(1));
}

TEST(Gradcheck, TinyModelEveryTensor) {
  Rng rng(7);
  const ModelConfig c = tiny(25, 2, 16);
  const Parameters p = init_parameters(c, 8);
  GradcheckSample s;
  s.input = random_encoding(rng, 25, 12, 9);
  s.input.segment_ids.assign(12, 0);
  for (std::size_t i = 5; i < 9; ++i) s.input.segment_ids[i] = 1;
  s.gold = LabelSet::from_mask(0b10100101);
  s.mlm_targets = {{2, 7}, {5, 11}};
  s.is_next = true;
  for (PoolMode mode : {PoolMode::cls, PoolMode::max}) {
    s.pool_mode = mode;
    const GradcheckReport r = gradcheck(p, c, s);
    EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_tensor;
    EXPECT_GE(r.coordinates, 200U);
    EXPECT_EQ(r.per_tensor.size(), p.size());
    for (const auto& t : r.per_tensor) EXPECT_GT(t.coordinates, 0U) << t.name;
  }
}

TEST(Gradcheck, DetectsCorruptedGradient) {
  Rng rng(8);
  const ModelConfig c = tiny(25, 1, 8);
  const Parameters p = init_parameters(c, 9);
  GradcheckSample s;
  s.input = random_encoding(rng, 25, 10, 8);
  s.gold = LabelSet::from_mask(3);
  GradcheckOptions o;
  o.corrupt_tensor = "layer.0.ffn.in.weight";
  const GradcheckReport r = gradcheck(p, c, s, o);
  EXPECT_GT(r.max_rel_error, 1e-2);
  EXPECT_EQ(r.worst_tensor, "layer.0.ffn.in.weight");
}

TEST(Checkpoint, RoundTripAndErrors) {
  xlt::testing::TempDir dir;
  const ModelConfig c = tiny(30);
  const Parameters p = init_parameters(c, 10);
  save_checkpoint(p, c, dir / "m.bin");
  const auto [q, qc] = load_checkpoint(dir / "m.bin");
  EXPECT_EQ(qc, c);
  EXPECT_EQ(q.checksum(), p.checksum());
  for (const auto& [name, t] : p) EXPECT_EQ(q[name], t.value) << name;
  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "NOTACKPT";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.bin"), DataError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), DataError);
  // truncated data section
  const auto size = std::filesystem::file_size(dir / "m.bin");
  std::filesystem::copy_file(dir / "m.bin", dir / "trunc.bin");
  std::filesystem::resize_file(dir / "trunc.bin", size - 16);
  EXPECT_THROW(load_checkpoint(dir / "trunc.bin"), DataError);
}

namespace {

std::vector<std::string> toy_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  // sentences follow a simple chain so that next-sentence structure is learnable
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(xlt::testing::random_text(rng, 5) + (i % 2 ? " end" : " start"));
  }
  return out;
}

}  // namespace

TEST(Pretrain, MaskCountIsRoundedRate) {
  const auto corpus = toy_corpus(50, 1);
  const Vocab v = train_vocab_from_texts(corpus, 120);
  Rng rng(2);
  const auto pairs = make_sentence_pairs(corpus, 40, 3);
  for (const auto& pair : pairs) {
    for (double rate : {0.0, 0.15, 0.5, 1.0}) {
      const MaskedExample m = mask_pair(v, pair, 32, rate, rng);
      EXPECT_EQ(m.targets.size(), static_cast<std::size_t>(std::llround(rate * static_cast<double>(m.n_maskable))));
      for (const auto& [pos, id] : m.targets) {
        EXPECT_FALSE(Vocab::is_special(id));
        EXPECT_NE(m.input.ids[pos], Vocab::kPad);
      }
    }
  }
}

TEST(Pretrain, SentencePairsHalfTrueSuccessors) {
  const auto corpus = toy_corpus(30, 2);
  const auto pairs = make_sentence_pairs(corpus, 20, 4);
  ASSERT_EQ(pairs.size(), 20U);
  std::size_t next = 0;
  for (const auto& p : pairs) next += p.is_next ? 1 : 0;
  EXPECT_EQ(next, 10U);
}

TEST(Pretrain, UntrainedNspIsNearChance) {
  const auto corpus = toy_corpus(200, 3);
  const Vocab v = train_vocab_from_texts(corpus, 150);
  ModelConfig c = tiny(v.size(), 1, 16);
  c.max_len = 32;
  Parameters p = init_parameters(c, 11);
  AdamState st(p);
  const auto pairs = make_sentence_pairs(corpus, 64, 5);
  const PretrainStats s = pretrain_step(p, c, st, v, pairs, 0.0, 1e-3, 0, false);
  EXPECT_EQ(s.n_masked, 0U);
  EXPECT_NEAR(s.nsp_loss, std::log(2.0), 0.05);
}

TEST(Pretrain, NoMaskablePositionsIsError) {
  const auto corpus = toy_corpus(20, 4);
  const Vocab v = train_vocab_from_texts(corpus, 100);
  const ModelConfig c = tiny(v.size(), 1, 8);
  Parameters p = init_parameters(c, 1);
  AdamState st(p);
  const std::vector<SentencePair> batch = {{"", "", true}};
  EXPECT_THROW(pretrain_step(p, c, st, v, batch, 0.15, 1e-3, 0), DataError);
}

TEST(Pretrain, SmoothedLossDecreases) {
  const auto corpus = toy_corpus(500, 5);
  const Vocab v = train_vocab_from_texts(corpus, 200);
  ModelConfig c = tiny(v.size(), 1, 16);
  c.max_len = 24;
  c.dropout_rate = 0.0;
  Parameters p = init_parameters(c, 12);
  PretrainConfig pc;
  pc.steps = 200;
  pc.batch_size = 8;
  pc.lr = 3e-3;
  pc.seed = 6;
  const auto stats = pretrain(p, c, v, corpus, pc);
  ASSERT_EQ(stats.size(), 200U);
  auto window = [&stats](std::size_t end) {
    double s = 0.0;
    for (std::size_t i = end - 20; i < end; ++i) s += stats[i].loss;
    return s / 20.0;
  };
  EXPECT_LT(window(200), window(20));
  // pretraining never touches the classifier head
  EXPECT_EQ(p["heads.cls.weight"], init_parameters(c, 12)["heads.cls.weight"]);
}
