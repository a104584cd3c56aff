#include "xlt/pretrain.hpp"

#include "xlt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xlt {

std::vector<SentencePair> make_sentence_pairs(std::span<const std::string> corpus,
                                              std::size_t count, std::uint64_t seed) {
  if (corpus.size() < 3) throw DataError("next-sentence pairs need at least 3 sentences");
  Rng rng(hash_mix(seed, 0x9a125ULL));
  std::vector<SentencePair> pairs;
  pairs.reserve(count);
  const std::size_t n_true = count / 2;
  for (std::size_t k = 0; k < count; ++k) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(corpus.size() - 1));
    if (k < n_true) {
      pairs.push_back({corpus[i], corpus[i + 1], true});
    } else {
      std::size_t j = i + 1;
      while (j == i + 1 || j == i) j = static_cast<std::size_t>(rng.uniform_int(corpus.size()));
      pairs.push_back({corpus[i], corpus[j], false});
    }
  }
  rng.shuffle(std::span<SentencePair>(pairs));
  return pairs;
}

MaskedExample mask_pair(const Vocab& vocab, const SentencePair& pair, std::size_t max_len,
                        double mask_rate, Rng& rng) {
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) throw ConfigError("mask_rate must be in [0,1]");
  MaskedExample ex;
  ex.input = encode_pair(vocab, pair.first, pair.second, max_len);
  ex.is_next = pair.is_next;

  std::vector<std::size_t> maskable;
  for (std::size_t t = 0; t < ex.input.ids.size(); ++t) {
    if (ex.input.attention_mask[t] && !Vocab::is_special(ex.input.ids[t])) maskable.push_back(t);
  }
  ex.n_maskable = maskable.size();
  const auto n_mask = static_cast<std::size_t>(
      std::llround(mask_rate * static_cast<double>(maskable.size())));
  // Partial Fisher-Yates picks n_mask distinct positions.
  for (std::size_t k = 0; k < n_mask; ++k) {
    const auto j = k + static_cast<std::size_t>(rng.uniform_int(maskable.size() - k));
    std::swap(maskable[k], maskable[j]);
  }
  maskable.resize(n_mask);
  std::sort(maskable.begin(), maskable.end());

  const auto n_regular = static_cast<std::uint64_t>(vocab.size()) - Vocab::kNumSpecial;
  for (auto pos : maskable) {
    const int original = ex.input.ids[pos];
    ex.targets.emplace_back(pos, original);
    const double r = rng.uniform();
    if (r < 0.8) {
      ex.input.ids[pos] = Vocab::kMask;
    } else if (r < 0.9 && n_regular > 0) {
      ex.input.ids[pos] = Vocab::kNumSpecial + static_cast<int>(rng.uniform_int(n_regular));
    }
  }
  return ex;
}

HeadLoss pretrain_heads(const Parameters& params, const ForwardTrace& trace,
                        std::span<const std::pair<std::size_t, int>> targets,
                        std::optional<bool> is_next, double mlm_weight, double nsp_weight,
                        Matrix& d_hidden, Gradients* grads) {
  HeadLoss loss;
  if (d_hidden.rows() != trace.hidden.rows() || d_hidden.cols() != trace.hidden.cols()) {
    d_hidden = Matrix::Zero(trace.hidden.rows(), trace.hidden.cols());
  }
  const Matrix& w_mlm = params["heads.mlm.weight"];
  const Matrix& b_mlm = params["heads.mlm.bias"];
  for (const auto& [pos, target] : targets) {
    const auto row = static_cast<Eigen::Index>(pos);
    RowVector logits = trace.hidden.row(row) * w_mlm.transpose() + b_mlm;
    const double peak = logits.maxCoeff();
    RowVector probs = (logits.array() - peak).exp().matrix();
    const double z = probs.sum();
    probs /= z;
    loss.mlm += mlm_weight * -(logits(target) - peak - std::log(z));
    if (grads != nullptr) {
      RowVector d_logits = probs * mlm_weight;
      d_logits(target) -= mlm_weight;
      (*grads)["heads.mlm.weight"].noalias() += d_logits.transpose() * trace.hidden.row(row);
      (*grads)["heads.mlm.bias"].row(0) += d_logits;
      d_hidden.row(row).noalias() += d_logits * w_mlm;
    }
  }
  if (is_next.has_value()) {
    const Matrix& w_nsp = params["heads.nsp.weight"];
    const double logit = trace.hidden.row(0).dot(w_nsp.row(0)) + params["heads.nsp.bias"](0, 0);
    const double p = std::clamp(1.0 / (1.0 + std::exp(-logit)), kProbEpsilon, 1.0 - kProbEpsilon);
    const double y = *is_next ? 1.0 : 0.0;
    loss.nsp += nsp_weight * -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    if (grads != nullptr) {
      const double raw = 1.0 / (1.0 + std::exp(-logit));
      const bool clamped = raw < kProbEpsilon || raw > 1.0 - kProbEpsilon;
      const double d_logit = clamped ? 0.0 : (raw - y) * nsp_weight;
      (*grads)["heads.nsp.weight"].row(0) += d_logit * trace.hidden.row(0);
      (*grads)["heads.nsp.bias"](0, 0) += d_logit;
      d_hidden.row(0) += d_logit * w_nsp.row(0);
    }
  }
  return loss;
}

PretrainStats pretrain_step(Parameters& params, const ModelConfig& cfg, AdamState& state,
                            const Vocab& vocab, std::span<const SentencePair> batch,
                            double mask_rate, double lr, std::uint64_t seed, bool update) {
  if (batch.empty()) throw DataError("empty pretraining batch");
  Rng rng(hash_mix(seed, 0x3a5cULL));
  std::vector<MaskedExample> examples;
  examples.reserve(batch.size());
  PretrainStats stats;
  for (const auto& pair : batch) {
    examples.push_back(mask_pair(vocab, pair, cfg.max_len, mask_rate, rng));
    stats.n_masked += examples.back().targets.size();
    stats.n_maskable += examples.back().n_maskable;
  }
  if (stats.n_maskable == 0) throw DataError("pretraining batch has no maskable positions");

  const double mlm_weight = stats.n_masked ? 1.0 / static_cast<double>(stats.n_masked) : 0.0;
  const double nsp_weight = 1.0 / static_cast<double>(batch.size());
  Gradients grads = params.zeros_like();
  for (std::size_t k = 0; k < examples.size(); ++k) {
    const auto& ex = examples[k];
    const ForwardTrace tr = forward_trace(params, cfg, ex.input, PoolMode::cls, update,
                                          hash_mix(seed, k, 0xd0ULL));
    Matrix d_hidden;
    const HeadLoss hl = pretrain_heads(params, tr, ex.targets, ex.is_next, mlm_weight, nsp_weight,
                                       d_hidden, update ? &grads : nullptr);
    stats.mlm_loss += hl.mlm;
    stats.nsp_loss += hl.nsp;
    if (update) backward(params, cfg, tr, std::move(d_hidden), nullptr, grads, 1.0);
  }
  stats.loss = stats.mlm_loss + stats.nsp_loss;
  if (!std::isfinite(stats.loss)) throw TrainingError("non-finite pretraining loss");
  if (update) adam_step(params, grads, state, lr, AdamConfig{}, {"heads.cls"});
  return stats;
}

std::vector<PretrainStats> pretrain(Parameters& params, const ModelConfig& cfg, const Vocab& vocab,
                                    std::span<const std::string> corpus,
                                    const PretrainConfig& pc) {
  std::vector<PretrainStats> out;
  if (pc.steps == 0) return out;
  if (pc.batch_size == 0) throw ConfigError("pretraining batch_size must be >= 1");
  AdamState state(params);
  out.reserve(pc.steps);
  for (std::size_t step = 0; step < pc.steps; ++step) {
    const auto batch = make_sentence_pairs(corpus, pc.batch_size, hash_mix(pc.seed, step, 1));
    out.push_back(pretrain_step(params, cfg, state, vocab, batch, pc.mask_rate, pc.lr,
                                hash_mix(pc.seed, step, 2)));
  }
  return out;
}

}  // namespace xlt
