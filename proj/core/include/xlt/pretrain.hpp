#pragma once

#include "xlt/model.hpp"
#include "xlt/optim.hpp"
#include "xlt/random.hpp"
#include "xlt/tokenizer.hpp"

#include <span>
#include <string>
#include <vector>

namespace xlt {

/// Masked-language-model and next-sentence objectives at toy scale.

struct SentencePair {
  std::string first;
  std::string second;
  bool is_next = false;
};

/// count pairs from an ordered corpus: the first half (rounded down) are true
/// successors (i, i+1), the rest pair sentence i with a random j != i+1. The
/// pairs are returned in shuffled order.
std::vector<SentencePair> make_sentence_pairs(std::span<const std::string> corpus,
                                              std::size_t count, std::uint64_t seed);

struct MaskedExample {
  Encoding input;
  std::vector<std::pair<std::size_t, int>> targets;  // (position, original id)
  bool is_next = false;
  std::size_t n_maskable = 0;
};

/// Selects round(mask_rate * maskable) non-special positions; of those 80%
/// become [MASK], 10% a random non-special token, 10% stay unchanged.
MaskedExample mask_pair(const Vocab& vocab, const SentencePair& pair, std::size_t max_len,
                        double mask_rate, Rng& rng);

struct HeadLoss {
  double mlm = 0.0;  // weighted sum of masked-token cross-entropies
  double nsp = 0.0;  // weighted next-sentence BCE
};

/// Evaluates the MLM and NSP heads on a forward trace. Adds the head-weight
/// gradients into grads (when non-null) and the hidden-state gradient into
/// d_hidden; backward() must be called afterwards to reach the encoder.
HeadLoss pretrain_heads(const Parameters& params, const ForwardTrace& trace,
                        std::span<const std::pair<std::size_t, int>> targets,
                        std::optional<bool> is_next, double mlm_weight, double nsp_weight,
                        Matrix& d_hidden, Gradients* grads);

struct PretrainStats {
  double loss = 0.0;  // mlm + nsp
  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
  std::size_t n_masked = 0;
  std::size_t n_maskable = 0;
};

/// Loss over one batch of sentence pairs: mean cross-entropy over all masked
/// positions plus mean next-sentence BCE. With update set, applies one Adam
/// step at learning rate lr. Throws DataError when no position is maskable.
PretrainStats pretrain_step(Parameters& params, const ModelConfig& cfg, AdamState& state,
                            const Vocab& vocab, std::span<const SentencePair> batch,
                            double mask_rate, double lr, std::uint64_t seed, bool update = true);

struct PretrainConfig {
  std::size_t steps = 0;
  std::size_t batch_size = 16;
  double mask_rate = 0.15;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

std::vector<PretrainStats> pretrain(Parameters& params, const ModelConfig& cfg, const Vocab& vocab,
                                    std::span<const std::string> corpus,
                                    const PretrainConfig& pc);

}  // namespace xlt
