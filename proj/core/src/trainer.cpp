#include "xlt/errors.hpp"
#include "xlt/optim.hpp"
#include "xlt/random.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace xlt {

std::string TrainHistory::to_csv() const {
  std::ostringstream out;
  out << "epoch,mean_loss,lr_first_step,lr_last_step,param_checksum\n";
  out.precision(17);
  for (const auto& e : epochs) {
    char checksum[17];
    std::snprintf(checksum, sizeof checksum, "%016llx",
                  static_cast<unsigned long long>(e.param_checksum));
    out << e.epoch << ',' << e.mean_loss << ',' << e.lr_first_step << ',' << e.lr_last_step << ','
        << checksum << '\n';
  }
  return out.str();
}

namespace {

void clip_gradients(Gradients& grads, double max_norm, const std::vector<std::string>& frozen) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) {
    if (!has_prefix(name, frozen)) sq += g.value.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (auto& [name, g] : grads) g.value *= factor;
  }
}

}  // namespace

TrainResult train_encoded(Parameters params, const ModelConfig& cfg,
                          std::span<const Encoding> inputs, std::span<const LabelSet> golds,
                          const TrainConfig& tc, const CyclicalSchedule& schedule) {
  if (inputs.empty()) throw DataError("cannot train on an empty dataset");
  if (inputs.size() != golds.size()) throw DataError("inputs and labels differ in length");
  if (tc.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (tc.epochs < 1) throw ConfigError("epochs must be >= 1");
  check_parameters(params, cfg);

  const std::size_t n = inputs.size();
  AdamState state(params);
  Gradients grads = params.zeros_like();
  const AdamConfig adam{.weight_decay = tc.weight_decay};
  Rng shuffle_rng(hash_mix(tc.seed, 0x5eed5ULL));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::uint64_t step = 0;
  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t stop = std::min(n, start + tc.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      grads.set_zero();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        const double loss = classification_loss_and_grad(
            params, cfg, inputs[idx], golds[idx], tc.pool_mode, true,
            hash_mix(tc.seed, step, idx), grads, scale);
        if (!std::isfinite(loss)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        }
        loss_sum += loss;
      }
      if (tc.clip_norm > 0.0) clip_gradients(grads, tc.clip_norm, tc.freeze_prefixes);
      const double lr = schedule.lr_at(step);
      adam_step(params, grads, state, lr, adam, tc.freeze_prefixes);
      if (start == 0) record.lr_first_step = lr;
      record.lr_last_step = lr;
      result.history.lr_trace.push_back(lr);
      ++step;
    }
    record.mean_loss = loss_sum / static_cast<double>(n);
    record.param_checksum = params.checksum();
    result.history.epochs.push_back(record);
  }
  result.params = std::move(params);
  return result;
}

TrainResult train(Parameters params, const ModelConfig& cfg, const Dataset& data,
                  const TrainConfig& tc, const CyclicalSchedule& schedule, const Vocab& vocab) {
  if (data.empty()) throw DataError("cannot train on an empty dataset");
  if (vocab.size() != cfg.vocab_size) {
    throw ConfigError("vocabulary size " + std::to_string(vocab.size()) +
                      " does not match model vocab_size " + std::to_string(cfg.vocab_size));
  }
  const auto inputs = encode_dataset(vocab, data, cfg.max_len);
  const auto golds = data.labels();
  return train_encoded(std::move(params), cfg, inputs, golds, tc, schedule);
}

}  // namespace xlt
