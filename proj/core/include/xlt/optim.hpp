#pragma once

#include "xlt/corpus.hpp"
#include "xlt/model.hpp"
#include "xlt/tensor.hpp"
#include "xlt/tokenizer.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xlt {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled; off by default
};

/// First and second moments per tensor, shaped like the parameters.
struct AdamState {
  AdamState() = default;
  explicit AdamState(const Parameters& like) : m(like.zeros_like()), v(like.zeros_like()) {}

  TensorMap m;
  TensorMap v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update. Tensors that are absent from grads or
/// match a frozen prefix are skipped entirely (no update, moments untouched).
/// A non-finite gradient aborts before anything is modified (TrainingError
/// naming the tensor).
void adam_step(Parameters& params, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {}, const std::vector<std::string>& frozen_prefixes = {});

/// Triangular cyclical learning rate.
struct CyclicalSchedule {
  double lr_min = 5e-6;
  double lr_max = 3e-5;
  std::uint64_t stepsize = 0;  // optimizer steps per half cycle

  /// Rises linearly lr_min -> lr_max over stepsize steps, falls back over the
  /// next stepsize steps, and repeats. Throws ConfigError if stepsize == 0.
  double lr_at(std::uint64_t step) const;
};

/// Two epochs' worth of optimizer steps.
std::uint64_t default_stepsize(std::size_t n_examples, std::size_t batch_size);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::vector<std::string> freeze_prefixes;
  double threshold = 0.5;
  PoolMode pool_mode = PoolMode::cls;
  double weight_decay = 0.0;
  double clip_norm = 0.0;  // global gradient-norm clipping; 0 disables
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double lr_first_step = 0.0;
  double lr_last_step = 0.0;
  std::uint64_t param_checksum = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<double> lr_trace;  // one entry per optimizer step

  /// epoch,mean_loss,lr_first_step,lr_last_step,param_checksum
  std::string to_csv() const;
};

struct TrainResult {
  Parameters params;
  TrainHistory history;
};

/// Encodes the data once, then runs tc.epochs epochs of seeded shuffling and
/// mini-batch BCE with Adam under the cyclical schedule. The last partial
/// batch is kept.
TrainResult train(Parameters params, const ModelConfig& cfg, const Dataset& data,
                  const TrainConfig& tc, const CyclicalSchedule& schedule, const Vocab& vocab);

/// Same as train() but over pre-encoded inputs.
TrainResult train_encoded(Parameters params, const ModelConfig& cfg,
                          std::span<const Encoding> inputs, std::span<const LabelSet> golds,
                          const TrainConfig& tc, const CyclicalSchedule& schedule);

/// One labelled sample for gradient checking: the classification BCE is
/// always included; MLM targets and the next-sentence label are optional so
/// that every named tensor can receive gradient.
struct GradcheckSample {
  Encoding input;
  LabelSet gold;
  std::vector<std::pair<std::size_t, int>> mlm_targets;  // (position, token id)
  std::optional<bool> is_next;
  PoolMode pool_mode = PoolMode::cls;
};

struct GradcheckOptions {
  std::size_t min_coordinates = 200;
  double step = 1e-4;
  std::uint64_t seed = 0;
  // Harness self-test: scale the analytic gradient of this tensor.
  std::string corrupt_tensor;
  double corrupt_factor = 1.5;
};

struct TensorError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t coordinates = 0;
  std::vector<TensorError> per_tensor;
};

/// |a - n| / max(|a|, |n|, floor) with floor = 1e-6.
double relative_error(double analytic, double numeric);

/// Loss used by gradcheck: classification BCE + optional MLM + NSP terms.
double gradcheck_loss(const Parameters& params, const ModelConfig& cfg,
                      const GradcheckSample& sample, Gradients* grads);

/// Central finite differences over a random subset of coordinates that spans
/// every tensor. Dropout is disabled regardless of cfg.
GradcheckReport gradcheck(const Parameters& params, const ModelConfig& cfg,
                          const GradcheckSample& sample, const GradcheckOptions& options = {});

}  // namespace xlt
