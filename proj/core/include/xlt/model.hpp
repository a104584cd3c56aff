#pragma once

#include "xlt/corpus.hpp"
#include "xlt/tensor.hpp"
#include "xlt/tokenizer.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace xlt {

/// Encoder hyperparameters. Defaults are the desk-scale configuration.
struct ModelConfig {
  static constexpr std::size_t n_labels = kNumLabels;

  std::size_t n_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  std::size_t max_len = 64;
  std::size_t vocab_size = 0;
  double dropout_rate = 0.1;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class PoolMode { cls, max };

std::string_view to_string(PoolMode mode);
PoolMode parse_pool_mode(std::string_view text);

/// Allocates every named tensor and draws weights from N(0, 0.02); biases
/// and layer-norm offsets start at 0, layer-norm scales at 1.
///
/// Names: "embeddings.{token,position,segment}", "embeddings.ln.{scale,offset}",
/// "layer.{i}.attn.{query,key,value,output}.{weight,bias}",
/// "layer.{i}.attn.ln.{scale,offset}", "layer.{i}.ffn.{in,out}.{weight,bias}",
/// "layer.{i}.ffn.ln.{scale,offset}", "heads.cls.{weight,bias}",
/// "heads.mlm.{weight,bias}", "heads.nsp.{weight,bias}".
/// Weights are stored output-major (out x in), so y = x W^T + b.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Throws ConfigError unless the parameters have exactly the layout of cfg.
void check_parameters(const Parameters& params, const ModelConfig& cfg);

struct ForwardOutput {
  Matrix hidden_states;  // length x d_model, final layer
  RowVector pooled;      // d_model
  std::array<double, kNumLabels> label_probs{};
};

struct LayerNormCache {
  Matrix normalized;         // (x - mean) / sigma, before scale/offset
  Eigen::VectorXd inv_sigma;  // per position
};

struct LayerTrace {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> attention;  // one length x length matrix per head
  Matrix context;
  Matrix attn_dropout;  // empty when dropout is inactive
  LayerNormCache attn_ln;
  Matrix attn_norm;
  Matrix ffn_pre;  // before GELU
  Matrix ffn_act;
  Matrix ffn_dropout;
  LayerNormCache ffn_ln;
};

/// Everything backward() needs, plus the attention maps for inspection.
struct ForwardTrace {
  std::vector<int> ids;
  std::vector<std::uint8_t> segments;
  std::vector<std::uint8_t> mask;
  LayerNormCache emb_ln;
  Matrix emb_dropout;
  std::vector<LayerTrace> layers;
  Matrix hidden;
  RowVector pooled;
  std::vector<Eigen::Index> max_rows;  // argmax row per column (MAX pooling)
  PoolMode pool_mode = PoolMode::cls;
  RowVector logits;
  std::array<double, kNumLabels> label_probs{};
};

ForwardTrace forward_trace(const Parameters& params, const ModelConfig& cfg, const Encoding& enc,
                           PoolMode pool_mode, bool train_mode, std::uint64_t seed);

ForwardOutput forward(const Parameters& params, const ModelConfig& cfg, const Encoding& enc,
                      PoolMode pool_mode, bool train_mode, std::uint64_t seed);

/// Backpropagates gradients of the final hidden states (and optionally of the
/// classifier logits) through the encoder, accumulating scale * dL/dtheta.
void backward(const Parameters& params, const ModelConfig& cfg, const ForwardTrace& trace,
              Matrix d_hidden, const RowVector* d_logits, Gradients& grads, double scale = 1.0);

inline constexpr double kProbEpsilon = 1e-7;

/// Mean over the 8 labels of the binary cross-entropy, probs clamped to
/// [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double, kNumLabels> probs, LabelSet gold);

/// Label i is set iff probs[i] > threshold.
LabelSet predict_labels(std::span<const double, kNumLabels> probs, double threshold = 0.5);

/// Forward + BCE + backward for one example. Returns the loss and adds
/// scale * gradient into grads.
double classification_loss_and_grad(const Parameters& params, const ModelConfig& cfg,
                                    const Encoding& enc, LabelSet gold, PoolMode pool_mode,
                                    bool train_mode, std::uint64_t seed, Gradients& grads,
                                    double scale = 1.0);

std::vector<LabelSet> predict_dataset(const Parameters& params, const ModelConfig& cfg,
                                      std::span<const Encoding> encodings, PoolMode pool_mode,
                                      double threshold);

std::vector<Encoding> encode_dataset(const Vocab& vocab, const Dataset& dataset,
                                     std::size_t max_len);

namespace nn {

// Building blocks, exposed for tests.
// scale/offset are 1 x d tensors.
Matrix layer_norm(const Matrix& x, const Matrix& scale, const Matrix& offset,
                  LayerNormCache& cache);
Matrix layer_norm_backward(const Matrix& dy, const Matrix& scale, const LayerNormCache& cache,
                           Matrix& d_scale, Matrix& d_offset);
double gelu(double x);
double gelu_grad(double x);
inline constexpr double kLayerNormEpsilon = 1e-12;

}  // namespace nn

// Parameter checkpoints: "XLTCKPT\0", u32 version, u64 header length, JSON
// header (config + tensor index), then every tensor as row-major float64.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Parameters& params, const ModelConfig& cfg,
                     const std::filesystem::path& path);
std::pair<Parameters, ModelConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace xlt
