#include "xlt/model.hpp"

#include "xlt/errors.hpp"
#include "xlt/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace xlt {

void ModelConfig::validate() const {
  if (n_layers == 0) throw ConfigError("n_layers must be >= 1");
  if (d_model == 0 || n_heads == 0) throw ConfigError("d_model and n_heads must be >= 1");
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (d_ff == 0) throw ConfigError("d_ff must be >= 1");
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  if (vocab_size <= static_cast<std::size_t>(Vocab::kNumSpecial)) {
    throw ConfigError("vocab_size must exceed the number of special tokens");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0,1)");
}

std::string_view to_string(PoolMode mode) { return mode == PoolMode::cls ? "cls" : "max"; }

PoolMode parse_pool_mode(std::string_view text) {
  if (text == "cls" || text == "CLS") return PoolMode::cls;
  if (text == "max" || text == "MAX") return PoolMode::max;
  throw ConfigError("unknown pool mode: " + std::string(text));
}

namespace {

std::string layer_name(std::size_t i, std::string_view suffix) {
  return "layer." + std::to_string(i) + "." + std::string(suffix);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

Parameters allocate(const ModelConfig& cfg) {
  Parameters p;
  const auto d = cfg.d_model;
  p.add_matrix("embeddings.token", cfg.vocab_size, d);
  p.add_matrix("embeddings.position", cfg.max_len, d);
  p.add_matrix("embeddings.segment", 2, d);
  p.add_vector("embeddings.ln.scale", d);
  p.add_vector("embeddings.ln.offset", d);
  for (std::size_t i = 0; i < cfg.n_layers; ++i) {
    for (const char* proj : {"query", "key", "value", "output"}) {
      p.add_matrix(layer_name(i, std::string("attn.") + proj + ".weight"), d, d);
      p.add_vector(layer_name(i, std::string("attn.") + proj + ".bias"), d);
    }
    p.add_vector(layer_name(i, "attn.ln.scale"), d);
    p.add_vector(layer_name(i, "attn.ln.offset"), d);
    p.add_matrix(layer_name(i, "ffn.in.weight"), cfg.d_ff, d);
    p.add_vector(layer_name(i, "ffn.in.bias"), cfg.d_ff);
    p.add_matrix(layer_name(i, "ffn.out.weight"), d, cfg.d_ff);
    p.add_vector(layer_name(i, "ffn.out.bias"), d);
    p.add_vector(layer_name(i, "ffn.ln.scale"), d);
    p.add_vector(layer_name(i, "ffn.ln.offset"), d);
  }
  p.add_matrix("heads.cls.weight", kNumLabels, d);
  p.add_vector("heads.cls.bias", kNumLabels);
  p.add_matrix("heads.mlm.weight", cfg.vocab_size, d);
  p.add_vector("heads.mlm.bias", cfg.vocab_size);
  p.add_matrix("heads.nsp.weight", 1, d);
  p.add_vector("heads.nsp.bias", 1);
  return p;
}

Matrix linear(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix y = x * weight.transpose();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix m(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  }
  return m;
}

void accumulate_linear(Gradients& grads, const std::string& prefix, const Matrix& d_out,
                       const Matrix& input) {
  grads[prefix + ".weight"].noalias() += d_out.transpose() * input;
  grads[prefix + ".bias"].row(0) += d_out.colwise().sum();
}

}  // namespace

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Parameters p = allocate(cfg);
  Rng rng(hash_mix(seed, 0x1417ULL));
  for (auto& [name, t] : p) {
    if (ends_with(name, ".ln.scale")) {
      t.value.setOnes();
    } else if (ends_with(name, ".bias") || ends_with(name, ".ln.offset")) {
      t.value.setZero();
    } else {
      for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = 0.02 * rng.normal();
    }
  }
  return p;
}

void check_parameters(const Parameters& params, const ModelConfig& cfg) {
  cfg.validate();
  if (!params.same_layout(allocate(cfg))) {
    throw ConfigError("parameter tensors do not match the model configuration");
  }
}

namespace nn {

Matrix layer_norm(const Matrix& x, const Matrix& scale, const Matrix& offset,
                  LayerNormCache& cache) {
  const auto rows = x.rows();
  const auto d = static_cast<double>(x.cols());
  cache.normalized.resize(rows, x.cols());
  cache.inv_sigma.resize(rows);
  Matrix y(rows, x.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() / d;
    const double var = (x.row(r).array() - mean).square().sum() / d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    cache.inv_sigma(r) = inv;
    cache.normalized.row(r) = (x.row(r).array() - mean) * inv;
    y.row(r) = cache.normalized.row(r).cwiseProduct(scale.row(0)) + offset.row(0);
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& scale, const LayerNormCache& cache,
                           Matrix& d_scale, Matrix& d_offset) {
  const auto rows = dy.rows();
  const auto d = static_cast<double>(dy.cols());
  d_scale.row(0) += dy.cwiseProduct(cache.normalized).colwise().sum();
  d_offset.row(0) += dy.colwise().sum();
  Matrix dx(rows, dy.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const RowVector dxhat = dy.row(r).cwiseProduct(scale.row(0));
    const double mean_d = dxhat.sum() / d;
    const double mean_dx = dxhat.cwiseProduct(cache.normalized.row(r)).sum() / d;
    dx.row(r) = cache.inv_sigma(r) *
                (dxhat.array() - mean_d - cache.normalized.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace nn

ForwardTrace forward_trace(const Parameters& params, const ModelConfig& cfg, const Encoding& enc,
                           PoolMode pool_mode, bool train_mode, std::uint64_t seed) {
  const std::size_t len = enc.ids.size();
  if (enc.attention_mask.size() != len) throw DataError("attention mask length mismatch");
  if (!enc.segment_ids.empty() && enc.segment_ids.size() != len) {
    throw DataError("segment id length mismatch");
  }
  if (len == 0 || len > cfg.max_len) {
    throw DataError("encoding length " + std::to_string(len) + " exceeds max_len " +
                    std::to_string(cfg.max_len));
  }
  bool any_real = false;
  for (std::size_t t = 0; t < len; ++t) {
    const int id = enc.ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                      std::to_string(cfg.vocab_size));
    }
    any_real = any_real || enc.attention_mask[t] == 1;
  }
  if (!any_real) throw DataError("encoding has no non-padding positions");

  ForwardTrace tr;
  tr.ids = enc.ids;
  tr.segments = enc.segment_ids;
  tr.mask = enc.attention_mask;
  tr.pool_mode = pool_mode;

  const auto L = static_cast<Eigen::Index>(len);
  const auto d = static_cast<Eigen::Index>(cfg.d_model);
  const bool dropout = train_mode && cfg.dropout_rate > 0.0;
  Rng rng(hash_mix(seed, 0xd409ULL));

  const Matrix& tok = params["embeddings.token"];
  const Matrix& pos = params["embeddings.position"];
  const Matrix& seg = params["embeddings.segment"];
  Matrix emb(L, d);
  for (Eigen::Index t = 0; t < L; ++t) {
    emb.row(t) = tok.row(enc.ids[static_cast<std::size_t>(t)]) + pos.row(t);
    if (enc.is_pair()) emb.row(t) += seg.row(enc.segment_ids[static_cast<std::size_t>(t)]);
  }
  Matrix x = nn::layer_norm(emb, params["embeddings.ln.scale"], params["embeddings.ln.offset"],
                            tr.emb_ln);
  if (dropout) {
    tr.emb_dropout = dropout_mask(L, d, cfg.dropout_rate, rng);
    x = x.cwiseProduct(tr.emb_dropout);
  }

  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const auto dk = static_cast<Eigen::Index>(cfg.head_dim());
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  tr.layers.resize(cfg.n_layers);
  for (std::size_t li = 0; li < cfg.n_layers; ++li) {
    LayerTrace& lt = tr.layers[li];
    lt.input = x;
    lt.query = linear(x, params[layer_name(li, "attn.query.weight")], params[layer_name(li, "attn.query.bias")]);
    lt.key = linear(x, params[layer_name(li, "attn.key.weight")], params[layer_name(li, "attn.key.bias")]);
    lt.value = linear(x, params[layer_name(li, "attn.value.weight")], params[layer_name(li, "attn.value.bias")]);
    lt.context.resize(L, d);
    lt.attention.resize(cfg.n_heads);
    for (Eigen::Index h = 0; h < heads; ++h) {
      Matrix scores = lt.query.middleCols(h * dk, dk) * lt.key.middleCols(h * dk, dk).transpose();
      scores *= inv_sqrt_dk;
      Matrix& attn = lt.attention[static_cast<std::size_t>(h)];
      attn = Matrix::Zero(L, L);
      for (Eigen::Index i = 0; i < L; ++i) {
        double row_max = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < L; ++j) {
          if (enc.attention_mask[static_cast<std::size_t>(j)]) row_max = std::max(row_max, scores(i, j));
        }
        double sum = 0.0;
        for (Eigen::Index j = 0; j < L; ++j) {
          if (enc.attention_mask[static_cast<std::size_t>(j)]) {
            attn(i, j) = std::exp(scores(i, j) - row_max);
            sum += attn(i, j);
          }
        }
        attn.row(i) /= sum;
      }
      lt.context.middleCols(h * dk, dk).noalias() = attn * lt.value.middleCols(h * dk, dk);
    }
    Matrix attn_out = linear(lt.context, params[layer_name(li, "attn.output.weight")],
                             params[layer_name(li, "attn.output.bias")]);
    if (dropout) {
      lt.attn_dropout = dropout_mask(L, d, cfg.dropout_rate, rng);
      attn_out = attn_out.cwiseProduct(lt.attn_dropout);
    }
    lt.attn_norm = nn::layer_norm(x + attn_out, params[layer_name(li, "attn.ln.scale")],
                                  params[layer_name(li, "attn.ln.offset")], lt.attn_ln);

    lt.ffn_pre = linear(lt.attn_norm, params[layer_name(li, "ffn.in.weight")],
                        params[layer_name(li, "ffn.in.bias")]);
    lt.ffn_act = lt.ffn_pre.unaryExpr([](double v) { return nn::gelu(v); });
    Matrix ffn_out = linear(lt.ffn_act, params[layer_name(li, "ffn.out.weight")],
                            params[layer_name(li, "ffn.out.bias")]);
    if (dropout) {
      lt.ffn_dropout = dropout_mask(L, d, cfg.dropout_rate, rng);
      ffn_out = ffn_out.cwiseProduct(lt.ffn_dropout);
    }
    x = nn::layer_norm(lt.attn_norm + ffn_out, params[layer_name(li, "ffn.ln.scale")],
                       params[layer_name(li, "ffn.ln.offset")], lt.ffn_ln);
  }
  tr.hidden = std::move(x);

  if (pool_mode == PoolMode::cls) {
    tr.pooled = tr.hidden.row(0);
  } else {
    tr.pooled = RowVector::Constant(d, -std::numeric_limits<double>::infinity());
    tr.max_rows.assign(static_cast<std::size_t>(d), 0);
    for (Eigen::Index t = 0; t < L; ++t) {
      if (!enc.attention_mask[static_cast<std::size_t>(t)]) continue;
      for (Eigen::Index c = 0; c < d; ++c) {
        if (tr.hidden(t, c) > tr.pooled(c)) {
          tr.pooled(c) = tr.hidden(t, c);
          tr.max_rows[static_cast<std::size_t>(c)] = t;
        }
      }
    }
  }

  tr.logits = tr.pooled * params["heads.cls.weight"].transpose() + params["heads.cls.bias"];
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    tr.label_probs[k] = 1.0 / (1.0 + std::exp(-tr.logits(static_cast<Eigen::Index>(k))));
  }
  return tr;
}

ForwardOutput forward(const Parameters& params, const ModelConfig& cfg, const Encoding& enc,
                      PoolMode pool_mode, bool train_mode, std::uint64_t seed) {
  ForwardTrace tr = forward_trace(params, cfg, enc, pool_mode, train_mode, seed);
  ForwardOutput out;
  out.hidden_states = std::move(tr.hidden);
  out.pooled = std::move(tr.pooled);
  out.label_probs = tr.label_probs;
  return out;
}

void backward(const Parameters& params, const ModelConfig& cfg, const ForwardTrace& tr,
              Matrix d_hidden, const RowVector* d_logits, Gradients& grads, double scale) {
  const auto L = tr.hidden.rows();
  const auto d = tr.hidden.cols();
  if (d_hidden.rows() != L || d_hidden.cols() != d) {
    d_hidden = Matrix::Zero(L, d);
  }
  d_hidden *= scale;

  if (d_logits != nullptr) {
    const RowVector dl = *d_logits * scale;
    grads["heads.cls.weight"].noalias() += dl.transpose() * tr.pooled;
    grads["heads.cls.bias"].row(0) += dl;
    const RowVector d_pooled = dl * params["heads.cls.weight"];
    if (tr.pool_mode == PoolMode::cls) {
      d_hidden.row(0) += d_pooled;
    } else {
      for (Eigen::Index c = 0; c < d; ++c) {
        d_hidden(tr.max_rows[static_cast<std::size_t>(c)], c) += d_pooled(c);
      }
    }
  }

  const auto heads = static_cast<Eigen::Index>(cfg.n_heads);
  const auto dk = static_cast<Eigen::Index>(cfg.head_dim());
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Matrix dx = std::move(d_hidden);
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const LayerTrace& lt = tr.layers[li];

    Matrix d_res2 = nn::layer_norm_backward(dx, params[layer_name(li, "ffn.ln.scale")], lt.ffn_ln,
                                            grads[layer_name(li, "ffn.ln.scale")],
                                            grads[layer_name(li, "ffn.ln.offset")]);
    Matrix d_norm1 = d_res2;
    Matrix d_ffn = lt.ffn_dropout.size() ? Matrix(d_res2.cwiseProduct(lt.ffn_dropout)) : d_res2;
    accumulate_linear(grads, layer_name(li, "ffn.out"), d_ffn, lt.ffn_act);
    Matrix d_act = d_ffn * params[layer_name(li, "ffn.out.weight")];
    Matrix d_pre = d_act.cwiseProduct(lt.ffn_pre.unaryExpr([](double v) { return nn::gelu_grad(v); }));
    accumulate_linear(grads, layer_name(li, "ffn.in"), d_pre, lt.attn_norm);
    d_norm1.noalias() += d_pre * params[layer_name(li, "ffn.in.weight")];

    Matrix d_res1 = nn::layer_norm_backward(d_norm1, params[layer_name(li, "attn.ln.scale")],
                                            lt.attn_ln, grads[layer_name(li, "attn.ln.scale")],
                                            grads[layer_name(li, "attn.ln.offset")]);
    Matrix d_input = d_res1;
    Matrix d_attn_out =
        lt.attn_dropout.size() ? Matrix(d_res1.cwiseProduct(lt.attn_dropout)) : d_res1;
    accumulate_linear(grads, layer_name(li, "attn.output"), d_attn_out, lt.context);
    Matrix d_context = d_attn_out * params[layer_name(li, "attn.output.weight")];

    Matrix dq = Matrix::Zero(L, d);
    Matrix dkey = Matrix::Zero(L, d);
    Matrix dv = Matrix::Zero(L, d);
    for (Eigen::Index h = 0; h < heads; ++h) {
      const Matrix& attn = lt.attention[static_cast<std::size_t>(h)];
      const auto d_ctx_h = d_context.middleCols(h * dk, dk);
      Matrix d_attn = d_ctx_h * lt.value.middleCols(h * dk, dk).transpose();
      dv.middleCols(h * dk, dk).noalias() += attn.transpose() * d_ctx_h;
      Matrix d_scores = attn.cwiseProduct(d_attn);
      const Eigen::VectorXd row_dot = d_scores.rowwise().sum();
      d_scores -= (attn.array().colwise() * row_dot.array()).matrix();
      d_scores *= inv_sqrt_dk;
      dq.middleCols(h * dk, dk).noalias() += d_scores * lt.key.middleCols(h * dk, dk);
      dkey.middleCols(h * dk, dk).noalias() += d_scores.transpose() * lt.query.middleCols(h * dk, dk);
    }
    accumulate_linear(grads, layer_name(li, "attn.query"), dq, lt.input);
    accumulate_linear(grads, layer_name(li, "attn.key"), dkey, lt.input);
    accumulate_linear(grads, layer_name(li, "attn.value"), dv, lt.input);
    d_input.noalias() += dq * params[layer_name(li, "attn.query.weight")];
    d_input.noalias() += dkey * params[layer_name(li, "attn.key.weight")];
    d_input.noalias() += dv * params[layer_name(li, "attn.value.weight")];
    dx = std::move(d_input);
  }

  if (tr.emb_dropout.size()) dx = dx.cwiseProduct(tr.emb_dropout);
  Matrix d_emb = nn::layer_norm_backward(dx, params["embeddings.ln.scale"], tr.emb_ln,
                                         grads["embeddings.ln.scale"], grads["embeddings.ln.offset"]);
  Matrix& g_tok = grads["embeddings.token"];
  Matrix& g_pos = grads["embeddings.position"];
  Matrix& g_seg = grads["embeddings.segment"];
  const bool pair = !tr.segments.empty();
  for (Eigen::Index t = 0; t < L; ++t) {
    g_tok.row(tr.ids[static_cast<std::size_t>(t)]) += d_emb.row(t);
    g_pos.row(t) += d_emb.row(t);
    if (pair) g_seg.row(tr.segments[static_cast<std::size_t>(t)]) += d_emb.row(t);
  }
}

double bce_loss(std::span<const double, kNumLabels> probs, LabelSet gold) {
  double total = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double p = std::clamp(probs[k], kProbEpsilon, 1.0 - kProbEpsilon);
    total += gold.test(k) ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(kNumLabels);
}

LabelSet predict_labels(std::span<const double, kNumLabels> probs, double threshold) {
  LabelSet out;
  for (std::size_t k = 0; k < kNumLabels; ++k) out.set(k, probs[k] > threshold);
  return out;
}

double classification_loss_and_grad(const Parameters& params, const ModelConfig& cfg,
                                    const Encoding& enc, LabelSet gold, PoolMode pool_mode,
                                    bool train_mode, std::uint64_t seed, Gradients& grads,
                                    double scale) {
  const ForwardTrace tr = forward_trace(params, cfg, enc, pool_mode, train_mode, seed);
  const double loss = bce_loss(tr.label_probs, gold);
  RowVector d_logits(static_cast<Eigen::Index>(kNumLabels));
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const double p = tr.label_probs[k];
    const bool clamped = p < kProbEpsilon || p > 1.0 - kProbEpsilon;
    const double y = gold.test(k) ? 1.0 : 0.0;
    d_logits(static_cast<Eigen::Index>(k)) = clamped ? 0.0 : (p - y) / static_cast<double>(kNumLabels);
  }
  backward(params, cfg, tr, Matrix(), &d_logits, grads, scale);
  return loss;
}

std::vector<LabelSet> predict_dataset(const Parameters& params, const ModelConfig& cfg,
                                      std::span<const Encoding> encodings, PoolMode pool_mode,
                                      double threshold) {
  std::vector<LabelSet> out;
  out.reserve(encodings.size());
  for (const auto& enc : encodings) {
    const auto tr = forward_trace(params, cfg, enc, pool_mode, false, 0);
    out.push_back(predict_labels(tr.label_probs, threshold));
  }
  return out;
}

std::vector<Encoding> encode_dataset(const Vocab& vocab, const Dataset& dataset,
                                     std::size_t max_len) {
  std::vector<Encoding> out;
  out.reserve(dataset.size());
  for (const auto& e : dataset) out.push_back(encode(vocab, e.text, max_len));
  return out;
}

}  // namespace xlt
