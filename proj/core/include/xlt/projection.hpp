#pragma once

#include "xlt/corpus.hpp"
#include "xlt/model.hpp"
#include "xlt/tensor.hpp"
#include "xlt/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace xlt {

struct PcaResult {
  Matrix components;                     // k x d, orthonormal rows
  Matrix projected;                      // n x k
  std::vector<double> explained_variance;  // population variance (divide by n)
  RowVector mean;                        // d
};

/// Top-k principal components via SVD of the centered matrix. Each
/// component's largest-magnitude entry is positive.
PcaResult pca(const Matrix& x, std::size_t k);

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  double exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  std::size_t kl_every = 50;
  double entropy_tolerance = 1e-5;  // nats
  std::uint64_t seed = 0;
};

struct KlPoint {
  std::size_t iteration = 0;
  double kl = 0.0;
};

struct Affinities {
  Matrix conditional;  // row i holds p_{j|i}
  std::vector<double> beta;
  std::vector<double> perplexity;  // achieved exp(H_i)
};

/// Per-point Gaussian bandwidths by bisection on the precision so that the
/// entropy of each row matches log(perplexity).
Affinities conditional_affinities(const Matrix& x, double perplexity, double entropy_tolerance = 1e-5);

/// (P + P^T) / 2n from conditional affinities.
Matrix joint_affinities(const Matrix& conditional);

struct ProjectionResult {
  Matrix coords;  // n x 2
  std::vector<std::string> ids;
  std::vector<std::string> langs;
  std::vector<std::string> link_langs;          // column order of links
  std::vector<std::vector<std::string>> links;  // one id per link language
  std::vector<KlPoint> kl_trace;
  double perplexity = 0.0;
  std::size_t pca_dims = 0;
};

/// Exact t-SNE to 2 dimensions. Duplicate rows are separated by a tiny
/// deterministic jitter.
ProjectionResult tsne(const Matrix& x, const TsneConfig& config);

/// Max-pooled final-layer encodings of every example, then PCA to
/// min(50, d, n - 1) dimensions and t-SNE. The first n_links ids of the first
/// dataset are linked across all datasets. Perplexity is lowered to
/// (n - 1) / 3 when the configured value is infeasible for n, and the
/// learning rate is capped at n / exaggeration.
ProjectionResult project_corpus(const Parameters& params, const ModelConfig& cfg, const Vocab& vocab,
                                std::span<const Dataset> by_language, std::size_t n_links,
                                const TsneConfig& config = {});

std::string points_csv(const ProjectionResult& result);
std::string links_csv(const ProjectionResult& result);
void write_projection(const ProjectionResult& result, const std::filesystem::path& points_path,
                      const std::filesystem::path& links_path);

}  // namespace xlt
