#include "xlt/projection.hpp"

#include "xlt/errors.hpp"
#include "xlt/random.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace xlt {

namespace {

Matrix squared_distances(const Matrix& x) {
  const Eigen::Index n = x.rows();
  Matrix d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = (x.row(i) - x.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

// Entropy (nats) and row of p_{j|i} for precision beta on shifted distances.
double row_entropy(const Matrix& d, Eigen::Index i, double beta, double dmin, Eigen::Ref<RowVector> row) {
  double sum = 0.0;
  double weighted = 0.0;
  for (Eigen::Index j = 0; j < d.cols(); ++j) {
    if (j == i) {
      row(j) = 0.0;
      continue;
    }
    const double shifted = d(i, j) - dmin;
    const double p = std::exp(-beta * shifted);
    row(j) = p;
    sum += p;
    weighted += shifted * p;
  }
  row /= sum;
  return std::log(sum) + beta * weighted / sum;
}

void jitter_duplicates(Matrix& x, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) scale = std::max(scale, std::abs(x.data()[i]));
  const double eps = 1e-6 * std::max(scale, 1.0);
  Rng rng(hash_mix(seed, 0x7177e5ULL));
  for (int round = 0; round < 8; ++round) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) {
        if ((x.row(i) - x.row(j)).squaredNorm() == 0.0) {
          for (Eigen::Index c = 0; c < x.cols(); ++c) x(j, c) += eps * rng.normal();
          changed = true;
        }
      }
    }
    if (!changed) return;
  }
}

}  // namespace

PcaResult pca(const Matrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (n < 2) throw DataError("pca needs at least 2 rows");
  if (k < 1 || k > std::min(n - 1, d)) {
    throw ConfigError("pca target dimension " + std::to_string(k) + " outside [1, " +
                      std::to_string(std::min(n - 1, d)) + "]");
  }
  PcaResult r;
  r.mean = x.colwise().mean();
  Matrix centered = x.rowwise() - r.mean;
  if (centered.squaredNorm() == 0.0) throw DataError("pca input has zero variance");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(centered), Eigen::ComputeThinV);
  const auto& v = svd.matrixV();
  const auto& s = svd.singularValues();
  r.components.resize(static_cast<Eigen::Index>(k), x.cols());
  r.explained_variance.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const auto ci = static_cast<Eigen::Index>(c);
    RowVector comp = v.col(ci).transpose();
    Eigen::Index arg = 0;
    comp.cwiseAbs().maxCoeff(&arg);
    if (comp(arg) < 0.0) comp = -comp;
    r.components.row(ci) = comp;
    r.explained_variance[c] = s(ci) * s(ci) / static_cast<double>(n);
  }
  r.projected = centered * r.components.transpose();
  return r;
}

Affinities conditional_affinities(const Matrix& x, double perplexity, double entropy_tolerance) {
  const Eigen::Index n = x.rows();
  if (perplexity < 2.0) throw ConfigError("perplexity must be at least 2");
  if (static_cast<double>(n) < 3.0 * perplexity) {
    throw ConfigError("perplexity " + std::to_string(perplexity) + " infeasible for " +
                      std::to_string(n) + " points (need n >= 3 * perplexity)");
  }
  const Matrix d = squared_distances(x);
  const double target = std::log(perplexity);
  Affinities a;
  a.conditional = Matrix::Zero(n, n);
  a.beta.assign(static_cast<std::size_t>(n), 1.0);
  a.perplexity.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, d(i, j));
    }
    double beta = 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    auto row = a.conditional.row(i);
    double h = row_entropy(d, i, beta, dmin, row);
    for (int it = 0; it < 500 && std::abs(h - target) > entropy_tolerance; ++it) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = row_entropy(d, i, beta, dmin, row);
    }
    a.beta[static_cast<std::size_t>(i)] = beta;
    a.perplexity[static_cast<std::size_t>(i)] = std::exp(h);
  }
  return a;
}

Matrix joint_affinities(const Matrix& conditional) {
  const auto n = static_cast<double>(conditional.rows());
  Matrix p = (conditional + conditional.transpose()) / (2.0 * n);
  return p;
}

ProjectionResult tsne(const Matrix& input, const TsneConfig& config) {
  const Eigen::Index n = input.rows();
  Matrix x = input;
  jitter_duplicates(x, config.seed);
  const Matrix p = joint_affinities(conditional_affinities(x, config.perplexity, config.entropy_tolerance).conditional);
  constexpr double kTiny = 1e-12;

  Rng rng(hash_mix(config.seed, 0x75e3ULL));
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 1e-4 * rng.normal();
  Matrix update = Matrix::Zero(n, 2);
  Matrix gains = Matrix::Ones(n, 2);
  Matrix num(n, n);
  Matrix grad(n, 2);

  ProjectionResult r;
  r.perplexity = config.perplexity;
  for (std::size_t iter = 1; iter <= config.iterations; ++iter) {
    const bool exaggerate = iter <= config.exaggeration_iters;
    const double mom = iter <= config.momentum_switch_iter ? config.momentum : config.final_momentum;
    double zsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      num(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        const double v = 1.0 / (1.0 + dx * dx + dy * dy);
        num(i, j) = v;
        num(j, i) = v;
        zsum += 2.0 * v;
      }
    }
    const double scale = exaggerate ? config.exaggeration : 1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double gx = 0.0;
      double gy = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double q = std::max(num(i, j) / zsum, kTiny);
        const double m = (scale * p(i, j) - q) * num(i, j);
        gx += m * (y(i, 0) - y(j, 0));
        gy += m * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
    for (Eigen::Index i = 0; i < grad.size(); ++i) {
      double& g = gains.data()[i];
      const double gr = grad.data()[i];
      const double up = update.data()[i];
      g = ((gr > 0.0) != (up > 0.0)) ? g + 0.2 : g * 0.8;
      g = std::max(g, 0.01);
      update.data()[i] = mom * up - config.learning_rate * g * gr;
      y.data()[i] += update.data()[i];
    }
    const RowVector centre = y.colwise().mean();
    y.rowwise() -= centre;

    if (config.kl_every > 0 && (iter % config.kl_every == 0 || iter == config.iterations)) {
      double kl = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i || p(i, j) <= 0.0) continue;
          const double dx = y(i, 0) - y(j, 0);
          const double dy = y(i, 1) - y(j, 1);
          num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
        }
      }
      double z = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i) continue;
          const double dx = y(i, 0) - y(j, 0);
          const double dy = y(i, 1) - y(j, 1);
          z += 1.0 / (1.0 + dx * dx + dy * dy);
        }
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i || p(i, j) <= 0.0) continue;
          const double q = std::max(num(i, j) / z, kTiny);
          kl += p(i, j) * std::log(p(i, j) / q);
        }
      }
      if (r.kl_trace.empty() || r.kl_trace.back().iteration != iter) r.kl_trace.push_back({iter, kl});
    }
  }
  r.coords = y;
  return r;
}

ProjectionResult project_corpus(const Parameters& params, const ModelConfig& cfg, const Vocab& vocab,
                                std::span<const Dataset> by_language, std::size_t n_links,
                                const TsneConfig& config) {
  if (by_language.empty()) throw DataError("project_corpus needs at least one dataset");
  std::set<std::string> langs;
  std::vector<std::string> ids;
  std::vector<std::string> point_langs;
  std::vector<std::unordered_map<std::string, std::size_t>> index(by_language.size());
  std::vector<RowVector> rows;
  for (std::size_t li = 0; li < by_language.size(); ++li) {
    const Dataset& ds = by_language[li];
    if (ds.empty()) throw DataError("project_corpus: empty dataset at position " + std::to_string(li));
    const std::string& lang = ds.examples().front().lang;
    if (!langs.insert(lang).second) throw DataError("project_corpus: language '" + lang + "' given twice");
    for (const auto& ex : ds.examples()) {
      const Encoding enc = encode(vocab, ex.text, cfg.max_len);
      const ForwardOutput out = forward(params, cfg, enc, PoolMode::max, false, 0);
      index[li].emplace(ex.id, rows.size());
      rows.push_back(out.pooled);
      ids.push_back(ex.id);
      point_langs.push_back(ex.lang);
    }
  }

  ProjectionResult r;
  for (const auto& ds : by_language) r.link_langs.push_back(ds.examples().front().lang);
  const auto& first = by_language.front().examples();
  if (n_links > first.size()) throw DataError("more links requested than examples in the first dataset");
  for (std::size_t i = 0; i < n_links; ++i) {
    std::vector<std::string> link;
    for (std::size_t li = 0; li < by_language.size(); ++li) {
      if (!index[li].contains(first[i].id)) {
        throw DataError("id '" + first[i].id + "' has no counterpart in language '" + r.link_langs[li] + "'");
      }
      link.push_back(first[i].id);
    }
    r.links.push_back(std::move(link));
  }

  const auto n = rows.size();
  Matrix x(static_cast<Eigen::Index>(n), cfg.d_model);
  for (std::size_t i = 0; i < n; ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i];
  const std::size_t k = std::min<std::size_t>({50, cfg.d_model, n - 1});
  const PcaResult reduced = pca(x, k);
  TsneConfig tc = config;
  tc.perplexity = std::min(config.perplexity, static_cast<double>(n - 1) / 3.0);
  // Early exaggeration oscillates once lr * exaggeration is large relative to n.
  tc.learning_rate = std::min(config.learning_rate,
                              std::max(static_cast<double>(n) / std::max(config.exaggeration, 1.0), 1.0));
  ProjectionResult t = tsne(reduced.projected, tc);
  r.coords = std::move(t.coords);
  r.kl_trace = std::move(t.kl_trace);
  r.perplexity = tc.perplexity;
  r.pca_dims = k;
  r.ids = std::move(ids);
  r.langs = std::move(point_langs);
  return r;
}

std::string points_csv(const ProjectionResult& r) {
  std::ostringstream os;
  os.precision(17);
  os << "id,lang,x,y\n";
  for (std::size_t i = 0; i < r.ids.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    os << r.ids[i] << ',' << r.langs[i] << ',' << r.coords(ii, 0) << ',' << r.coords(ii, 1) << '\n';
  }
  return os.str();
}

std::string links_csv(const ProjectionResult& r) {
  std::ostringstream os;
  for (std::size_t i = 0; i < r.link_langs.size(); ++i) os << (i ? "," : "") << "id_" << r.link_langs[i];
  os << '\n';
  for (const auto& link : r.links) {
    for (std::size_t i = 0; i < link.size(); ++i) os << (i ? "," : "") << link[i];
    os << '\n';
  }
  return os.str();
}

void write_projection(const ProjectionResult& result, const std::filesystem::path& points_path,
                      const std::filesystem::path& links_path) {
  for (const auto& path : {points_path, links_path}) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream p(points_path, std::ios::binary);
  std::ofstream l(links_path, std::ios::binary);
  if (!p || !l) throw DataError("cannot open projection output files");
  p << points_csv(result);
  l << links_csv(result);
}

}  // namespace xlt
