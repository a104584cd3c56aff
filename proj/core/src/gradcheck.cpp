#include "xlt/errors.hpp"
#include "xlt/optim.hpp"
#include "xlt/pretrain.hpp"
#include "xlt/random.hpp"

#include <algorithm>
#include <cmath>

namespace xlt {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

double gradcheck_loss(const Parameters& params, const ModelConfig& cfg,
                      const GradcheckSample& sample, Gradients* grads) {
  const ForwardTrace tr = forward_trace(params, cfg, sample.input, sample.pool_mode, false, 0);
  double loss = bce_loss(tr.label_probs, sample.gold);

  Matrix d_hidden;
  const double mlm_weight =
      sample.mlm_targets.empty() ? 0.0 : 1.0 / static_cast<double>(sample.mlm_targets.size());
  const HeadLoss hl = pretrain_heads(params, tr, sample.mlm_targets, sample.is_next, mlm_weight,
                                     1.0, d_hidden, grads);
  loss += hl.mlm + hl.nsp;

  if (grads != nullptr) {
    RowVector d_logits(static_cast<Eigen::Index>(kNumLabels));
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      const double p = tr.label_probs[k];
      const bool clamped = p < kProbEpsilon || p > 1.0 - kProbEpsilon;
      d_logits(static_cast<Eigen::Index>(k)) =
          clamped ? 0.0 : (p - (sample.gold.test(k) ? 1.0 : 0.0)) / static_cast<double>(kNumLabels);
    }
    backward(params, cfg, tr, std::move(d_hidden), &d_logits, *grads, 1.0);
  }
  return loss;
}

GradcheckReport gradcheck(const Parameters& params, const ModelConfig& cfg_in,
                          const GradcheckSample& sample, const GradcheckOptions& options) {
  ModelConfig cfg = cfg_in;
  cfg.dropout_rate = 0.0;
  check_parameters(params, cfg);

  Gradients analytic = params.zeros_like();
  gradcheck_loss(params, cfg, sample, &analytic);
  if (!options.corrupt_tensor.empty()) {
    analytic[options.corrupt_tensor] *= options.corrupt_factor;
    // A zero gradient stays zero under scaling; shift it as well.
    analytic[options.corrupt_tensor].array() += 1e-3;
  }

  // Spread the coordinate budget evenly so every tensor is covered.
  const std::size_t n_tensors = params.size();
  const std::size_t per_tensor =
      std::max<std::size_t>(1, (options.min_coordinates + n_tensors - 1) / n_tensors);
  Rng rng(hash_mix(options.seed, 0x6c4eULL));
  Parameters probe = params;

  GradcheckReport report;
  for (const auto& [name, t] : params) {
    TensorError te;
    te.name = name;
    const std::size_t numel = t.numel();
    std::vector<std::size_t> coords;
    if (numel <= per_tensor) {
      for (std::size_t i = 0; i < numel; ++i) coords.push_back(i);
    } else {
      while (coords.size() < per_tensor) {
        const auto c = static_cast<std::size_t>(rng.uniform_int(numel));
        if (std::find(coords.begin(), coords.end(), c) == coords.end()) coords.push_back(c);
      }
    }
    double* value = probe.tensor(name).data();
    for (auto c : coords) {
      const double saved = value[c];
      value[c] = saved + options.step;
      const double up = gradcheck_loss(probe, cfg, sample, nullptr);
      value[c] = saved - options.step;
      const double down = gradcheck_loss(probe, cfg, sample, nullptr);
      value[c] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic.tensor(name).data()[c], numeric);
      te.max_rel_error = std::max(te.max_rel_error, err);
      ++te.coordinates;
    }
    report.coordinates += te.coordinates;
    if (te.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = te.max_rel_error;
      report.worst_tensor = name;
    }
    report.per_tensor.push_back(std::move(te));
  }
  return report;
}

}  // namespace xlt
