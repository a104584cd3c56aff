#include "xlt/errors.hpp"
#include "xlt/optim.hpp"

#include <cmath>

namespace xlt {

void adam_step(Parameters& params, const Gradients& grads, AdamState& state, double lr,
               const AdamConfig& cfg, const std::vector<std::string>& frozen_prefixes) {
  if (!state.m.same_layout(params) || !state.v.same_layout(params)) {
    state = AdamState(params);
  }
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw TrainingError("gradient for unknown tensor " + name);
    if (has_prefix(name, frozen_prefixes)) continue;
    if (!g.value.allFinite()) throw TrainingError("non-finite gradient in tensor " + name);
  }

  state.step += 1;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);

  for (auto& [name, p] : params) {
    if (!grads.contains(name) || has_prefix(name, frozen_prefixes)) continue;
    const double* g = grads.tensor(name).data();
    double* m = state.m.tensor(name).data();
    double* v = state.v.tensor(name).data();
    double* theta = p.data();
    const std::size_t n = p.numel();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      if (cfg.weight_decay > 0.0) theta[i] -= lr * cfg.weight_decay * theta[i];
    }
  }
}

}  // namespace xlt
