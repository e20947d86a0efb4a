#include "loadcycle/train/adam.hpp"

#include <cmath>

#include "loadcycle/error.hpp"

namespace loadcycle::train {

template <typename T>
AdamState<T> make_adam_state(const std::vector<nn::Parameter<T>>& params) {
  AdamState<T> s;
  for (const auto& p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

template <typename T>
void adam_step(std::vector<nn::Parameter<T>>& params, const nn::GradList<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    fail(ErrorCode::shape_mismatch, "adam state does not match the model");
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    const auto& g = grads[i];
    if (!p.trainable || p.buffer() || g.empty()) continue;
    if (g.size() != p.size() || state.m[i].size() != p.size() || state.v[i].size() != p.size())
      fail(ErrorCode::shape_mismatch, "gradient shape mismatch for " + p.name);
    const double step = lr * p.lr_multiplier;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.values[j] = static_cast<T>(static_cast<double>(p.values[j]) - step * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

template AdamState<float> make_adam_state<float>(const std::vector<nn::Parameter<float>>&);
template AdamState<double> make_adam_state<double>(const std::vector<nn::Parameter<double>>&);
template void adam_step<float>(std::vector<nn::Parameter<float>>&, const nn::GradList<float>&, AdamState<float>&,
                               double, const AdamConfig&);
template void adam_step<double>(std::vector<nn::Parameter<double>>&, const nn::GradList<double>&,
                                AdamState<double>&, double, const AdamConfig&);

}  // namespace loadcycle::train
