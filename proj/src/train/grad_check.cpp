#include "loadcycle/train/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "loadcycle/nn/network.hpp"

namespace loadcycle::train {

double relative_error(double a, double n) {
  const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
  return std::abs(a - n) / denom;
}

namespace {

struct Probe {
  double loss;
  std::vector<std::uint8_t> kinks;
};

Probe probe(const nn::Model64& m, const nn::Batch64& b, const GradCheckOptions& opt) {
  const auto& net = m.network();
  auto trace = net.forward(m.params, b.x, nn::Phase::training);
  Probe p;
  p.kinks = net.kink_signature(trace);
  p.loss = nn::loss_value(m, b, opt.class_weights, opt.l2_lambda, nn::Phase::training);
  return p;
}

}  // namespace

GradCheckResult grad_check(const nn::Model64& model, const nn::Batch64& batch, const GradCheckOptions& opt) {
  const auto analytic = nn::loss_and_grads(model, batch, opt.class_weights, opt.l2_lambda);
  const auto base_kinks = probe(model, batch, opt).kinks;
  nn::Model64 work = model;
  GradCheckResult r;
  for (std::size_t i = 0; i < work.params.size(); ++i) {
    if (analytic.grads[i].empty()) continue;
    auto& values = work.params[i].values;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      const double a = analytic.grads[i][j];
      bool measured = false;
      double numeric = 0.0;
      // Shrink the step until no probe flips a ReLU mask.
      for (double eps = opt.eps; eps >= opt.eps / 64.0 && !measured; eps /= 4.0) {
        const int reach = opt.order == 4 ? 2 : 1;
        double f[5] = {};
        bool kinked = false;
        for (int k = -reach; k <= reach && !kinked; ++k) {
          if (k == 0) continue;
          values[j] = saved + k * eps;
          const auto pr = probe(work, batch, opt);
          kinked = pr.kinks != base_kinks;
          f[k + 2] = pr.loss;
        }
        values[j] = saved;
        if (kinked) continue;
        numeric = opt.order == 4 ? (8.0 * (f[3] - f[1]) - (f[4] - f[0])) / (12.0 * eps)
                                 : (f[3] - f[1]) / (2.0 * eps);
        measured = true;
      }
      if (!measured) {
        ++r.n_kink_skipped;
        continue;
      }
      ++r.n_checked;
      const double err = relative_error(a, numeric);
      if (err > r.max_rel_error) {
        r.max_rel_error = err;
        r.worst_tensor = work.params[i].name;
      }
    }
  }
  return r;
}

GradCheckResult grad_check(const nn::ModelSpec& spec, std::uint64_t seed, const GradCheckOptions& opt) {
  const nn::ModelSpec s = opt.reduce_width ? spec.reduced() : spec;
  auto model = nn::build_model<double>(s, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, s.n_classes - 1);
  nn::Batch64 batch;
  batch.x.reset(opt.batch, {s.ws, s.in_channels});
  for (auto& v : batch.x.data) v = normal(rng);
  for (int b = 0; b < opt.batch; ++b) batch.y.push_back(label(rng));
  // Non-zero biases so no unit sits exactly at a kink.
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  for (auto& p : model.params)
    if (p.role == nn::Role::bias || p.role == nn::Role::shift)
      for (auto& v : p.values) v = small(rng);
  return grad_check(model, batch, opt);
}

}  // namespace loadcycle::train
