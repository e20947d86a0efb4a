#include "loadcycle/nn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "loadcycle/error.hpp"

namespace loadcycle::nn {

template <typename T>
BasicBatch<T> make_batch(const core::WindowSet& set, std::span<const std::size_t> indices) {
  BasicBatch<T> b;
  const int ws = set.ws;
  b.x.reset(static_cast<int>(indices.size()), {ws, core::kNumChannels});
  b.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& w = set.windows.at(indices[i]);
    if (w.values.size() != static_cast<std::size_t>(ws) * core::kNumChannels)
      fail(ErrorCode::shape_mismatch, "window size does not match the set");
    T* dst = b.x.sample(static_cast<int>(i));
    for (int t = 0; t < ws; ++t)
      for (int c = 0; c < core::kNumChannels; ++c)
        dst[t * core::kNumChannels + c] = static_cast<T>(w.values[static_cast<std::size_t>(c * ws + t)]);
    b.y.push_back(core::to_index(w.label));
  }
  return b;
}

template <typename T>
BasicBatch<T> make_batch(const core::WindowSet& set) {
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_batch<T>(set, all);
}

template <typename T>
std::vector<T> softmax(const Activation<T>& logits) {
  const int k = logits.channels;
  std::vector<T> p(logits.data.size());
  for (int s = 0; s < logits.batch; ++s) {
    const T* z = logits.sample(s);
    T* ps = p.data() + static_cast<std::size_t>(s) * k;
    const T zmax = *std::max_element(z, z + k);
    T sum = 0;
    for (int j = 0; j < k; ++j) sum += (ps[j] = std::exp(z[j] - zmax));
    for (int j = 0; j < k; ++j) ps[j] /= sum;
  }
  return p;
}

template <typename T>
std::vector<T> forward(const BasicModel<T>& model, const Activation<T>& x) {
  auto trace = model.network().forward(model.params, x, Phase::inference);
  return softmax(trace.logits());
}

template <typename T>
std::vector<int> predict(const BasicModel<T>& model, const Activation<T>& x) {
  auto trace = model.network().forward(model.params, x, Phase::inference);
  const auto& z = trace.logits();
  std::vector<int> out(static_cast<std::size_t>(z.batch));
  for (int s = 0; s < z.batch; ++s) {
    const T* zs = z.sample(s);
    out[static_cast<std::size_t>(s)] = static_cast<int>(std::max_element(zs, zs + z.channels) - zs);
  }
  return out;
}

void validate(const ClassWeights& weights) {
  for (double w : weights)
    if (!(w > 0.0) || !std::isfinite(w)) fail(ErrorCode::non_positive_weight, "class weights must be positive");
}

namespace {

template <typename T>
double l2_term(const BasicModel<T>& model) {
  double sum = 0.0;
  for (const auto& p : model.params) {
    if (p.role != Role::weight) continue;
    for (T v : p.values) sum += static_cast<double>(v) * static_cast<double>(v);
  }
  return sum;
}

template <typename T>
void check_batch(const BasicModel<T>& model, const BasicBatch<T>& batch) {
  if (batch.x.batch < 1 || batch.y.size() != static_cast<std::size_t>(batch.x.batch))
    fail(ErrorCode::shape_mismatch, "batch labels do not match inputs");
  for (int y : batch.y)
    if (y < 0 || y >= model.spec.n_classes) fail(ErrorCode::shape_mismatch, "label outside the class range");
}

template <typename T>
double cross_entropy(const std::vector<T>& p, const std::vector<int>& y, int k, const ClassWeights& w) {
  double sum = 0.0;
  for (std::size_t s = 0; s < y.size(); ++s) {
    const double py = static_cast<double>(p[s * static_cast<std::size_t>(k) + static_cast<std::size_t>(y[s])]);
    sum += w[static_cast<std::size_t>(y[s])] * -std::log(std::max(py, kLogClamp));
  }
  return sum / static_cast<double>(y.size());
}

}  // namespace

template <typename T>
LossResult<T> loss_and_grads(const BasicModel<T>& model, const BasicBatch<T>& batch, const ClassWeights& weights,
                             double l2_lambda, bool with_grads) {
  validate(weights);
  check_batch(model, batch);
  const auto& net = model.network();
  auto trace = net.forward(model.params, batch.x, Phase::training);
  const int k = trace.logits().channels;
  const auto p = softmax(trace.logits());

  LossResult<T> r;
  r.data_loss = cross_entropy(p, batch.y, k, weights);
  r.loss = r.data_loss + l2_lambda * l2_term(model);
  r.buffer_updates = net.buffer_updates(trace);
  if (!with_grads) return r;

  const int n = batch.x.batch;
  Activation<T> dlogits;
  dlogits.reset(n, {1, k});
  for (int s = 0; s < n; ++s) {
    const auto y = static_cast<std::size_t>(batch.y[static_cast<std::size_t>(s)]);
    const T* ps = p.data() + static_cast<std::size_t>(s) * k;
    // Below the clamp the loss is constant in the logits.
    if (static_cast<double>(ps[y]) < kLogClamp) continue;
    const T scale = static_cast<T>(weights[y] / n);
    T* d = dlogits.sample(s);
    for (int j = 0; j < k; ++j) d[j] = scale * (ps[j] - (static_cast<std::size_t>(j) == y ? T(1) : T(0)));
  }

  r.grads.resize(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    const auto& prm = model.params[i];
    if (prm.trainable && !prm.buffer()) r.grads[i].assign(prm.size(), T(0));
  }
  net.backward(model.params, trace, dlogits, r.grads);
  if (l2_lambda != 0.0) {
    for (std::size_t i = 0; i < model.params.size(); ++i) {
      const auto& prm = model.params[i];
      if (prm.role != Role::weight || r.grads[i].empty()) continue;
      const T c = static_cast<T>(2.0 * l2_lambda);
      for (std::size_t j = 0; j < prm.size(); ++j) r.grads[i][j] += c * prm.values[j];
    }
  }
  return r;
}

template <typename T>
double loss_value(const BasicModel<T>& model, const BasicBatch<T>& batch, const ClassWeights& weights,
                  double l2_lambda, Phase phase) {
  validate(weights);
  check_batch(model, batch);
  auto trace = model.network().forward(model.params, batch.x, phase);
  const auto p = softmax(trace.logits());
  return cross_entropy(p, batch.y, trace.logits().channels, weights) + l2_lambda * l2_term(model);
}

#define LOADCYCLE_INSTANTIATE(T)                                                                              \
  template BasicBatch<T> make_batch<T>(const core::WindowSet&, std::span<const std::size_t>);                 \
  template BasicBatch<T> make_batch<T>(const core::WindowSet&);                                               \
  template std::vector<T> softmax<T>(const Activation<T>&);                                                   \
  template std::vector<T> forward<T>(const BasicModel<T>&, const Activation<T>&);                             \
  template std::vector<int> predict<T>(const BasicModel<T>&, const Activation<T>&);                           \
  template LossResult<T> loss_and_grads<T>(const BasicModel<T>&, const BasicBatch<T>&, const ClassWeights&,   \
                                           double, bool);                                                     \
  template double loss_value<T>(const BasicModel<T>&, const BasicBatch<T>&, const ClassWeights&, double, Phase);

LOADCYCLE_INSTANTIATE(float)
LOADCYCLE_INSTANTIATE(double)
#undef LOADCYCLE_INSTANTIATE

}  // namespace loadcycle::nn
