#include "loadcycle/nn/layers.hpp"

#include <cmath>
#include <cstring>

#include "kernels_impl.hpp"
#include "loadcycle/error.hpp"
#include "loadcycle/nn/parallel.hpp"

namespace loadcycle::nn {

namespace {

using std::size_t;

template <typename T>
const T* values(ParamSpan<T> p, int idx) {
  return p[static_cast<size_t>(idx)].values.data();
}

template <typename T>
bool wants(const GradList<T>& g, int idx) {
  return !g[static_cast<size_t>(idx)].empty();
}

// Concatenates the requested gradient buffers of a layer into one flat
// accumulator so a single chunked reduction covers all of them.
template <typename T>
class GradPack {
 public:
  GradPack(GradList<T>& grads, std::initializer_list<std::pair<int, size_t>> entries) : grads_(grads) {
    for (auto [idx, size] : entries) {
      offsets_.push_back(wants(grads, idx) ? width_ : kAbsent);
      if (wants(grads, idx)) {
        indices_.push_back(idx);
        width_ += size;
      }
    }
    flat_.assign(width_, T(0));
  }

  static constexpr size_t kAbsent = static_cast<size_t>(-1);

  size_t width() const { return width_; }
  T* data() { return flat_.data(); }
  // Slot k in declaration order, or nullptr when that gradient is not wanted.
  static T* slot(T* acc, const std::vector<size_t>& offsets, size_t k) {
    return offsets[k] == kAbsent ? nullptr : acc + offsets[k];
  }
  const std::vector<size_t>& offsets() const { return offsets_; }

  void scatter() {
    size_t pos = 0;
    for (int idx : indices_) {
      auto& g = grads_[static_cast<size_t>(idx)];
      for (auto& v : g) v += flat_[pos++];
    }
  }

 private:
  GradList<T>& grads_;
  std::vector<size_t> offsets_;
  std::vector<int> indices_;
  size_t width_ = 0;
  std::vector<T> flat_;
};

}  // namespace

// ---------------------------------------------------------------- Conv1D

template <typename T>
void Conv1D<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>&, Phase) const {
  if (in.channels != in_) fail(ErrorCode::shape_mismatch, "conv1d input channels mismatch");
  out.reset(in.batch, out_dims(in.dims()));
  const T* w = values(p, w_);
  const T* b = values(p, b_);
  LOADCYCLE_PARALLEL_FOR
  for (int s = 0; s < in.batch; ++s) {
    detail::conv_same(in.sample(s), in.steps, in_, w, b, filters_, kernel_, out.sample(s));
  }
}

template <typename T>
void Conv1D<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                         const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const {
  const size_t wsize = static_cast<size_t>(filters_) * kernel_ * in_;
  GradPack<T> pack(grads, {{w_, wsize}, {b_, static_cast<size_t>(filters_)}});
  if (din) din->reset(in.batch, in.dims());
  const T* w = values(p, w_);
  const int steps = in.steps;
  const int pad_left = (kernel_ - 1) / 2;
  const auto& offs = pack.offsets();
  reduce_over_batch<T>(in.batch, pack.width(), pack.data(), [&](int s, T* acc) {
    T* dw = GradPack<T>::slot(acc, offs, 0);
    T* db = GradPack<T>::slot(acc, offs, 1);
    const T* x = in.sample(s);
    const T* dy = dout.sample(s);
    T* dx = din ? din->sample(s) : nullptr;
    for (int t = 0; t < steps; ++t) {
      const T* dyt = dy + static_cast<size_t>(t) * filters_;
      if (db)
        for (int f = 0; f < filters_; ++f) db[f] += dyt[f];
      for (int k = 0; k < kernel_; ++k) {
        const int src = t + k - pad_left;
        if (src < 0 || src >= steps) continue;
        const T* xs = x + static_cast<size_t>(src) * in_;
        T* dxs = dx ? dx + static_cast<size_t>(src) * in_ : nullptr;
        for (int f = 0; f < filters_; ++f) {
          const T g = dyt[f];
          const size_t off = (static_cast<size_t>(f) * kernel_ + k) * in_;
          if (dw)
            for (int c = 0; c < in_; ++c) dw[off + c] += g * xs[c];
          if (dxs)
            for (int c = 0; c < in_; ++c) dxs[c] += g * w[off + c];
        }
      }
    }
  });
  pack.scatter();
}

// ---------------------------------------------------------------- ReLU

template <typename T>
void Relu<T>::forward(ParamSpan<T>, const Activation<T>& in, Activation<T>& out, LayerCache<T>&, Phase) const {
  out.reset(in.batch, in.dims());
  const size_t n = in.data.size();
  for (size_t i = 0; i < n; ++i) out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
}

template <typename T>
void Relu<T>::backward(ParamSpan<T>, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                       const Activation<T>& dout, Activation<T>* din, GradList<T>&) const {
  if (!din) return;
  din->reset(in.batch, in.dims());
  const size_t n = in.data.size();
  for (size_t i = 0; i < n; ++i) din->data[i] = in.data[i] > T(0) ? dout.data[i] : T(0);
}

template <typename T>
void Relu<T>::kink_signature(const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                             std::vector<std::uint8_t>& sig) const {
  for (T v : in.data) sig.push_back(v > T(0) ? 1 : 0);
}

// ---------------------------------------------------------------- Dense

template <typename T>
void Dense<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>&, Phase) const {
  if (in.sample_size() != static_cast<size_t>(in_)) fail(ErrorCode::shape_mismatch, "dense input size mismatch");
  out.reset(in.batch, {1, out_});
  const T* w = values(p, w_);
  const T* b = values(p, b_);
  LOADCYCLE_PARALLEL_FOR
  for (int s = 0; s < in.batch; ++s) {
    const T* x = in.sample(s);
    T* y = out.sample(s);
    for (int o = 0; o < out_; ++o) {
      const T* wo = w + static_cast<size_t>(o) * in_;
      T acc = b[o];
      for (int i = 0; i < in_; ++i) acc += wo[i] * x[i];
      y[o] = acc;
    }
  }
}

template <typename T>
void Dense<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                        const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const {
  GradPack<T> pack(grads, {{w_, static_cast<size_t>(out_) * in_}, {b_, static_cast<size_t>(out_)}});
  if (din) din->reset(in.batch, in.dims());
  const T* w = values(p, w_);
  const auto& offs = pack.offsets();
  reduce_over_batch<T>(in.batch, pack.width(), pack.data(), [&](int s, T* acc) {
    T* dw = GradPack<T>::slot(acc, offs, 0);
    T* db = GradPack<T>::slot(acc, offs, 1);
    const T* x = in.sample(s);
    const T* dy = dout.sample(s);
    T* dx = din ? din->sample(s) : nullptr;
    for (int o = 0; o < out_; ++o) {
      const T g = dy[o];
      const size_t off = static_cast<size_t>(o) * in_;
      if (db) db[o] += g;
      if (dw)
        for (int i = 0; i < in_; ++i) dw[off + i] += g * x[i];
      if (dx)
        for (int i = 0; i < in_; ++i) dx[i] += g * w[off + i];
    }
  });
  pack.scatter();
}

// ---------------------------------------------------------------- LSTM
//
// Cache a: per sample, per processed step: gates (4u) | c (u) | tanh c (u) | h (u).

template <typename T>
void Lstm<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                      Phase) const {
  if (in.channels != in_) fail(ErrorCode::shape_mismatch, "lstm input size mismatch");
  const int steps = in.steps;
  const int u = units_;
  const size_t per_step = 7 * static_cast<size_t>(u);
  const size_t per_sample = per_step * steps;
  cache.a.assign(per_sample * in.batch, T(0));
  out.reset(in.batch, out_dims(in.dims()));
  const T* wx = values(p, wx_);
  const T* wh = values(p, wh_);
  const T* b = values(p, b_);
  LOADCYCLE_PARALLEL_FOR
  for (int s = 0; s < in.batch; ++s) {
    std::vector<T> zeros(static_cast<size_t>(u), T(0));
    const T* h_prev = zeros.data();
    const T* c_prev = zeros.data();
    T* base = cache.a.data() + per_sample * s;
    for (int k = 0; k < steps; ++k) {
      const int t = reverse_ ? steps - 1 - k : k;
      T* slot = base + per_step * k;
      T* gates = slot;
      T* c = slot + 4 * u;
      T* tc = slot + 5 * u;
      T* h = slot + 6 * u;
      detail::lstm_step(in.sample(s) + static_cast<size_t>(t) * in_, h_prev, c_prev, wx, wh, b, in_, u, gates, c, tc,
                        h);
      if (return_sequences_) std::memcpy(out.sample(s) + static_cast<size_t>(t) * u, h, sizeof(T) * u);
      h_prev = h;
      c_prev = c;
    }
    if (!return_sequences_) std::memcpy(out.sample(s), h_prev, sizeof(T) * u);
  }
}

template <typename T>
void Lstm<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&, const LayerCache<T>& cache,
                       const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const {
  const int steps = in.steps;
  const int u = units_;
  const int rows = 4 * u;
  const size_t per_step = 7 * static_cast<size_t>(u);
  const size_t per_sample = per_step * steps;
  GradPack<T> pack(grads, {{wx_, static_cast<size_t>(rows) * in_},
                           {wh_, static_cast<size_t>(rows) * u},
                           {b_, static_cast<size_t>(rows)}});
  if (din) din->reset(in.batch, in.dims());
  const T* wx = values(p, wx_);
  const T* wh = values(p, wh_);
  const auto& offs = pack.offsets();

  reduce_over_batch<T>(in.batch, pack.width(), pack.data(), [&](int s, T* acc) {
    T* dwx = GradPack<T>::slot(acc, offs, 0);
    T* dwh = GradPack<T>::slot(acc, offs, 1);
    T* db = GradPack<T>::slot(acc, offs, 2);
    std::vector<T> dh(static_cast<size_t>(u), T(0)), dc(static_cast<size_t>(u), T(0));
    std::vector<T> dz(static_cast<size_t>(rows));
    std::vector<T> zeros(static_cast<size_t>(u), T(0));
    const T* base = cache.a.data() + per_sample * s;
    const T* dy = dout.sample(s);
    if (!return_sequences_)
      for (int j = 0; j < u; ++j) dh[j] = dy[j];
    for (int k = steps - 1; k >= 0; --k) {
      const int t = reverse_ ? steps - 1 - k : k;
      const T* slot = base + per_step * k;
      const T* gi = slot;
      const T* gf = slot + u;
      const T* gg = slot + 2 * u;
      const T* go = slot + 3 * u;
      const T* tc = slot + 5 * u;
      const T* c_prev = k > 0 ? base + per_step * (k - 1) + 4 * u : zeros.data();
      const T* h_prev = k > 0 ? base + per_step * (k - 1) + 6 * u : zeros.data();
      if (return_sequences_) {
        const T* dyt = dy + static_cast<size_t>(t) * u;
        for (int j = 0; j < u; ++j) dh[j] += dyt[j];
      }
      for (int j = 0; j < u; ++j) {
        const T dcj = dc[j] + dh[j] * go[j] * (T(1) - tc[j] * tc[j]);
        dz[j] = dcj * gg[j] * gi[j] * (T(1) - gi[j]);
        dz[u + j] = dcj * c_prev[j] * gf[j] * (T(1) - gf[j]);
        dz[2 * u + j] = dcj * gi[j] * (T(1) - gg[j] * gg[j]);
        dz[3 * u + j] = dh[j] * tc[j] * go[j] * (T(1) - go[j]);
        dc[j] = dcj * gf[j];
      }
      const T* x = in.sample(s) + static_cast<size_t>(t) * in_;
      T* dx = din ? din->sample(s) + static_cast<size_t>(t) * in_ : nullptr;
      std::fill(dh.begin(), dh.end(), T(0));
      for (int r = 0; r < rows; ++r) {
        const T g = dz[r];
        const size_t ox = static_cast<size_t>(r) * in_;
        const size_t oh = static_cast<size_t>(r) * u;
        if (db) db[r] += g;
        if (dwx)
          for (int j = 0; j < in_; ++j) dwx[ox + j] += g * x[j];
        if (dwh)
          for (int j = 0; j < u; ++j) dwh[oh + j] += g * h_prev[j];
        if (dx)
          for (int j = 0; j < in_; ++j) dx[j] += g * wx[ox + j];
        for (int j = 0; j < u; ++j) dh[j] += g * wh[oh + j];
      }
    }
  });
  pack.scatter();
}

// ---------------------------------------------------------------- Bidirectional

template <typename T>
Dims Bidirectional<T>::out_dims(Dims in) const {
  const Dims f = fwd_->out_dims(in);
  const Dims b = bwd_->out_dims(in);
  return {f.steps, f.channels + b.channels};
}

template <typename T>
void Bidirectional<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                               Phase phase) const {
  cache.children.resize(2);
  cache.acts.resize(2);
  fwd_->forward(p, in, cache.acts[0], cache.children[0], phase);
  bwd_->forward(p, in, cache.acts[1], cache.children[1], phase);
  const auto& a = cache.acts[0];
  const auto& b = cache.acts[1];
  out.reset(in.batch, out_dims(in.dims()));
  for (int s = 0; s < in.batch; ++s) {
    for (int t = 0; t < a.steps; ++t) {
      T* o = out.sample(s) + static_cast<size_t>(t) * out.channels;
      std::memcpy(o, a.sample(s) + static_cast<size_t>(t) * a.channels, sizeof(T) * a.channels);
      std::memcpy(o + a.channels, b.sample(s) + static_cast<size_t>(t) * b.channels, sizeof(T) * b.channels);
    }
  }
}

template <typename T>
void Bidirectional<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&,
                                const LayerCache<T>& cache, const Activation<T>& dout, Activation<T>* din,
                                GradList<T>& grads) const {
  const auto& a = cache.acts[0];
  const auto& b = cache.acts[1];
  Activation<T> da, dbk;
  da.reset(in.batch, a.dims());
  dbk.reset(in.batch, b.dims());
  for (int s = 0; s < in.batch; ++s) {
    for (int t = 0; t < a.steps; ++t) {
      const T* g = dout.sample(s) + static_cast<size_t>(t) * dout.channels;
      std::memcpy(da.sample(s) + static_cast<size_t>(t) * a.channels, g, sizeof(T) * a.channels);
      std::memcpy(dbk.sample(s) + static_cast<size_t>(t) * b.channels, g + a.channels, sizeof(T) * b.channels);
    }
  }
  Activation<T> dx_b;
  fwd_->backward(p, in, a, cache.children[0], da, din, grads);
  bwd_->backward(p, in, b, cache.children[1], dbk, din ? &dx_b : nullptr, grads);
  if (din)
    for (size_t i = 0; i < din->data.size(); ++i) din->data[i] += dx_b.data[i];
}

// ---------------------------------------------------------------- SqueezeExcite
//
// Cache a: per sample: squeeze mean (C) | hidden pre-activation (r) | hidden (r) | scale (C).

template <typename T>
void SqueezeExcite<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                               Phase) const {
  if (in.channels != channels_) fail(ErrorCode::shape_mismatch, "squeeze-excite channel mismatch");
  const int C = channels_, R = reduced_;
  const size_t per_sample = 2 * static_cast<size_t>(C) + 2 * static_cast<size_t>(R);
  cache.a.assign(per_sample * in.batch, T(0));
  out.reset(in.batch, in.dims());
  const T* w1 = values(p, w1_);
  const T* w2 = values(p, w2_);
  LOADCYCLE_PARALLEL_FOR
  for (int s = 0; s < in.batch; ++s) {
    T* sq = cache.a.data() + per_sample * s;
    T* pre = sq + C;
    T* hid = pre + R;
    T* scale = hid + R;
    const T* x = in.sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < C; ++c) sq[c] += x[static_cast<size_t>(t) * C + c];
    for (int c = 0; c < C; ++c) sq[c] /= T(in.steps);
    for (int r = 0; r < R; ++r) {
      T acc = 0;
      for (int c = 0; c < C; ++c) acc += w1[static_cast<size_t>(r) * C + c] * sq[c];
      pre[r] = acc;
      hid[r] = acc > T(0) ? acc : T(0);
    }
    for (int c = 0; c < C; ++c) {
      T acc = 0;
      for (int r = 0; r < R; ++r) acc += w2[static_cast<size_t>(c) * R + r] * hid[r];
      scale[c] = sigmoid(acc);
    }
    T* y = out.sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < C; ++c) y[static_cast<size_t>(t) * C + c] = x[static_cast<size_t>(t) * C + c] * scale[c];
  }
}

template <typename T>
void SqueezeExcite<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&,
                                const LayerCache<T>& cache, const Activation<T>& dout, Activation<T>* din,
                                GradList<T>& grads) const {
  const int C = channels_, R = reduced_;
  const size_t per_sample = 2 * static_cast<size_t>(C) + 2 * static_cast<size_t>(R);
  GradPack<T> pack(grads, {{w1_, static_cast<size_t>(R) * C}, {w2_, static_cast<size_t>(C) * R}});
  if (din) din->reset(in.batch, in.dims());
  const T* w1 = values(p, w1_);
  const T* w2 = values(p, w2_);
  const auto& offs = pack.offsets();
  reduce_over_batch<T>(in.batch, pack.width(), pack.data(), [&](int s, T* acc) {
    T* dw1 = GradPack<T>::slot(acc, offs, 0);
    T* dw2 = GradPack<T>::slot(acc, offs, 1);
    const T* sq = cache.a.data() + per_sample * s;
    const T* pre = sq + C;
    const T* hid = pre + R;
    const T* scale = hid + R;
    const T* x = in.sample(s);
    const T* dy = dout.sample(s);
    std::vector<T> dscale(static_cast<size_t>(C), T(0)), dhid(static_cast<size_t>(R), T(0)),
        dsq(static_cast<size_t>(C), T(0));
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < C; ++c) dscale[c] += dy[static_cast<size_t>(t) * C + c] * x[static_cast<size_t>(t) * C + c];
    for (int c = 0; c < C; ++c) {
      const T dpre2 = dscale[c] * scale[c] * (T(1) - scale[c]);
      for (int r = 0; r < R; ++r) {
        if (dw2) dw2[static_cast<size_t>(c) * R + r] += dpre2 * hid[r];
        dhid[r] += dpre2 * w2[static_cast<size_t>(c) * R + r];
      }
    }
    for (int r = 0; r < R; ++r) {
      const T dpre1 = pre[r] > T(0) ? dhid[r] : T(0);
      for (int c = 0; c < C; ++c) {
        if (dw1) dw1[static_cast<size_t>(r) * C + c] += dpre1 * sq[c];
        dsq[c] += dpre1 * w1[static_cast<size_t>(r) * C + c];
      }
    }
    if (din) {
      T* dx = din->sample(s);
      const T inv_steps = T(1) / T(in.steps);
      for (int t = 0; t < in.steps; ++t)
        for (int c = 0; c < C; ++c)
          dx[static_cast<size_t>(t) * C + c] = dy[static_cast<size_t>(t) * C + c] * scale[c] + dsq[c] * inv_steps;
    }
  });
  pack.scatter();
}

template <typename T>
void SqueezeExcite<T>::kink_signature(const Activation<T>& in, const Activation<T>&, const LayerCache<T>& cache,
                                      std::vector<std::uint8_t>& sig) const {
  const size_t per_sample = 2 * static_cast<size_t>(channels_) + 2 * static_cast<size_t>(reduced_);
  for (int s = 0; s < in.batch; ++s) {
    const T* pre = cache.a.data() + per_sample * s + channels_;
    for (int r = 0; r < reduced_; ++r) sig.push_back(pre[r] > T(0) ? 1 : 0);
  }
}

// ---------------------------------------------------------------- BatchNorm
//
// Cache a: normalized input (same layout as input). Cache b: per channel
// mean (C) | variance (C) | inverse std (C), all from the statistics used.

template <typename T>
void BatchNorm<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                           Phase phase) const {
  if (in.channels != channels_) fail(ErrorCode::shape_mismatch, "batch-norm channel mismatch");
  const int C = channels_;
  const size_t rows = static_cast<size_t>(in.batch) * in.steps;
  cache.b.assign(3 * static_cast<size_t>(C), T(0));
  T* mean = cache.b.data();
  T* var = mean + C;
  T* inv = var + C;
  if (phase == Phase::training) {
    for (size_t r = 0; r < rows; ++r)
      for (int c = 0; c < C; ++c) mean[c] += in.data[r * C + c];
    for (int c = 0; c < C; ++c) mean[c] /= T(rows);
    for (size_t r = 0; r < rows; ++r)
      for (int c = 0; c < C; ++c) {
        const T d = in.data[r * C + c] - mean[c];
        var[c] += d * d;
      }
    for (int c = 0; c < C; ++c) var[c] /= T(rows);
  } else {
    const T* rm = values(p, mean_);
    const T* rv = values(p, var_);
    for (int c = 0; c < C; ++c) {
      mean[c] = rm[c];
      var[c] = rv[c];
    }
  }
  for (int c = 0; c < C; ++c) inv[c] = T(1) / std::sqrt(var[c] + T(kEpsilon));
  const T* gamma = values(p, gamma_);
  const T* beta = values(p, beta_);
  out.reset(in.batch, in.dims());
  cache.a.resize(in.data.size());
  for (size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < C; ++c) {
      const T xhat = (in.data[r * C + c] - mean[c]) * inv[c];
      cache.a[r * C + c] = xhat;
      out.data[r * C + c] = gamma[c] * xhat + beta[c];
    }
  }
}

template <typename T>
void BatchNorm<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&,
                            const LayerCache<T>& cache, const Activation<T>& dout, Activation<T>* din,
                            GradList<T>& grads) const {
  // Training-phase gradient; the batch statistics depend on every sample.
  const int C = channels_;
  const size_t rows = static_cast<size_t>(in.batch) * in.steps;
  const T* gamma = values(p, gamma_);
  const T* inv = cache.b.data() + 2 * C;
  std::vector<T> sum_dy(static_cast<size_t>(C), T(0)), sum_dy_xhat(static_cast<size_t>(C), T(0));
  for (size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < C; ++c) {
      sum_dy[c] += dout.data[r * C + c];
      sum_dy_xhat[c] += dout.data[r * C + c] * cache.a[r * C + c];
    }
  }
  if (wants(grads, gamma_))
    for (int c = 0; c < C; ++c) grads[gamma_][c] += sum_dy_xhat[c];
  if (wants(grads, beta_))
    for (int c = 0; c < C; ++c) grads[beta_][c] += sum_dy[c];
  if (!din) return;
  din->reset(in.batch, in.dims());
  const T n = T(rows);
  for (size_t r = 0; r < rows; ++r) {
    for (int c = 0; c < C; ++c) {
      const T xhat = cache.a[r * C + c];
      din->data[r * C + c] =
          gamma[c] * inv[c] / n * (n * dout.data[r * C + c] - sum_dy[c] - xhat * sum_dy_xhat[c]);
    }
  }
}

template <typename T>
void BatchNorm<T>::buffer_updates(const LayerCache<T>& cache, std::vector<BufferUpdate<T>>& out) const {
  const int C = channels_;
  out.push_back({mean_, std::vector<T>(cache.b.begin(), cache.b.begin() + C)});
  out.push_back({var_, std::vector<T>(cache.b.begin() + C, cache.b.begin() + 2 * C)});
}

// ---------------------------------------------------------------- pooling and reshapes

template <typename T>
void GlobalAvgPool<T>::forward(ParamSpan<T>, const Activation<T>& in, Activation<T>& out, LayerCache<T>&,
                               Phase) const {
  out.reset(in.batch, {1, in.channels});
  for (int s = 0; s < in.batch; ++s) {
    const T* x = in.sample(s);
    T* y = out.sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < in.channels; ++c) y[c] += x[static_cast<size_t>(t) * in.channels + c];
    for (int c = 0; c < in.channels; ++c) y[c] /= T(in.steps);
  }
}

template <typename T>
void GlobalAvgPool<T>::backward(ParamSpan<T>, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                                const Activation<T>& dout, Activation<T>* din, GradList<T>&) const {
  if (!din) return;
  din->reset(in.batch, in.dims());
  const T inv = T(1) / T(in.steps);
  for (int s = 0; s < in.batch; ++s) {
    const T* dy = dout.sample(s);
    T* dx = din->sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < in.channels; ++c) dx[static_cast<size_t>(t) * in.channels + c] = dy[c] * inv;
  }
}

template <typename T>
void DimShuffle<T>::forward(ParamSpan<T>, const Activation<T>& in, Activation<T>& out, LayerCache<T>&,
                            Phase) const {
  out.reset(in.batch, out_dims(in.dims()));
  for (int s = 0; s < in.batch; ++s) {
    const T* x = in.sample(s);
    T* y = out.sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < in.channels; ++c)
        y[static_cast<size_t>(c) * in.steps + t] = x[static_cast<size_t>(t) * in.channels + c];
  }
}

template <typename T>
void DimShuffle<T>::backward(ParamSpan<T>, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                             const Activation<T>& dout, Activation<T>* din, GradList<T>&) const {
  if (!din) return;
  din->reset(in.batch, in.dims());
  for (int s = 0; s < in.batch; ++s) {
    const T* dy = dout.sample(s);
    T* dx = din->sample(s);
    for (int t = 0; t < in.steps; ++t)
      for (int c = 0; c < in.channels; ++c)
        dx[static_cast<size_t>(t) * in.channels + c] = dy[static_cast<size_t>(c) * in.steps + t];
  }
}

template <typename T>
void Flatten<T>::forward(ParamSpan<T>, const Activation<T>& in, Activation<T>& out, LayerCache<T>&, Phase) const {
  out.reset(in.batch, out_dims(in.dims()));
  out.data = in.data;
}

template <typename T>
void Flatten<T>::backward(ParamSpan<T>, const Activation<T>& in, const Activation<T>&, const LayerCache<T>&,
                          const Activation<T>& dout, Activation<T>* din, GradList<T>&) const {
  if (!din) return;
  din->reset(in.batch, in.dims());
  din->data = dout.data;
}

// ---------------------------------------------------------------- Branches
//
// Cache: children[branch * depth_max + layer]; acts per branch layer output.

template <typename T>
Dims Branches<T>::out_dims(Dims in) const {
  int channels = 0;
  for (const auto& chain : chains_) {
    Dims d = in;
    for (const auto& layer : chain) d = layer->out_dims(d);
    if (d.steps != 1) fail(ErrorCode::unsupported_spec, "branch outputs must be vectors");
    channels += d.channels;
  }
  return {1, channels};
}

template <typename T>
void Branches<T>::forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                          Phase phase) const {
  size_t total_layers = 0;
  for (const auto& chain : chains_) total_layers += chain.size();
  cache.children.assign(total_layers, {});
  cache.acts.assign(total_layers, {});
  size_t k = 0;
  for (const auto& chain : chains_) {
    const Activation<T>* cur = &in;
    for (const auto& layer : chain) {
      layer->forward(p, *cur, cache.acts[k], cache.children[k], phase);
      cur = &cache.acts[k];
      ++k;
    }
  }
  out.reset(in.batch, out_dims(in.dims()));
  k = 0;
  int offset = 0;
  for (const auto& chain : chains_) {
    k += chain.size();
    const auto& last = cache.acts[k - 1];
    for (int s = 0; s < in.batch; ++s)
      std::memcpy(out.sample(s) + offset, last.sample(s), sizeof(T) * last.channels);
    offset += last.channels;
  }
}

template <typename T>
void Branches<T>::backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>&,
                           const LayerCache<T>& cache, const Activation<T>& dout, Activation<T>* din,
                           GradList<T>& grads) const {
  if (din) din->reset(in.batch, in.dims());
  size_t k0 = 0;
  int offset = 0;
  for (const auto& chain : chains_) {
    const size_t n = chain.size();
    const auto& last = cache.acts[k0 + n - 1];
    Activation<T> grad;
    grad.reset(in.batch, last.dims());
    for (int s = 0; s < in.batch; ++s)
      std::memcpy(grad.sample(s), dout.sample(s) + offset, sizeof(T) * last.channels);
    offset += last.channels;

    // A layer needs its input gradient if anything upstream inside the chain
    // is trainable, or the caller asked for din.
    std::vector<bool> upstream_trainable(n, false);
    bool seen = false;
    for (size_t i = 0; i < n; ++i) {
      upstream_trainable[i] = seen;
      std::vector<int> idx;
      chain[i]->collect_params(idx);
      for (int j : idx)
        if (wants(grads, j)) seen = true;
    }
    for (size_t i = n; i-- > 0;) {
      const Activation<T>& layer_in = i == 0 ? in : cache.acts[k0 + i - 1];
      const bool need = upstream_trainable[i] || din != nullptr;
      Activation<T> g_in;
      chain[i]->backward(p, layer_in, cache.acts[k0 + i], cache.children[k0 + i], grad, need ? &g_in : nullptr,
                         grads);
      if (!need) break;
      if (i == 0) {
        if (din)
          for (size_t j = 0; j < din->data.size(); ++j) din->data[j] += g_in.data[j];
      } else {
        grad = std::move(g_in);
      }
    }
    k0 += n;
  }
}

template <typename T>
void Branches<T>::collect_params(std::vector<int>& out) const {
  for (const auto& chain : chains_)
    for (const auto& layer : chain) layer->collect_params(out);
}

template <typename T>
void Branches<T>::kink_signature(const Activation<T>& in, const Activation<T>&, const LayerCache<T>& cache,
                                 std::vector<std::uint8_t>& sig) const {
  size_t k = 0;
  for (const auto& chain : chains_) {
    for (size_t i = 0; i < chain.size(); ++i, ++k) {
      const Activation<T>& layer_in = i == 0 ? in : cache.acts[k - 1];
      chain[i]->kink_signature(layer_in, cache.acts[k], cache.children[k], sig);
    }
  }
}

template <typename T>
void Branches<T>::buffer_updates(const LayerCache<T>& cache, std::vector<BufferUpdate<T>>& out) const {
  size_t k = 0;
  for (const auto& chain : chains_)
    for (const auto& layer : chain) layer->buffer_updates(cache.children[k++], out);
}

#define LOADCYCLE_INSTANTIATE(T)       \
  template class Conv1D<T>;            \
  template class Relu<T>;              \
  template class Dense<T>;             \
  template class Lstm<T>;              \
  template class Bidirectional<T>;     \
  template class SqueezeExcite<T>;     \
  template class BatchNorm<T>;         \
  template class GlobalAvgPool<T>;     \
  template class DimShuffle<T>;        \
  template class Flatten<T>;           \
  template class Branches<T>;

LOADCYCLE_INSTANTIATE(float)
LOADCYCLE_INSTANTIATE(double)

}  // namespace loadcycle::nn
