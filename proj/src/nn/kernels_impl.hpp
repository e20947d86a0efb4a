#pragma once

// Raw per-sample kernels shared by the layers and the public kernel API.

#include <cmath>
#include <cstddef>

#include "loadcycle/nn/kernels.hpp"

namespace loadcycle::nn::detail {

// x [steps][in], y [steps][filters] (overwritten), w [filters][kernel][in].
template <typename T>
void conv_same(const T* x, int steps, int in, const T* w, const T* bias, int filters, int kernel, T* y) {
  const int pad_left = (kernel - 1) / 2;
  for (int t = 0; t < steps; ++t) {
    T* yt = y + static_cast<std::size_t>(t) * filters;
    for (int f = 0; f < filters; ++f) yt[f] = bias[f];
    for (int k = 0; k < kernel; ++k) {
      const int src = t + k - pad_left;
      if (src < 0 || src >= steps) continue;
      const T* xs = x + static_cast<std::size_t>(src) * in;
      for (int f = 0; f < filters; ++f) {
        const T* wf = w + (static_cast<std::size_t>(f) * kernel + k) * in;
        T acc = 0;
        for (int c = 0; c < in; ++c) acc += wf[c] * xs[c];
        yt[f] += acc;
      }
    }
  }
}

// z = b + Wx x + Wh h_prev, then the gate nonlinearities in place.
// gates [4u] receives (i, f, g, o) after activation.
template <typename T>
void lstm_step(const T* x, const T* h_prev, const T* c_prev, const T* wx, const T* wh, const T* bias, int in,
               int units, T* gates, T* c, T* tanh_c, T* h) {
  const int rows = 4 * units;
  for (int r = 0; r < rows; ++r) {
    const T* wr = wx + static_cast<std::size_t>(r) * in;
    const T* ur = wh + static_cast<std::size_t>(r) * units;
    T acc = bias[r];
    for (int j = 0; j < in; ++j) acc += wr[j] * x[j];
    for (int j = 0; j < units; ++j) acc += ur[j] * h_prev[j];
    gates[r] = acc;
  }
  T* gi = gates;
  T* gf = gates + units;
  T* gg = gates + 2 * units;
  T* go = gates + 3 * units;
  for (int j = 0; j < units; ++j) {
    gi[j] = sigmoid(gi[j]);
    gf[j] = sigmoid(gf[j]);
    gg[j] = std::tanh(gg[j]);
    go[j] = sigmoid(go[j]);
    c[j] = gf[j] * c_prev[j] + gi[j] * gg[j];
    tanh_c[j] = std::tanh(c[j]);
    h[j] = go[j] * tanh_c[j];
  }
}

}  // namespace loadcycle::nn::detail
