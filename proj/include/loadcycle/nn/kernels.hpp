#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace loadcycle::nn {

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

// x is [channels][steps]; weights [filters][kernel][channels]. Returns
// ReLU(conv(x) + bias) as [filters][steps] with zero same-padding.
template <typename T>
std::vector<T> conv1d_forward(std::span<const T> x, int channels, int steps, std::span<const T> weights,
                              std::span<const T> bias, int filters, int kernel);

template <typename T>
struct LstmWeights {
  std::span<const T> w_input;      // [4u][input_dim]
  std::span<const T> w_recurrent;  // [4u][u]
  std::span<const T> bias;         // [4u]
  int input_dim = 0;
  int units = 0;
};

template <typename T>
struct LstmState {
  std::vector<T> h;
  std::vector<T> c;
};

// One LSTM step, gate order (i, f, g, o):
// c = f*c_prev + i*g, h = o*tanh(c).
template <typename T>
LstmState<T> lstm_cell_step(std::span<const T> x, std::span<const T> h_prev, std::span<const T> c_prev,
                            const LstmWeights<T>& w);

}  // namespace loadcycle::nn
