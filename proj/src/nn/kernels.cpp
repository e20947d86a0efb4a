#include "loadcycle/nn/kernels.hpp"

#include "kernels_impl.hpp"
#include "loadcycle/error.hpp"

namespace loadcycle::nn {

template <typename T>
std::vector<T> conv1d_forward(std::span<const T> x, int channels, int steps, std::span<const T> weights,
                              std::span<const T> bias, int filters, int kernel) {
  if (x.size() != static_cast<std::size_t>(channels) * steps ||
      weights.size() != static_cast<std::size_t>(filters) * kernel * channels ||
      bias.size() != static_cast<std::size_t>(filters) || kernel > steps || kernel < 1) {
    fail(ErrorCode::shape_mismatch, "conv1d shape mismatch");
  }
  std::vector<T> in(x.size());
  for (int c = 0; c < channels; ++c)
    for (int t = 0; t < steps; ++t) in[static_cast<std::size_t>(t) * channels + c] = x[static_cast<std::size_t>(c) * steps + t];
  std::vector<T> y(static_cast<std::size_t>(steps) * filters);
  detail::conv_same(in.data(), steps, channels, weights.data(), bias.data(), filters, kernel, y.data());
  std::vector<T> out(y.size());
  for (int t = 0; t < steps; ++t)
    for (int f = 0; f < filters; ++f) {
      const T v = y[static_cast<std::size_t>(t) * filters + f];
      out[static_cast<std::size_t>(f) * steps + t] = v > T(0) ? v : T(0);
    }
  return out;
}

template <typename T>
LstmState<T> lstm_cell_step(std::span<const T> x, std::span<const T> h_prev, std::span<const T> c_prev,
                            const LstmWeights<T>& w) {
  const auto u = static_cast<std::size_t>(w.units);
  const auto in = static_cast<std::size_t>(w.input_dim);
  if (x.size() != in || h_prev.size() != u || c_prev.size() != u || w.w_input.size() != 4 * u * in ||
      w.w_recurrent.size() != 4 * u * u || w.bias.size() != 4 * u) {
    fail(ErrorCode::shape_mismatch, "lstm cell shape mismatch");
  }
  std::vector<T> gates(4 * u), tanh_c(u);
  LstmState<T> s{std::vector<T>(u), std::vector<T>(u)};
  detail::lstm_step(x.data(), h_prev.data(), c_prev.data(), w.w_input.data(), w.w_recurrent.data(), w.bias.data(),
                    w.input_dim, w.units, gates.data(), s.c.data(), tanh_c.data(), s.h.data());
  return s;
}

template std::vector<float> conv1d_forward<float>(std::span<const float>, int, int, std::span<const float>,
                                                  std::span<const float>, int, int);
template std::vector<double> conv1d_forward<double>(std::span<const double>, int, int, std::span<const double>,
                                                    std::span<const double>, int, int);
template LstmState<float> lstm_cell_step<float>(std::span<const float>, std::span<const float>,
                                                std::span<const float>, const LstmWeights<float>&);
template LstmState<double> lstm_cell_step<double>(std::span<const double>, std::span<const double>,
                                                  std::span<const double>, const LstmWeights<double>&);

}  // namespace loadcycle::nn
