#pragma once

#include <cstdint>
#include <vector>

#include "loadcycle/nn/network.hpp"

namespace loadcycle::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t t = 0;  // steps taken so far
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<nn::Parameter<T>>& params);

// One bias-corrected Adam step at step count state.t + 1. Each tensor moves
// with lr * lr_multiplier; frozen tensors and tensors without a gradient
// entry are left alone.
template <typename T>
void adam_step(std::vector<nn::Parameter<T>>& params, const nn::GradList<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace loadcycle::train
