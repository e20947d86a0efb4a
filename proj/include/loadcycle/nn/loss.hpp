#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/network.hpp"

namespace loadcycle::nn {

// x is [batch][ws][channels] (the network layout); y holds state codes.
template <typename T>
struct BasicBatch {
  Activation<T> x;
  std::vector<int> y;
  int size() const { return x.batch; }
};

using Batch = BasicBatch<float>;
using Batch64 = BasicBatch<double>;

// Transposes windows ([channel][time]) into a batch. Values are copied as
// they are; normalize the windows first.
template <typename T>
BasicBatch<T> make_batch(const core::WindowSet& set, std::span<const std::size_t> indices);
template <typename T>
BasicBatch<T> make_batch(const core::WindowSet& set);

using ClassWeights = std::array<double, core::kNumStates>;
inline constexpr ClassWeights kUnitWeights{1.0, 1.0, 1.0};
inline constexpr double kLogClamp = 1e-12;

// Row-wise softmax of [batch][classes] logits.
template <typename T>
std::vector<T> softmax(const Activation<T>& logits);

// Inference-mode class probabilities, [batch][n_classes].
template <typename T>
std::vector<T> forward(const BasicModel<T>& model, const Activation<T>& x);

template <typename T>
std::vector<int> predict(const BasicModel<T>& model, const Activation<T>& x);

template <typename T>
struct LossResult {
  double loss = 0.0;
  double data_loss = 0.0;  // weighted cross-entropy part
  GradList<T> grads;       // empty entry for frozen tensors and buffers
  std::vector<BufferUpdate<T>> buffer_updates;
};

// Mean weighted cross-entropy plus l2 * sum of squared weight-matrix
// entries. Batch norm uses batch statistics (training phase).
template <typename T>
LossResult<T> loss_and_grads(const BasicModel<T>& model, const BasicBatch<T>& batch, const ClassWeights& weights,
                             double l2_lambda, bool with_grads = true);

// Same loss without gradients, evaluated in the given phase.
template <typename T>
double loss_value(const BasicModel<T>& model, const BasicBatch<T>& batch, const ClassWeights& weights,
                  double l2_lambda, Phase phase);

void validate(const ClassWeights& weights);  // throws non_positive_weight

}  // namespace loadcycle::nn
