#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "loadcycle/nn/model.hpp"

namespace loadcycle::nn {

enum class Phase { inference, training };

struct Dims {
  int steps = 1;
  int channels = 0;
  bool operator==(const Dims&) const = default;
};

// Batch of sequences laid out [sample][step][channel]; vectors use steps = 1.
template <typename T>
struct Activation {
  int batch = 0;
  int steps = 0;
  int channels = 0;
  std::vector<T> data;

  void reset(int b, Dims d) {
    batch = b;
    steps = d.steps;
    channels = d.channels;
    data.assign(static_cast<std::size_t>(b) * d.steps * d.channels, T(0));
  }
  Dims dims() const { return {steps, channels}; }
  std::size_t sample_size() const { return static_cast<std::size_t>(steps) * channels; }
  T* sample(int b) { return data.data() + static_cast<std::size_t>(b) * sample_size(); }
  const T* sample(int b) const { return data.data() + static_cast<std::size_t>(b) * sample_size(); }
};

// Whatever a layer keeps from forward for its backward pass.
template <typename T>
struct LayerCache {
  std::vector<T> a;
  std::vector<T> b;
  std::vector<LayerCache<T>> children;
  std::vector<Activation<T>> acts;
};

template <typename T>
using ParamSpan = std::span<const Parameter<T>>;

// One gradient vector per model tensor; empty when not requested.
template <typename T>
using GradList = std::vector<std::vector<T>>;

template <typename T>
struct BufferUpdate {
  int index = -1;  // running_mean / running_var tensor
  std::vector<T> batch_value;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Dims out_dims(Dims in) const = 0;
  virtual void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
                       Phase phase) const = 0;
  // din is null when no upstream tensor needs a gradient.
  virtual void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out,
                        const LayerCache<T>& cache, const Activation<T>& dout, Activation<T>* din,
                        GradList<T>& grads) const = 0;

  virtual void collect_params(std::vector<int>& /*out*/) const {}
  // Appends one byte per non-differentiable switch (ReLU sign) seen in forward.
  virtual void kink_signature(const Activation<T>& /*in*/, const Activation<T>& /*out*/,
                              const LayerCache<T>& /*cache*/, std::vector<std::uint8_t>& /*sig*/) const {}
  virtual void buffer_updates(const LayerCache<T>& /*cache*/, std::vector<BufferUpdate<T>>& /*out*/) const {}
};

template <typename T>
struct Trace {
  std::vector<Activation<T>> acts;  // acts[0] is the input, acts[i+1] the output of layer i
  std::vector<LayerCache<T>> caches;
  const Activation<T>& logits() const { return acts.back(); }
};

template <typename T>
class Network {
 public:
  Network(Dims input, std::vector<std::unique_ptr<Layer<T>>> layers);

  Dims input_dims() const { return input_; }
  Dims output_dims() const { return output_; }
  const std::vector<std::unique_ptr<Layer<T>>>& layers() const { return layers_; }

  Trace<T> forward(ParamSpan<T> params, Activation<T> input, Phase phase) const;
  // Accumulates into every non-empty entry of grads.
  void backward(ParamSpan<T> params, const Trace<T>& trace, const Activation<T>& dlogits, GradList<T>& grads) const;

  std::vector<std::uint8_t> kink_signature(const Trace<T>& trace) const;
  std::vector<BufferUpdate<T>> buffer_updates(const Trace<T>& trace) const;

 private:
  Dims input_;
  Dims output_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<std::vector<int>> layer_params_;
};

// Builds the layer graph of a spec; parameter indices follow declare_params.
template <typename T>
std::shared_ptr<const Network<T>> build_network(const ModelSpec& spec);

}  // namespace loadcycle::nn
