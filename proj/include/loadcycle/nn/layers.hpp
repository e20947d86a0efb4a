#pragma once

#include <memory>
#include <vector>

#include "loadcycle/nn/network.hpp"

namespace loadcycle::nn {

// Cross-correlation over time with zero "same" padding: left pad (k-1)/2,
// right pad the rest. Weights [filters][kernel][in], bias [filters].
template <typename T>
class Conv1D final : public Layer<T> {
 public:
  Conv1D(int in_channels, int filters, int kernel, int weight, int bias)
      : in_(in_channels), filters_(filters), kernel_(kernel), w_(weight), b_(bias) {}
  Dims out_dims(Dims in) const override { return {in.steps, filters_}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override { out.insert(out.end(), {w_, b_}); }

 private:
  int in_, filters_, kernel_, w_, b_;
};

template <typename T>
class Relu final : public Layer<T> {
 public:
  Dims out_dims(Dims in) const override { return in; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void kink_signature(const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                      std::vector<std::uint8_t>& sig) const override;
};

// Fully connected layer on vectors: weight [out][in], bias [out].
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(int in, int out, int weight, int bias) : in_(in), out_(out), w_(weight), b_(bias) {}
  Dims out_dims(Dims) const override { return {1, out_}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override { out.insert(out.end(), {w_, b_}); }

 private:
  int in_, out_, w_, b_;
};

// LSTM with gate order (input, forget, candidate, output). w_input
// [4u][in], w_recurrent [4u][u], bias [4u]. Emits every hidden state or only
// the one after the final processed step; `reverse` runs time backwards.
template <typename T>
class Lstm final : public Layer<T> {
 public:
  Lstm(int input_dim, int units, bool return_sequences, bool reverse, int w_input, int w_recurrent, int bias)
      : in_(input_dim),
        units_(units),
        return_sequences_(return_sequences),
        reverse_(reverse),
        wx_(w_input),
        wh_(w_recurrent),
        b_(bias) {}
  Dims out_dims(Dims in) const override { return {return_sequences_ ? in.steps : 1, units_}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override { out.insert(out.end(), {wx_, wh_, b_}); }

 private:
  int in_, units_;
  bool return_sequences_, reverse_;
  int wx_, wh_, b_;
};

// Forward and reverse LSTM over the same input, outputs concatenated on the
// channel axis (forward first).
template <typename T>
class Bidirectional final : public Layer<T> {
 public:
  Bidirectional(std::unique_ptr<Lstm<T>> fwd, std::unique_ptr<Lstm<T>> bwd)
      : fwd_(std::move(fwd)), bwd_(std::move(bwd)) {}
  Dims out_dims(Dims in) const override;
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override {
    fwd_->collect_params(out);
    bwd_->collect_params(out);
  }

 private:
  std::unique_ptr<Lstm<T>> fwd_, bwd_;
};

// Squeeze-and-excite recalibration of a [steps][channels] map: mean over
// time, dense+ReLU to `reduced` units, dense+sigmoid back, channel-wise
// scaling. Both dense maps are bias-free. Output shape equals input shape.
template <typename T>
class SqueezeExcite final : public Layer<T> {
 public:
  SqueezeExcite(int channels, int reduced, int squeeze, int excite)
      : channels_(channels), reduced_(reduced), w1_(squeeze), w2_(excite) {}
  Dims out_dims(Dims in) const override { return in; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override { out.insert(out.end(), {w1_, w2_}); }
  void kink_signature(const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                      std::vector<std::uint8_t>& sig) const override;

 private:
  int channels_, reduced_, w1_, w2_;
};

// Per-channel normalization over batch and time. Training uses batch
// statistics; inference uses the running buffers.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  static constexpr double kEpsilon = 1e-3;
  static constexpr double kMomentum = 0.99;

  BatchNorm(int channels, int gamma, int beta, int running_mean, int running_var)
      : channels_(channels), gamma_(gamma), beta_(beta), mean_(running_mean), var_(running_var) {}
  Dims out_dims(Dims in) const override { return in; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override { out.insert(out.end(), {gamma_, beta_, mean_, var_}); }
  void buffer_updates(const LayerCache<T>& cache, std::vector<BufferUpdate<T>>& out) const override;

 private:
  int channels_, gamma_, beta_, mean_, var_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Dims out_dims(Dims in) const override { return {1, in.channels}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
};

// Swaps the time and channel axes.
template <typename T>
class DimShuffle final : public Layer<T> {
 public:
  Dims out_dims(Dims in) const override { return {in.channels, in.steps}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  Dims out_dims(Dims in) const override { return {1, in.steps * in.channels}; }
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
};

// Runs several layer chains on the same input and concatenates their vector
// outputs.
template <typename T>
class Branches final : public Layer<T> {
 public:
  using Chain = std::vector<std::unique_ptr<Layer<T>>>;
  explicit Branches(std::vector<Chain> chains) : chains_(std::move(chains)) {}
  Dims out_dims(Dims in) const override;
  void forward(ParamSpan<T> p, const Activation<T>& in, Activation<T>& out, LayerCache<T>& cache,
               Phase phase) const override;
  void backward(ParamSpan<T> p, const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                const Activation<T>& dout, Activation<T>* din, GradList<T>& grads) const override;
  void collect_params(std::vector<int>& out) const override;
  void kink_signature(const Activation<T>& in, const Activation<T>& out, const LayerCache<T>& cache,
                      std::vector<std::uint8_t>& sig) const override;
  void buffer_updates(const LayerCache<T>& cache, std::vector<BufferUpdate<T>>& out) const override;

 private:
  std::vector<Chain> chains_;
};

}  // namespace loadcycle::nn
