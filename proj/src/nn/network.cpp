#include "loadcycle/nn/network.hpp"

#include <algorithm>
#include <string>

#include "loadcycle/error.hpp"
#include "loadcycle/nn/layers.hpp"

namespace loadcycle::nn {

template <typename T>
Network<T>::Network(Dims input, std::vector<std::unique_ptr<Layer<T>>> layers)
    : input_(input), layers_(std::move(layers)) {
  Dims d = input_;
  for (const auto& l : layers_) {
    d = l->out_dims(d);
    std::vector<int> idx;
    l->collect_params(idx);
    layer_params_.push_back(std::move(idx));
  }
  output_ = d;
}

template <typename T>
Trace<T> Network<T>::forward(ParamSpan<T> params, Activation<T> input, Phase phase) const {
  if (input.dims() != input_) fail(ErrorCode::shape_mismatch, "network input shape mismatch");
  Trace<T> trace;
  trace.acts.reserve(layers_.size() + 1);
  trace.acts.push_back(std::move(input));
  trace.caches.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Activation<T> out;
    layers_[i]->forward(params, trace.acts[i], out, trace.caches[i], phase);
    trace.acts.push_back(std::move(out));
  }
  return trace;
}

template <typename T>
void Network<T>::backward(ParamSpan<T> params, const Trace<T>& trace, const Activation<T>& dlogits,
                          GradList<T>& grads) const {
  const std::size_t n = layers_.size();
  // upstream[i]: some layer before i owns a tensor that wants a gradient.
  std::vector<bool> upstream(n, false);
  bool seen = false;
  for (std::size_t i = 0; i < n; ++i) {
    upstream[i] = seen;
    for (int idx : layer_params_[i])
      if (!grads[static_cast<std::size_t>(idx)].empty()) seen = true;
  }
  Activation<T> grad = dlogits;
  for (std::size_t i = n; i-- > 0;) {
    Activation<T> g_in;
    layers_[i]->backward(params, trace.acts[i], trace.acts[i + 1], trace.caches[i], grad,
                         upstream[i] ? &g_in : nullptr, grads);
    if (!upstream[i]) break;
    grad = std::move(g_in);
  }
}

template <typename T>
std::vector<std::uint8_t> Network<T>::kink_signature(const Trace<T>& trace) const {
  std::vector<std::uint8_t> sig;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->kink_signature(trace.acts[i], trace.acts[i + 1], trace.caches[i], sig);
  return sig;
}

template <typename T>
std::vector<BufferUpdate<T>> Network<T>::buffer_updates(const Trace<T>& trace) const {
  std::vector<BufferUpdate<T>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->buffer_updates(trace.caches[i], out);
  return out;
}

namespace {

class DeclList {
 public:
  int add(std::string name, std::vector<int> shape, Role role, Group group, int fan_in = 0, int fan_out = 0) {
    decls_.push_back({std::move(name), std::move(shape), role, group, fan_in, fan_out});
    return static_cast<int>(decls_.size()) - 1;
  }
  std::vector<ParamDecl> take() { return std::move(decls_); }

 private:
  std::vector<ParamDecl> decls_;
};

template <typename T>
using LayerList = std::vector<std::unique_ptr<Layer<T>>>;

template <typename T>
std::unique_ptr<Lstm<T>> make_lstm(DeclList& d, const std::string& name, int in, int units, bool seq, bool reverse,
                                   Group group) {
  const int wx = d.add(name + ".w_input", {4 * units, in}, Role::weight, group, in, 4 * units);
  const int wh = d.add(name + ".w_recurrent", {4 * units, units}, Role::weight, group, units, 4 * units);
  const int b = d.add(name + ".bias", {4 * units}, Role::bias, group);
  return std::make_unique<Lstm<T>>(in, units, seq, reverse, wx, wh, b);
}

template <typename T>
std::unique_ptr<Conv1D<T>> make_conv(DeclList& d, const std::string& name, int in, int filters, int kernel) {
  const int w = d.add(name + ".weight", {filters, kernel, in}, Role::weight, Group::backbone, in * kernel,
                      filters * kernel);
  const int b = d.add(name + ".bias", {filters}, Role::bias, Group::backbone);
  return std::make_unique<Conv1D<T>>(in, filters, kernel, w, b);
}

template <typename T>
std::unique_ptr<Dense<T>> make_dense(DeclList& d, const std::string& name, int in, int out) {
  const int w = d.add(name + ".weight", {out, in}, Role::weight, Group::head, in, out);
  const int b = d.add(name + ".bias", {out}, Role::bias, Group::head);
  return std::make_unique<Dense<T>>(in, out, w, b);
}

template <typename T>
std::unique_ptr<SqueezeExcite<T>> make_se(DeclList& d, const std::string& name, int channels, int reduction) {
  const int reduced = std::max(1, channels / reduction);
  const int w1 = d.add(name + ".squeeze", {reduced, channels}, Role::weight, Group::backbone, channels, reduced);
  const int w2 = d.add(name + ".excite", {channels, reduced}, Role::weight, Group::backbone, reduced, channels);
  return std::make_unique<SqueezeExcite<T>>(channels, reduced, w1, w2);
}

template <typename T>
std::unique_ptr<BatchNorm<T>> make_bn(DeclList& d, const std::string& name, int channels) {
  const int g = d.add(name + ".gamma", {channels}, Role::scale, Group::backbone);
  const int b = d.add(name + ".beta", {channels}, Role::shift, Group::backbone);
  const int m = d.add(name + ".running_mean", {channels}, Role::running_mean, Group::backbone);
  const int v = d.add(name + ".running_var", {channels}, Role::running_var, Group::backbone);
  return std::make_unique<BatchNorm<T>>(channels, g, b, m, v);
}

template <typename T>
LayerList<T> crdnn_layers(const ModelSpec& s, DeclList& d) {
  LayerList<T> layers;
  layers.push_back(make_conv<T>(d, "conv1", s.in_channels, s.conv_filters, s.conv_kernel));
  layers.push_back(std::make_unique<Relu<T>>());
  if (s.variant == Variant::crdnn_2lstm_sae) layers.push_back(make_se<T>(d, "se1", s.conv_filters, s.se_reduction));

  int features = 0;
  switch (s.variant) {
    case Variant::crdnn_1lstm:
      layers.push_back(make_lstm<T>(d, "lstm1", s.conv_filters, s.rnn_units[0], false, false, Group::backbone));
      features = s.rnn_units[0];
      break;
    case Variant::crdnn_2lstm:
    case Variant::crdnn_2lstm_sae:
      layers.push_back(make_lstm<T>(d, "lstm1", s.conv_filters, s.rnn_units[0], true, false, Group::backbone));
      layers.push_back(make_lstm<T>(d, "lstm2", s.rnn_units[0], s.rnn_units[1], false, false, Group::backbone));
      features = s.rnn_units[1];
      break;
    case Variant::crdnn_bilstm: {
      layers.push_back(make_lstm<T>(d, "lstm1", s.conv_filters, s.rnn_units[0], true, false, Group::backbone));
      auto fwd = make_lstm<T>(d, "bilstm.forward", s.rnn_units[0], s.rnn_units[1], false, false, Group::backbone);
      auto bwd = make_lstm<T>(d, "bilstm.backward", s.rnn_units[0], s.rnn_units[1], false, true, Group::backbone);
      layers.push_back(std::make_unique<Bidirectional<T>>(std::move(fwd), std::move(bwd)));
      features = 2 * s.rnn_units[1];
      break;
    }
    default:
      fail(ErrorCode::unsupported_spec, "not a CRDNN variant");
  }
  layers.push_back(make_dense<T>(d, "dense1", features, s.dense_units[0]));
  layers.push_back(std::make_unique<Relu<T>>());
  layers.push_back(make_dense<T>(d, "dense2", s.dense_units[0], s.dense_units[1]));
  layers.push_back(std::make_unique<Relu<T>>());
  layers.push_back(make_dense<T>(d, "output", s.dense_units[1], s.n_classes));
  return layers;
}

template <typename T>
LayerList<T> lstm_fcn_layers(const ModelSpec& s, DeclList& d) {
  typename Branches<T>::Chain fcn;
  int channels = s.in_channels;
  for (int i = 0; i < 3; ++i) {
    const std::string block = "fcn" + std::to_string(i + 1);
    fcn.push_back(make_conv<T>(d, block + ".conv", channels, s.fcn_filters[i], s.fcn_kernels[i]));
    fcn.push_back(make_bn<T>(d, block + ".bn", s.fcn_filters[i]));
    fcn.push_back(std::make_unique<Relu<T>>());
    if (i < 2) fcn.push_back(make_se<T>(d, block + ".se", s.fcn_filters[i], s.se_reduction));
    channels = s.fcn_filters[i];
  }
  fcn.push_back(std::make_unique<GlobalAvgPool<T>>());

  typename Branches<T>::Chain rnn;
  rnn.push_back(std::make_unique<DimShuffle<T>>());
  rnn.push_back(make_lstm<T>(d, "lstm", s.ws, s.fcn_lstm_units, false, false, Group::backbone));

  std::vector<typename Branches<T>::Chain> chains;
  chains.push_back(std::move(fcn));
  chains.push_back(std::move(rnn));
  LayerList<T> layers;
  layers.push_back(std::make_unique<Branches<T>>(std::move(chains)));
  layers.push_back(make_dense<T>(d, "output", channels + s.fcn_lstm_units, s.n_classes));
  return layers;
}

template <typename T>
LayerList<T> linear_layers(const ModelSpec& s, DeclList& d) {
  LayerList<T> layers;
  layers.push_back(std::make_unique<Flatten<T>>());
  layers.push_back(make_dense<T>(d, "output", s.ws * s.in_channels, s.n_classes));
  return layers;
}

template <typename T>
LayerList<T> make_layers(const ModelSpec& spec, DeclList& d) {
  validate(spec);
  switch (spec.variant) {
    case Variant::lstm_fcn: return lstm_fcn_layers<T>(spec, d);
    case Variant::linear_softmax: return linear_layers<T>(spec, d);
    default: return crdnn_layers<T>(spec, d);
  }
}

}  // namespace

template <typename T>
std::shared_ptr<const Network<T>> build_network(const ModelSpec& spec) {
  DeclList d;
  auto layers = make_layers<T>(spec, d);
  return std::make_shared<const Network<T>>(Dims{spec.ws, spec.in_channels}, std::move(layers));
}

std::vector<ParamDecl> declare_params(const ModelSpec& spec) {
  DeclList d;
  make_layers<float>(spec, d);
  return d.take();
}

template class Network<float>;
template class Network<double>;
template std::shared_ptr<const Network<float>> build_network<float>(const ModelSpec&);
template std::shared_ptr<const Network<double>> build_network<double>(const ModelSpec&);

}  // namespace loadcycle::nn
