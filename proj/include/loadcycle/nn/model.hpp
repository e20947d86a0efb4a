#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/spec.hpp"

namespace loadcycle::nn {

enum class Role : std::uint8_t {
  weight = 0,  // weight matrix or kernel; the only role under L2
  bias = 1,
  scale = 2,  // batch-norm gamma
  shift = 3,  // batch-norm beta
  running_mean = 4,
  running_var = 5,
};

// Backbone = convolution, recurrent and recalibration layers; head = dense
// layers including the output layer. Fine-tuning modes act per group.
enum class Group : std::uint8_t { backbone = 0, head = 1 };

inline bool is_buffer(Role r) { return r == Role::running_mean || r == Role::running_var; }

struct ParamDecl {
  std::string name;
  std::vector<int> shape;
  Role role = Role::weight;
  Group group = Group::backbone;
  int fan_in = 0;
  int fan_out = 0;
};

template <typename T>
struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<T> values;
  Role role = Role::weight;
  Group group = Group::backbone;
  bool trainable = true;
  double lr_multiplier = 1.0;

  std::size_t size() const { return values.size(); }
  // Buffers (batch-norm running statistics) are state, not parameters.
  bool buffer() const { return is_buffer(role); }
};

template <typename T>
class Network;

template <typename T>
class BasicModel {
 public:
  ModelSpec spec;
  std::vector<Parameter<T>> params;
  core::NormStats norm;

  const Network<T>& network() const { return *network_; }
  std::shared_ptr<const Network<T>> network_ptr() const { return network_; }
  void set_network(std::shared_ptr<const Network<T>> net) { network_ = std::move(net); }

  int find(const std::string& name) const;  // -1 when absent

 private:
  std::shared_ptr<const Network<T>> network_;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

// Declarations in network order; shapes follow the spec only.
std::vector<ParamDecl> declare_params(const ModelSpec& spec);

// Glorot-uniform weights, zero biases/shifts/means, unit scales/variances,
// drawn from one seeded stream in declaration order.
template <typename T>
BasicModel<T> build_model(const ModelSpec& spec, std::uint64_t seed);

// Element-wise cast of every tensor; flags, multipliers and stats carry over.
template <typename To, typename From>
BasicModel<To> convert(const BasicModel<From>& m);

enum class ParamFilter { all, trainable, frozen };

template <typename T>
std::size_t count_params(const BasicModel<T>& m, ParamFilter filter = ParamFilter::all);

// Closed-form per-layer sizes, independent of the tensor bookkeeping.
std::size_t conv_param_count(int in_channels, int kernel, int filters);
std::size_t lstm_param_count(int input_dim, int units);
std::size_t dense_param_count(int in, int out);

}  // namespace loadcycle::nn
