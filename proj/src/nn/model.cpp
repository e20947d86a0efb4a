#include "loadcycle/nn/model.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "loadcycle/error.hpp"
#include "loadcycle/nn/network.hpp"

namespace loadcycle::nn {

template <typename T>
int BasicModel<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return static_cast<int>(i);
  return -1;
}

template <typename T>
BasicModel<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  BasicModel<T> m;
  m.spec = spec;
  m.set_network(build_network<T>(spec));
  std::mt19937_64 rng(seed);
  for (const auto& d : declare_params(spec)) {
    Parameter<T> p;
    p.name = d.name;
    p.shape = d.shape;
    p.role = d.role;
    p.group = d.group;
    p.trainable = !is_buffer(d.role);
    const auto n = static_cast<std::size_t>(
        std::accumulate(d.shape.begin(), d.shape.end(), std::int64_t{1}, std::multiplies<>()));
    p.values.assign(n, T(0));
    switch (d.role) {
      case Role::weight: {
        const double limit = std::sqrt(6.0 / static_cast<double>(d.fan_in + d.fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (auto& v : p.values) v = static_cast<T>(dist(rng));
        break;
      }
      case Role::scale:
      case Role::running_var:
        std::fill(p.values.begin(), p.values.end(), T(1));
        break;
      default:
        break;
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

template <typename To, typename From>
BasicModel<To> convert(const BasicModel<From>& m) {
  BasicModel<To> out;
  out.spec = m.spec;
  out.norm = m.norm;
  out.set_network(build_network<To>(m.spec));
  out.params.reserve(m.params.size());
  for (const auto& p : m.params) {
    Parameter<To> q;
    q.name = p.name;
    q.shape = p.shape;
    q.role = p.role;
    q.group = p.group;
    q.trainable = p.trainable;
    q.lr_multiplier = p.lr_multiplier;
    q.values.assign(p.values.begin(), p.values.end());
    out.params.push_back(std::move(q));
  }
  return out;
}

template <typename T>
std::size_t count_params(const BasicModel<T>& m, ParamFilter filter) {
  std::size_t n = 0;
  for (const auto& p : m.params) {
    if (p.buffer()) continue;
    const bool take = filter == ParamFilter::all || (filter == ParamFilter::trainable && p.trainable) ||
                      (filter == ParamFilter::frozen && !p.trainable);
    if (take) n += p.size();
  }
  return n;
}

std::size_t conv_param_count(int in_channels, int kernel, int filters) {
  return static_cast<std::size_t>(in_channels * kernel + 1) * static_cast<std::size_t>(filters);
}

std::size_t lstm_param_count(int input_dim, int units) {
  return 4 * (static_cast<std::size_t>(input_dim + units) * units + static_cast<std::size_t>(units));
}

std::size_t dense_param_count(int in, int out) { return static_cast<std::size_t>(in + 1) * out; }

template class BasicModel<float>;
template class BasicModel<double>;
template BasicModel<float> build_model<float>(const ModelSpec&, std::uint64_t);
template BasicModel<double> build_model<double>(const ModelSpec&, std::uint64_t);
template BasicModel<double> convert<double, float>(const BasicModel<float>&);
template BasicModel<float> convert<float, double>(const BasicModel<double>&);
template BasicModel<float> convert<float, float>(const BasicModel<float>&);
template BasicModel<double> convert<double, double>(const BasicModel<double>&);
template std::size_t count_params<float>(const BasicModel<float>&, ParamFilter);
template std::size_t count_params<double>(const BasicModel<double>&, ParamFilter);

}  // namespace loadcycle::nn
