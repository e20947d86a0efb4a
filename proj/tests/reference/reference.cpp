#include "reference.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ref {

namespace {

template <typename M>
Vec param(const M& model, const std::string& name) {
  for (const auto& p : model.params)
    if (p.name == name) return Vec(p.values.begin(), p.values.end());
  throw std::runtime_error("reference: no tensor " + name);
}

Seq batchnorm(Seq x, const Vec& gamma, const Vec& beta, const Vec& mean, const Vec& var) {
  for (auto& row : x)
    for (std::size_t c = 0; c < row.size(); ++c)
      row[c] = gamma[c] * (row[c] - mean[c]) / std::sqrt(var[c] + 1e-3) + beta[c];
  return x;
}

Seq squeeze_excite(Seq x, const Vec& w1, const Vec& w2) {
  const std::size_t C = x[0].size();
  const std::size_t R = w1.size() / C;
  Vec s(C, 0.0);
  for (const auto& row : x)
    for (std::size_t c = 0; c < C; ++c) s[c] += row[c];
  for (auto& v : s) v /= static_cast<double>(x.size());
  Vec z(R, 0.0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t c = 0; c < C; ++c) z[r] += w1[r * C + c] * s[c];
    z[r] = std::max(0.0, z[r]);
  }
  Vec e(C, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    double a = 0.0;
    for (std::size_t r = 0; r < R; ++r) a += w2[c * R + r] * z[r];
    e[c] = sigmoid(a);
  }
  for (auto& row : x)
    for (std::size_t c = 0; c < C; ++c) row[c] *= e[c];
  return x;
}

template <typename M, typename V>
Vec forward_impl(const M& model, const V& window) {
  using loadcycle::nn::Variant;
  const auto& s = model.spec;
  const int T = s.ws;
  const int C = s.in_channels;
  Seq x(static_cast<std::size_t>(T), Vec(static_cast<std::size_t>(C)));
  for (int c = 0; c < C; ++c)
    for (int t = 0; t < T; ++t) x[t][c] = static_cast<double>(window[static_cast<std::size_t>(c * T + t)]);

  auto P = [&](const std::string& n) { return param(model, n); };
  auto lstm_of = [&](const Seq& in, const std::string& n, int units, bool reverse) {
    return lstm(in, P(n + ".w_input"), P(n + ".w_recurrent"), P(n + ".bias"), units, reverse);
  };

  if (s.variant == Variant::linear_softmax) {
    Vec flat;
    for (const auto& row : x) flat.insert(flat.end(), row.begin(), row.end());
    return softmax(dense(flat, P("output.weight"), P("output.bias")));
  }

  if (s.variant == Variant::lstm_fcn) {
    Seq h = x;
    for (int i = 0; i < 3; ++i) {
      const std::string b = "fcn" + std::to_string(i + 1);
      h = conv_same(h, P(b + ".conv.weight"), P(b + ".conv.bias"), s.fcn_filters[i], s.fcn_kernels[i]);
      h = batchnorm(h, P(b + ".bn.gamma"), P(b + ".bn.beta"), P(b + ".bn.running_mean"), P(b + ".bn.running_var"));
      h = relu(h);
      if (i < 2) h = squeeze_excite(h, P(b + ".se.squeeze"), P(b + ".se.excite"));
    }
    Vec pooled(h[0].size(), 0.0);
    for (const auto& row : h)
      for (std::size_t c = 0; c < row.size(); ++c) pooled[c] += row[c];
    for (auto& v : pooled) v /= static_cast<double>(h.size());
    // Channels become the steps of the recurrent branch.
    Seq shuffled(static_cast<std::size_t>(C), Vec(static_cast<std::size_t>(T)));
    for (int t = 0; t < T; ++t)
      for (int c = 0; c < C; ++c) shuffled[c][t] = x[t][c];
    const auto r = lstm_of(shuffled, "lstm", s.fcn_lstm_units, false);
    Vec feat = pooled;
    feat.insert(feat.end(), r.h.begin(), r.h.end());
    return softmax(dense(feat, P("output.weight"), P("output.bias")));
  }

  Seq h = relu(conv_same(x, P("conv1.weight"), P("conv1.bias"), s.conv_filters, s.conv_kernel));
  if (s.variant == Variant::crdnn_2lstm_sae) h = squeeze_excite(h, P("se1.squeeze"), P("se1.excite"));
  Vec feat;
  switch (s.variant) {
    case Variant::crdnn_1lstm:
      feat = lstm_of(h, "lstm1", s.rnn_units[0], false).h;
      break;
    case Variant::crdnn_2lstm:
    case Variant::crdnn_2lstm_sae: {
      const auto l1 = lstm_of(h, "lstm1", s.rnn_units[0], false);
      feat = lstm_of(l1.hs, "lstm2", s.rnn_units[1], false).h;
      break;
    }
    case Variant::crdnn_bilstm: {
      const auto l1 = lstm_of(h, "lstm1", s.rnn_units[0], false);
      const auto f = lstm_of(l1.hs, "bilstm.forward", s.rnn_units[1], false);
      const auto b = lstm_of(l1.hs, "bilstm.backward", s.rnn_units[1], true);
      feat = f.h;
      feat.insert(feat.end(), b.h.begin(), b.h.end());
      break;
    }
    default:
      throw std::runtime_error("reference: unknown variant");
  }
  Vec d = relu(dense(feat, P("dense1.weight"), P("dense1.bias")));
  d = relu(dense(d, P("dense2.weight"), P("dense2.bias")));
  return softmax(dense(d, P("output.weight"), P("output.bias")));
}

}  // namespace

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Seq conv_same(const Seq& x, const Vec& w, const Vec& b, int filters, int kernel) {
  const int T = static_cast<int>(x.size());
  const int C = static_cast<int>(x[0].size());
  const int left = (kernel - 1) / 2;
  Seq out(static_cast<std::size_t>(T), Vec(static_cast<std::size_t>(filters), 0.0));
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < filters; ++f) {
      double a = b[f];
      for (int k = 0; k < kernel; ++k) {
        const int src = t + k - left;
        if (src < 0 || src >= T) continue;
        for (int c = 0; c < C; ++c) a += w[(static_cast<std::size_t>(f) * kernel + k) * C + c] * x[src][c];
      }
      out[t][f] = a;
    }
  return out;
}

Seq relu(Seq x) {
  for (auto& row : x)
    for (auto& v : row) v = std::max(0.0, v);
  return x;
}

Vec relu(Vec x) {
  for (auto& v : x) v = std::max(0.0, v);
  return x;
}

Vec dense(const Vec& x, const Vec& w, const Vec& b) {
  Vec y(b.size());
  for (std::size_t o = 0; o < b.size(); ++o) {
    double a = b[o];
    for (std::size_t i = 0; i < x.size(); ++i) a += w[o * x.size() + i] * x[i];
    y[o] = a;
  }
  return y;
}

Vec softmax(const Vec& z) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  Vec p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (auto& v : p) v /= sum;
  return p;
}

void lstm_step(const Vec& x, Vec& h, Vec& c, const Vec& wx, const Vec& wh, const Vec& b) {
  const std::size_t u = h.size();
  const std::size_t in = x.size();
  Vec z(4 * u);
  for (std::size_t r = 0; r < 4 * u; ++r) {
    double a = b[r];
    for (std::size_t i = 0; i < in; ++i) a += wx[r * in + i] * x[i];
    for (std::size_t j = 0; j < u; ++j) a += wh[r * u + j] * h[j];
    z[r] = a;
  }
  for (std::size_t j = 0; j < u; ++j) {
    const double ig = sigmoid(z[j]);
    const double fg = sigmoid(z[u + j]);
    const double gg = std::tanh(z[2 * u + j]);
    const double og = sigmoid(z[3 * u + j]);
    c[j] = fg * c[j] + ig * gg;
    h[j] = og * std::tanh(c[j]);
  }
}

LstmOut lstm(const Seq& x, const Vec& wx, const Vec& wh, const Vec& b, int units, bool reverse) {
  LstmOut out;
  out.h.assign(static_cast<std::size_t>(units), 0.0);
  out.c.assign(static_cast<std::size_t>(units), 0.0);
  const int T = static_cast<int>(x.size());
  for (int s = 0; s < T; ++s) {
    const int t = reverse ? T - 1 - s : s;
    lstm_step(x[t], out.h, out.c, wx, wh, b);
    out.hs.push_back(out.h);
  }
  return out;
}

Vec forward(const loadcycle::nn::Model& model, const std::vector<float>& window) {
  return forward_impl(model, window);
}
Vec forward(const loadcycle::nn::Model64& model, const std::vector<double>& window) {
  return forward_impl(model, window);
}

int brute_mode(const std::vector<int>& labels) {
  int best = -1;
  int best_count = -1;
  int best_last = -1;
  for (int s = 0; s < 3; ++s) {
    int count = 0;
    int last = -1;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (labels[i] == s) {
        ++count;
        last = i;
      }
    if (count == 0) continue;
    if (count > best_count || (count == best_count && last > best_last)) {
      best = s;
      best_count = count;
      best_last = last;
    }
  }
  return best;
}

}  // namespace ref
