#include "loadcycle/nn/spec.hpp"

#include <algorithm>

#include "loadcycle/error.hpp"

namespace loadcycle::nn {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::crdnn_1lstm: return "crdnn_1lstm";
    case Variant::crdnn_2lstm: return "crdnn_2lstm";
    case Variant::crdnn_bilstm: return "crdnn_bilstm";
    case Variant::crdnn_2lstm_sae: return "crdnn_2lstm_sae";
    case Variant::lstm_fcn: return "lstm_fcn";
    case Variant::linear_softmax: return "linear_softmax";
  }
  return "?";
}

Variant variant_from_string(std::string_view name) {
  for (auto v : {Variant::crdnn_1lstm, Variant::crdnn_2lstm, Variant::crdnn_bilstm, Variant::crdnn_2lstm_sae,
                 Variant::lstm_fcn, Variant::linear_softmax}) {
    if (to_string(v) == name) return v;
  }
  fail(ErrorCode::unsupported_spec, "unknown model variant '" + std::string(name) + "'");
}

ModelSpec ModelSpec::defaults(Variant v, int ws) {
  ModelSpec s;
  s.variant = v;
  s.ws = ws;
  return s;
}

ModelSpec ModelSpec::reduced() const {
  ModelSpec s = *this;
  s.conv_filters = std::min(conv_filters, 6);
  s.rnn_units = {std::min(rnn_units[0], 6), std::min(rnn_units[1], 6)};
  s.dense_units = {std::min(dense_units[0], 8), std::min(dense_units[1], 8)};
  s.fcn_filters = {std::min(fcn_filters[0], 8), std::min(fcn_filters[1], 8), std::min(fcn_filters[2], 8)};
  s.fcn_lstm_units = std::min(fcn_lstm_units, 4);
  s.se_reduction = std::min(se_reduction, 4);
  return s;
}

void validate(const ModelSpec& s) {
  auto positive = [](int v) { return v >= 1; };
  bool ok = positive(s.ws) && positive(s.in_channels) && s.n_classes >= 2 && positive(s.conv_filters) &&
            positive(s.conv_kernel) && positive(s.rnn_units[0]) && positive(s.rnn_units[1]) &&
            positive(s.dense_units[0]) && positive(s.dense_units[1]) && positive(s.fcn_lstm_units) &&
            positive(s.se_reduction);
  for (int i = 0; i < 3; ++i) ok = ok && positive(s.fcn_filters[i]) && positive(s.fcn_kernels[i]);
  if (!ok) fail(ErrorCode::unsupported_spec, "model sizes must be positive");
  if (static_cast<int>(s.variant) > static_cast<int>(Variant::linear_softmax))
    fail(ErrorCode::unsupported_spec, "unknown model variant");
  if (s.variant != Variant::lstm_fcn && s.variant != Variant::linear_softmax && s.conv_kernel > s.ws)
    fail(ErrorCode::unsupported_spec, "convolution kernel longer than the window");
}

}  // namespace loadcycle::nn
