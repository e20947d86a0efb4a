#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace loadcycle::nn {

enum class Variant : std::uint8_t {
  crdnn_1lstm = 0,
  crdnn_2lstm = 1,
  crdnn_bilstm = 2,  // one LSTM followed by one bidirectional LSTM
  crdnn_2lstm_sae = 3,
  lstm_fcn = 4,
  linear_softmax = 5,  // flatten + softmax; diagnostic baseline for gradient checks
};

// The five compared architectures, without the diagnostic baseline.
inline constexpr std::array<Variant, 5> kCoreVariants = {Variant::crdnn_1lstm, Variant::crdnn_2lstm,
                                                         Variant::crdnn_bilstm, Variant::crdnn_2lstm_sae,
                                                         Variant::lstm_fcn};

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);  // throws unsupported_spec

struct ModelSpec {
  Variant variant = Variant::crdnn_2lstm;
  int ws = 15;
  int in_channels = 5;
  int n_classes = 3;

  // CRDNN family
  int conv_filters = 10;
  int conv_kernel = 5;
  std::array<int, 2> rnn_units{32, 32};
  std::array<int, 2> dense_units{32, 32};

  // LSTM-FCN
  std::array<int, 3> fcn_filters{128, 256, 128};
  std::array<int, 3> fcn_kernels{8, 5, 3};
  int fcn_lstm_units = 8;

  int se_reduction = 16;

  static ModelSpec defaults(Variant v, int ws);

  // Same topology with every width capped; used by the gradient oracle.
  ModelSpec reduced() const;

  bool operator==(const ModelSpec&) const = default;
};

// Throws unsupported_spec for out-of-range sizes.
void validate(const ModelSpec& spec);

}  // namespace loadcycle::nn
