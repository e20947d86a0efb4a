#include "loadcycle/train/regime.hpp"

#include <string>

#include "loadcycle/error.hpp"

namespace loadcycle::train {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::fs: return "fs";
    case Mode::ftf: return "ftf";
    case Mode::otf: return "otf";
  }
  return "?";
}

Mode mode_from_string(std::string_view s) {
  for (auto m : {Mode::fs, Mode::ftf, Mode::otf})
    if (to_string(m) == s) return m;
  fail(ErrorCode::invalid_config, "unknown training mode '" + std::string(s) + "'");
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::nd_fs: return "nd_fs";
    case Regime::nd_ftf: return "nd_ftf";
    case Regime::nd_otf: return "nd_otf";
    case Regime::nd_pd_fs: return "nd_pd_fs";
  }
  return "?";
}

Regime regime_from_string(std::string_view s) {
  for (auto r : {Regime::nd_fs, Regime::nd_ftf, Regime::nd_otf, Regime::nd_pd_fs})
    if (to_string(r) == s) return r;
  fail(ErrorCode::invalid_config, "unknown regime '" + std::string(s) + "'");
}

Mode mode_of(Regime r) {
  switch (r) {
    case Regime::nd_ftf: return Mode::ftf;
    case Regime::nd_otf: return Mode::otf;
    default: return Mode::fs;
  }
}

bool needs_base(Regime r) { return r == Regime::nd_ftf || r == Regime::nd_otf; }

template <typename T>
void apply_mode(nn::BasicModel<T>& model, Mode mode, double backbone_multiplier) {
  for (auto& p : model.params) {
    const bool backbone = p.group == nn::Group::backbone;
    p.trainable = !p.buffer() && !(mode == Mode::ftf && backbone);
    p.lr_multiplier = (mode == Mode::otf && backbone) ? backbone_multiplier : 1.0;
  }
}

template void apply_mode<float>(nn::BasicModel<float>&, Mode, double);
template void apply_mode<double>(nn::BasicModel<double>&, Mode, double);

}  // namespace loadcycle::train
