#pragma once

#include <string_view>

#include "loadcycle/nn/model.hpp"

namespace loadcycle::train {

// fs: every tensor trainable at full rate. ftf: backbone frozen, head
// trainable. otf: everything trainable, backbone at a reduced rate.
enum class Mode { fs, ftf, otf };

// The four rows of the transfer comparison.
enum class Regime { nd_fs, nd_ftf, nd_otf, nd_pd_fs };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);  // fs|ftf|otf, throws invalid_config
std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);  // nd_fs|nd_ftf|nd_otf|nd_pd_fs
Mode mode_of(Regime r);
bool needs_base(Regime r);

inline constexpr double kDefaultBackboneMultiplier = 0.1;

// Buffers stay non-trainable in every mode.
template <typename T>
void apply_mode(nn::BasicModel<T>& model, Mode mode, double backbone_multiplier = kDefaultBackboneMultiplier);

}  // namespace loadcycle::train
