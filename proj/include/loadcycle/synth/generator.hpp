#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "loadcycle/core/types.hpp"

namespace loadcycle::synth {

enum class ImplementProfile { smooth, stepped };

// standard: labels follow the state chain. dpbu_fluctuation: near a state
// change, loading/unloading samples are called traveling for as long as the
// bucket pressure is still fluctuating.
enum class LabelConvention { standard, dpbu_fluctuation };

struct DurationRange {
  double min_s = 1.0;
  double max_s = 1.0;
};

struct DomainParams {
  double joystick_style = 1.0;  // ramp steepness of u_js
  double shovel_scale = 1.0;    // multiplies p_bu and p_bo
  ImplementProfile implement_profile = ImplementProfile::smooth;
  LabelConvention label_convention = LabelConvention::standard;
  std::array<double, core::kNumChannels> noise_std{1.0, 0.05, 0.02, 2.0, 1.0};
  DurationRange traveling{7.0, 15.0};
  DurationRange loading{4.0, 7.0};
  DurationRange unloading{2.5, 4.5};
  // Half-width of the neighbourhood around a state change in which the
  // fluctuation convention may relabel.
  double transition_radius_s = 2.0;
  core::Origin origin = core::Origin::source_domain;
  int default_cycles = 1;
};

enum class Preset { source, target };

std::string_view to_string(Preset p);
Preset preset_from_string(std::string_view s);  // throws invalid_config
DomainParams preset(Preset p);

inline constexpr int kSourceCycles = 119;
inline constexpr int kTargetCycles = 24;

// Throws invalid_config when a scalar is non-positive or a range is empty.
void validate(const DomainParams& p);

// One Y cycle: traveling, loading, traveling, unloading, traveling. Time
// starts at t0 and advances by the sample period.
core::LabeledSequence generate_cycle(const DomainParams& params, std::uint64_t seed, double t0 = 0.0,
                                     const std::string& cycle_id = "cycle");

// Cycles get independent sub-seeds and ids "<prefix>_NNN".
std::vector<core::LabeledSequence> generate_dataset(int n_cycles, const DomainParams& params, std::uint64_t seed,
                                                    const std::string& prefix = "cycle");

// First difference of p_bu; the first sample gets 0.
std::vector<double> bucket_pressure_rate(const core::LabeledSequence& seq);

// Relabels in place per the fluctuation convention, given the chain labels.
void apply_fluctuation_convention(core::LabeledSequence& seq, double transition_radius_s);

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace loadcycle::synth
