#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "loadcycle/core/types.hpp"
#include "loadcycle/error.hpp"

namespace testing {

using loadcycle::core::WorkState;

inline std::vector<WorkState> states(const std::vector<int>& codes) {
  std::vector<WorkState> out;
  for (int c : codes) out.push_back(static_cast<WorkState>(c));
  return out;
}

inline std::vector<WorkState> runs(std::initializer_list<std::pair<int, int>> parts) {
  std::vector<WorkState> out;
  for (auto [count, code] : parts) out.insert(out.end(), static_cast<std::size_t>(count), static_cast<WorkState>(code));
  return out;
}

// Sequence of n frames at 5 Hz with seeded channel values.
inline loadcycle::core::LabeledSequence make_sequence(std::size_t n, std::uint64_t seed, std::string id = "c",
                                                      std::vector<WorkState> labels = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  loadcycle::core::LabeledSequence s;
  s.cycle_id = std::move(id);
  for (std::size_t i = 0; i < n; ++i) {
    loadcycle::core::TelemetryFrame f;
    f.t = static_cast<double>(i) * loadcycle::core::kSamplePeriod;
    for (int c = 0; c < loadcycle::core::kNumChannels; ++c) f.set_channel(c, g(rng));
    f.u_js = std::clamp(f.u_js, -1.0, 1.0);
    s.frames.push_back(f);
    s.labels.push_back(labels.empty() ? static_cast<WorkState>(i % 3) : labels[i]);
  }
  return s;
}

inline loadcycle::ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const loadcycle::Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return loadcycle::ErrorCode::bad_message;
}

}  // namespace testing
