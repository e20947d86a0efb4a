#include "loadcycle/core/types.hpp"

#include <cmath>
#include <numeric>

#include "loadcycle/error.hpp"

namespace loadcycle::core {

WorkState state_from_index(int code) {
  if (code < 0 || code >= kNumStates) fail(ErrorCode::bad_format, "work state code out of range: " + std::to_string(code));
  return static_cast<WorkState>(code);
}

const char* state_name(WorkState s) {
  switch (s) {
    case WorkState::traveling: return "traveling";
    case WorkState::loading: return "loading";
    case WorkState::unloading: return "unloading";
  }
  return "?";
}

const char* channel_name(int channel) {
  static constexpr const char* names[kNumChannels] = {"p_bu", "v_veh", "u_js", "p_cc", "p_bo"};
  return (channel >= 0 && channel < kNumChannels) ? names[channel] : "?";
}

double TelemetryFrame::channel(int c) const {
  switch (c) {
    case 0: return p_bu;
    case 1: return v_veh;
    case 2: return u_js;
    case 3: return p_cc;
    case 4: return p_bo;
    default: fail(ErrorCode::shape_mismatch, "channel index out of range");
  }
}

void TelemetryFrame::set_channel(int c, double value) {
  switch (c) {
    case 0: p_bu = value; break;
    case 1: v_veh = value; break;
    case 2: u_js = value; break;
    case 3: p_cc = value; break;
    case 4: p_bo = value; break;
    default: fail(ErrorCode::shape_mismatch, "channel index out of range");
  }
}

std::array<double, kNumChannels> TelemetryFrame::channels() const { return {p_bu, v_veh, u_js, p_cc, p_bo}; }

void validate(const LabeledSequence& seq) {
  if (seq.frames.empty()) fail(ErrorCode::bad_format, "sequence has no frames");
  if (seq.frames.size() != seq.labels.size()) fail(ErrorCode::length_mismatch, "frames and labels differ in length");
  if (seq.frames.front().t < 0.0) fail(ErrorCode::bad_format, "negative timestamp");
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (!(seq.frames[i].t > seq.frames[i - 1].t)) fail(ErrorCode::bad_format, "timestamps not strictly increasing");
  }
}

void validate(const WindowConfig& cfg) {
  if (cfg.ws < 1) fail(ErrorCode::invalid_config, "window length must be positive");
  if (cfg.stride < 1) fail(ErrorCode::invalid_config, "stride must be >= 1");
  if (cfg.ws % 2 == 0) fail(ErrorCode::even_window, "window length must be odd");
  if (cfg.label_mode == LabelMode::tail) {
    if (cfg.tail_k != 3 && cfg.tail_k != 5) fail(ErrorCode::bad_tail, "tail length must be 3 or 5");
    if (cfg.tail_k > cfg.ws) fail(ErrorCode::bad_tail, "tail longer than window");
  }
}

void WindowSet::append(const WindowSet& other) {
  if (other.empty()) return;
  if (!windows.empty() && ws != other.ws) fail(ErrorCode::shape_mismatch, "window lengths differ");
  ws = other.ws;
  windows.insert(windows.end(), other.windows.begin(), other.windows.end());
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::uint64_t{0});
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (int i = 0; i < kNumStates; ++i) n += counts[i][i];
  return n;
}

std::uint64_t ConfusionMatrix::support(int truth) const {
  const auto& row = counts[static_cast<std::size_t>(truth)];
  return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::predicted(int pred) const {
  std::uint64_t n = 0;
  for (int i = 0; i < kNumStates; ++i) n += counts[i][static_cast<std::size_t>(pred)];
  return n;
}

}  // namespace loadcycle::core
