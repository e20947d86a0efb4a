#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace loadcycle::core {

// Integer codes are part of every file and wire format.
enum class WorkState : std::uint8_t { traveling = 0, loading = 1, unloading = 2 };

inline constexpr int kNumStates = 3;
inline constexpr int kNumChannels = 5;
inline constexpr double kSampleRateHz = 5.0;
inline constexpr double kSamplePeriod = 1.0 / kSampleRateHz;

inline constexpr int to_index(WorkState s) { return static_cast<int>(s); }
WorkState state_from_index(int code);  // throws bad_format outside 0..2
const char* state_name(WorkState s);

// Channel order used everywhere a frame becomes a vector.
enum class Channel : int { p_bu = 0, v_veh = 1, u_js = 2, p_cc = 3, p_bo = 4 };
const char* channel_name(int channel);

struct TelemetryFrame {
  double t = 0.0;      // seconds since session start
  double p_bu = 0.0;   // bucket pressure
  double v_veh = 0.0;  // vehicle velocity
  double u_js = 0.0;   // joystick direction, [-1, 1]
  double p_cc = 0.0;   // closed-circuit drivetrain pressure
  double p_bo = 0.0;   // fifth pressure channel

  double channel(int c) const;
  void set_channel(int c, double value);
  std::array<double, kNumChannels> channels() const;
};

enum class Origin : std::uint8_t { source_domain = 0, target_domain = 1 };

struct LabeledSequence {
  std::vector<TelemetryFrame> frames;
  std::vector<WorkState> labels;
  Origin origin = Origin::source_domain;
  std::string cycle_id;

  std::size_t size() const { return frames.size(); }
};

// Throws bad_format when the frame/label invariants do not hold.
void validate(const LabeledSequence& seq);

enum class LabelMode : std::uint8_t { majority, tail };

struct WindowConfig {
  int ws = 15;
  int stride = 1;
  LabelMode label_mode = LabelMode::majority;
  int tail_k = 3;  // only read in tail mode

  static WindowConfig majority(int ws, int stride = 1) { return {ws, stride, LabelMode::majority, 3}; }
  static WindowConfig tail(int ws, int k, int stride = 1) { return {ws, stride, LabelMode::tail, k}; }
};

// Throws even_window / bad_tail / invalid_config.
void validate(const WindowConfig& cfg);

struct Window {
  std::vector<float> values;  // [channel][time], kNumChannels x ws
  WorkState label = WorkState::traveling;
  std::size_t end_index = 0;
  std::string cycle_id;

  float at(int channel, int step, int ws) const { return values[static_cast<std::size_t>(channel * ws + step)]; }
};

struct WindowSet {
  int ws = 0;
  std::vector<Window> windows;

  std::size_t size() const { return windows.size(); }
  bool empty() const { return windows.empty(); }
  void append(const WindowSet& other);
};

struct NormStats {
  std::array<double, kNumChannels> mean{};
  std::array<double, kNumChannels> std{1.0, 1.0, 1.0, 1.0, 1.0};
  std::array<bool, kNumChannels> constant{};
  bool fitted = false;
};

struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumStates>, kNumStates> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t support(int truth) const;
  std::uint64_t predicted(int pred) const;
};

}  // namespace loadcycle::core
