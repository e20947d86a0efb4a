#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"

namespace loadcycle::service {

// Streamed telemetry of one session with the operator's labels. Streaming
// and labeling happen on different threads, so every member locks.
class LabelBuffer {
 public:
  // Timestamps closer than this count as equal.
  static constexpr double kTimeTolerance = 1e-6;

  void begin_cycle(const std::string& cycle_id);
  void append(const core::TelemetryFrame& frame);

  // Labels every buffered sample with t in [t_start, t_end); later calls
  // overwrite earlier ones. Throws invalid_interval or out_of_range.
  void label(double t_start, double t_end, core::WorkState state);

  std::size_t size() const;
  std::size_t labeled() const;
  std::size_t cycles() const;
  std::optional<core::WorkState> label_at(std::size_t index) const;

  // Streamed cycles whose every sample carries a label.
  std::vector<core::LabeledSequence> labeled_cycles(core::Origin origin) const;

 private:
  mutable std::mutex mu_;
  std::vector<core::TelemetryFrame> frames_;
  std::vector<std::optional<core::WorkState>> labels_;
  std::vector<std::size_t> cycle_start_;
  std::vector<std::string> cycle_id_;
};

// A single labeled cycle cannot be split by cycle; cut it in time instead
// (first 80% for training) so validation still sees unseen samples.
std::vector<core::LabeledSequence> split_single_cycle(const core::LabeledSequence& seq, double val_fraction,
                                                      int min_length);

}  // namespace loadcycle::service
