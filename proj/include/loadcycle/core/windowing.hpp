#pragma once

#include <span>
#include <vector>

#include "loadcycle/core/types.hpp"

namespace loadcycle::core {

// Modal label of an odd-length window. Ties go to the tied state whose last
// occurrence is latest.
WorkState label_majority(std::span<const WorkState> labels);

// Modal label of the last k samples (k in {3, 5}), same tie rule.
WorkState label_tail(std::span<const WorkState> labels, int k);

WorkState label_window(std::span<const WorkState> labels, const WindowConfig& cfg);

// Windows start at 0, stride, 2*stride, ... and each covers ws samples.
WindowSet segment(const LabeledSequence& seq, const WindowConfig& cfg);
WindowSet segment_all(const std::vector<LabeledSequence>& seqs, const WindowConfig& cfg);

// For every state onset s (labels[s] != labels[s-1]) the delay in samples until
// the first window ending at or after s reports that state; onsets never
// reported are skipped.
struct OnsetDelay {
  std::size_t onset_index = 0;
  WorkState state = WorkState::traveling;
  std::size_t delay = 0;
};
std::vector<OnsetDelay> onset_delays(const LabeledSequence& seq, const WindowSet& windows,
                                     std::span<const WorkState> reported);

}  // namespace loadcycle::core
