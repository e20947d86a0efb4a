#pragma once

#include <vector>

#include "loadcycle/core/types.hpp"

namespace loadcycle::core {

// Per-channel mean and population std over every frame.
NormStats fit_normalizer(const std::vector<LabeledSequence>& train);

// Same statistics over the distinct frames covered by a window set; a frame
// is identified by (cycle_id, index), so overlapping windows count once.
NormStats fit_normalizer(const WindowSet& windows);

Window apply_normalizer(const Window& w, const NormStats& s);
LabeledSequence apply_normalizer(const LabeledSequence& seq, const NormStats& s);
WindowSet apply_normalizer(const WindowSet& ws, const NormStats& s);

}  // namespace loadcycle::core
