#pragma once

#include <cstddef>
#include <vector>

#include "loadcycle/core/metrics.hpp"
#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/model.hpp"

namespace loadcycle::train {

struct Metrics {
  core::ConfusionMatrix cm;
  double micro_f1 = 0.0;
  core::ClassScores per_class;
  bool guard_ok = true;
  double avg_test_ms_per_window = 0.0;
  std::size_t n_windows = 0;
};

struct EvalOptions {
  int batch = 512;
  // Single-window forwards timed for the latency figure; 0 skips timing.
  int timing_windows = 1000;
};

// Windows are raw; the model's normalization is applied when fitted.
Metrics evaluate(const nn::Model& model, const core::WindowSet& windows, const EvalOptions& opt = {});

std::vector<core::WorkState> predict_states(const nn::Model& model, const core::WindowSet& windows,
                                            int batch = 512);

Metrics metrics_from(const core::ConfusionMatrix& cm);

}  // namespace loadcycle::train
