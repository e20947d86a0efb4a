#pragma once

#include <array>
#include <span>

#include "loadcycle/core/types.hpp"

namespace loadcycle::core {

ConfusionMatrix confusion(std::span<const WorkState> preds, std::span<const WorkState> truths);

// Micro-averaged F1. For single-label multiclass data this is trace / total.
double micro_f1(const ConfusionMatrix& cm);

struct ClassScores {
  std::array<double, kNumStates> precision{};
  std::array<double, kNumStates> recall{};
};
ClassScores per_class_scores(const ConfusionMatrix& cm);

// True iff loading and unloading are never confused in either direction.
bool cross_confusion_guard(const ConfusionMatrix& cm);

}  // namespace loadcycle::core
