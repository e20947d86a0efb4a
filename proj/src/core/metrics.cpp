#include "loadcycle/core/metrics.hpp"

#include "loadcycle/error.hpp"

namespace loadcycle::core {

ConfusionMatrix confusion(std::span<const WorkState> preds, std::span<const WorkState> truths) {
  if (preds.size() != truths.size()) fail(ErrorCode::length_mismatch, "predictions and truths differ in length");
  if (preds.empty()) fail(ErrorCode::length_mismatch, "no samples to compare");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) ++cm.counts[to_index(truths[i])][to_index(preds[i])];
  return cm;
}

double micro_f1(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) fail(ErrorCode::empty_matrix, "confusion matrix is empty");
  // Micro precision pools FP over all classes, micro recall pools FN; with one
  // label per sample both pools equal total - trace.
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (int k = 0; k < kNumStates; ++k) {
    tp += cm.counts[k][k];
    fp += cm.predicted(k) - cm.counts[k][k];
    fn += cm.support(k) - cm.counts[k][k];
  }
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (precision == recall) return precision;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

ClassScores per_class_scores(const ConfusionMatrix& cm) {
  ClassScores s;
  for (int k = 0; k < kNumStates; ++k) {
    const auto pred = cm.predicted(k);
    const auto sup = cm.support(k);
    s.precision[k] = pred ? static_cast<double>(cm.counts[k][k]) / static_cast<double>(pred) : 0.0;
    s.recall[k] = sup ? static_cast<double>(cm.counts[k][k]) / static_cast<double>(sup) : 0.0;
  }
  return s;
}

bool cross_confusion_guard(const ConfusionMatrix& cm) {
  constexpr int loading = to_index(WorkState::loading);
  constexpr int unloading = to_index(WorkState::unloading);
  return cm.counts[loading][unloading] == 0 && cm.counts[unloading][loading] == 0;
}

}  // namespace loadcycle::core
