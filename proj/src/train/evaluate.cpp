#include "loadcycle/train/evaluate.hpp"

#include <algorithm>
#include <chrono>

#include "loadcycle/core/normalize.hpp"
#include "loadcycle/error.hpp"
#include "loadcycle/nn/loss.hpp"

namespace loadcycle::train {

namespace {

core::WindowSet normalized(const nn::Model& model, const core::WindowSet& windows) {
  return model.norm.fitted ? core::apply_normalizer(windows, model.norm) : windows;
}

std::vector<core::WorkState> predict_normalized(const nn::Model& model, const core::WindowSet& set, int batch) {
  std::vector<core::WorkState> out;
  out.reserve(set.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += static_cast<std::size_t>(batch)) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + static_cast<std::size_t>(batch)); ++i)
      idx.push_back(i);
    const auto b = nn::make_batch<float>(set, idx);
    for (int k : nn::predict(model, b.x)) out.push_back(core::state_from_index(k));
  }
  return out;
}

}  // namespace

std::vector<core::WorkState> predict_states(const nn::Model& model, const core::WindowSet& windows, int batch) {
  if (windows.empty()) fail(ErrorCode::empty_dataset, "no windows to predict");
  return predict_normalized(model, normalized(model, windows), std::max(1, batch));
}

Metrics metrics_from(const core::ConfusionMatrix& cm) {
  Metrics m;
  m.cm = cm;
  m.micro_f1 = core::micro_f1(cm);
  m.per_class = core::per_class_scores(cm);
  m.guard_ok = core::cross_confusion_guard(cm);
  m.n_windows = cm.total();
  return m;
}

Metrics evaluate(const nn::Model& model, const core::WindowSet& windows, const EvalOptions& opt) {
  if (windows.empty()) fail(ErrorCode::empty_dataset, "no windows to evaluate");
  const auto set = normalized(model, windows);
  const auto preds = predict_normalized(model, set, std::max(1, opt.batch));
  std::vector<core::WorkState> truths;
  truths.reserve(set.size());
  for (const auto& w : set.windows) truths.push_back(w.label);
  Metrics m = metrics_from(core::confusion(preds, truths));

  if (opt.timing_windows > 0) {
    // One window per forward, cycling through the set, as on the device.
    std::vector<nn::Batch> singles;
    const std::size_t distinct = std::min<std::size_t>(set.size(), static_cast<std::size_t>(opt.timing_windows));
    for (std::size_t i = 0; i < distinct; ++i) {
      const std::size_t one[] = {i};
      singles.push_back(nn::make_batch<float>(set, one));
    }
    volatile float sink = 0.0f;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < opt.timing_windows; ++i) {
      const auto p = nn::forward(model, singles[static_cast<std::size_t>(i) % distinct].x);
      sink = sink + p[0];
    }
    const auto t1 = std::chrono::steady_clock::now();
    m.avg_test_ms_per_window =
        std::chrono::duration<double, std::milli>(t1 - t0).count() / static_cast<double>(opt.timing_windows);
  }
  return m;
}

}  // namespace loadcycle::train
