#include "loadcycle/core/windowing.hpp"

#include <array>

#include "loadcycle/error.hpp"

namespace loadcycle::core {

namespace {

WorkState modal_label(std::span<const WorkState> labels) {
  std::array<int, kNumStates> count{};
  std::array<std::ptrdiff_t, kNumStates> last{-1, -1, -1};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int s = to_index(labels[i]);
    ++count[s];
    last[s] = static_cast<std::ptrdiff_t>(i);
  }
  int best = 0;
  for (int s = 1; s < kNumStates; ++s) {
    if (count[s] > count[best] || (count[s] == count[best] && last[s] > last[best])) best = s;
  }
  return static_cast<WorkState>(best);
}

}  // namespace

WorkState label_majority(std::span<const WorkState> labels) {
  if (labels.empty()) fail(ErrorCode::empty_dataset, "empty label window");
  if (labels.size() % 2 == 0) fail(ErrorCode::even_window, "majority labeling needs an odd window");
  return modal_label(labels);
}

WorkState label_tail(std::span<const WorkState> labels, int k) {
  if (k != 3 && k != 5) fail(ErrorCode::bad_tail, "tail length must be 3 or 5");
  if (static_cast<std::size_t>(k) > labels.size()) fail(ErrorCode::bad_tail, "tail longer than window");
  return modal_label(labels.subspan(labels.size() - static_cast<std::size_t>(k)));
}

WorkState label_window(std::span<const WorkState> labels, const WindowConfig& cfg) {
  return cfg.label_mode == LabelMode::majority ? label_majority(labels) : label_tail(labels, cfg.tail_k);
}

WindowSet segment(const LabeledSequence& seq, const WindowConfig& cfg) {
  validate(cfg);
  if (seq.frames.size() != seq.labels.size()) fail(ErrorCode::length_mismatch, "frames and labels differ in length");
  const auto n = seq.frames.size();
  const auto ws = static_cast<std::size_t>(cfg.ws);
  if (n < ws) {
    fail(ErrorCode::sequence_too_short,
         "sequence of " + std::to_string(n) + " samples is shorter than window " + std::to_string(ws));
  }
  WindowSet out;
  out.ws = cfg.ws;
  out.windows.reserve((n - ws) / static_cast<std::size_t>(cfg.stride) + 1);
  const std::span<const WorkState> labels(seq.labels);
  for (std::size_t start = 0; start + ws <= n; start += static_cast<std::size_t>(cfg.stride)) {
    Window w;
    w.values.resize(kNumChannels * ws);
    for (std::size_t j = 0; j < ws; ++j) {
      const auto ch = seq.frames[start + j].channels();
      for (int c = 0; c < kNumChannels; ++c) w.values[c * ws + j] = static_cast<float>(ch[c]);
    }
    w.label = label_window(labels.subspan(start, ws), cfg);
    w.end_index = start + ws - 1;
    w.cycle_id = seq.cycle_id;
    out.windows.push_back(std::move(w));
  }
  return out;
}

WindowSet segment_all(const std::vector<LabeledSequence>& seqs, const WindowConfig& cfg) {
  WindowSet out;
  out.ws = cfg.ws;
  for (const auto& s : seqs) out.append(segment(s, cfg));
  return out;
}

std::vector<OnsetDelay> onset_delays(const LabeledSequence& seq, const WindowSet& windows,
                                     std::span<const WorkState> reported) {
  if (reported.size() != windows.size()) fail(ErrorCode::length_mismatch, "one reported state per window expected");
  std::vector<OnsetDelay> out;
  for (std::size_t s = 1; s < seq.labels.size(); ++s) {
    if (seq.labels[s] == seq.labels[s - 1]) continue;
    std::size_t seg_end = s + 1;
    while (seg_end < seq.labels.size() && seq.labels[seg_end] == seq.labels[s]) ++seg_end;
    const auto ws = static_cast<std::size_t>(windows.ws);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      const auto& w = windows.windows[i];
      if (w.cycle_id != seq.cycle_id || w.end_index < s) continue;
      if (w.end_index + 1 - ws >= seg_end) break;  // window no longer touches the segment
      if (reported[i] == seq.labels[s]) {
        out.push_back({s, seq.labels[s], w.end_index - s});
        break;
      }
    }
  }
  return out;
}

}  // namespace loadcycle::core
