#include "loadcycle/service/session.hpp"

#include <algorithm>
#include <cmath>

#include "loadcycle/error.hpp"

namespace loadcycle::service {

void LabelBuffer::begin_cycle(const std::string& cycle_id) {
  std::lock_guard lock(mu_);
  cycle_start_.push_back(frames_.size());
  cycle_id_.push_back(cycle_id);
}

void LabelBuffer::append(const core::TelemetryFrame& frame) {
  std::lock_guard lock(mu_);
  if (cycle_start_.empty()) {
    cycle_start_.push_back(0);
    cycle_id_.push_back("cycle");
  }
  frames_.push_back(frame);
  labels_.emplace_back();
}

void LabelBuffer::label(double t_start, double t_end, core::WorkState state) {
  if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_start < t_end))
    fail(ErrorCode::invalid_interval, "label interval needs t_start < t_end");
  std::lock_guard lock(mu_);
  if (frames_.empty()) fail(ErrorCode::out_of_range, "nothing has been streamed yet");
  const double first = frames_.front().t;
  const double end = frames_.back().t + core::kSamplePeriod;
  if (t_start < first - kTimeTolerance || t_end > end + kTimeTolerance)
    fail(ErrorCode::out_of_range, "label interval outside the streamed range");
  auto lo = std::lower_bound(frames_.begin(), frames_.end(), t_start - kTimeTolerance,
                             [](const core::TelemetryFrame& f, double t) { return f.t < t; });
  for (auto it = lo; it != frames_.end() && it->t < t_end - kTimeTolerance; ++it)
    labels_[static_cast<std::size_t>(it - frames_.begin())] = state;
}

std::size_t LabelBuffer::size() const {
  std::lock_guard lock(mu_);
  return frames_.size();
}

std::size_t LabelBuffer::labeled() const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto& l) { return l.has_value(); }));
}

std::size_t LabelBuffer::cycles() const {
  std::lock_guard lock(mu_);
  return cycle_start_.size();
}

std::optional<core::WorkState> LabelBuffer::label_at(std::size_t index) const {
  std::lock_guard lock(mu_);
  return index < labels_.size() ? labels_[index] : std::nullopt;
}

std::vector<core::LabeledSequence> LabelBuffer::labeled_cycles(core::Origin origin) const {
  std::lock_guard lock(mu_);
  std::vector<core::LabeledSequence> out;
  for (std::size_t c = 0; c < cycle_start_.size(); ++c) {
    const std::size_t begin = cycle_start_[c];
    const std::size_t end = c + 1 < cycle_start_.size() ? cycle_start_[c + 1] : frames_.size();
    if (begin >= end) continue;
    bool complete = true;
    for (std::size_t i = begin; i < end && complete; ++i) complete = labels_[i].has_value();
    if (!complete) continue;
    core::LabeledSequence seq;
    seq.origin = origin;
    seq.cycle_id = cycle_id_[c];
    seq.frames.assign(frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                      frames_.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t i = begin; i < end; ++i) seq.labels.push_back(*labels_[i]);
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<core::LabeledSequence> split_single_cycle(const core::LabeledSequence& seq, double val_fraction,
                                                      int min_length) {
  const auto n = seq.size();
  const auto cut = static_cast<std::size_t>(std::lround(static_cast<double>(n) * (1.0 - val_fraction)));
  const auto min_len = static_cast<std::size_t>(std::max(1, min_length));
  if (cut < min_len || n - cut < min_len) return {seq};
  core::LabeledSequence a = seq, b = seq;
  a.frames.resize(cut);
  a.labels.resize(cut);
  a.cycle_id = seq.cycle_id + "#train";
  b.frames.erase(b.frames.begin(), b.frames.begin() + static_cast<std::ptrdiff_t>(cut));
  b.labels.erase(b.labels.begin(), b.labels.begin() + static_cast<std::ptrdiff_t>(cut));
  b.cycle_id = seq.cycle_id + "#val";
  return {std::move(a), std::move(b)};
}

}  // namespace loadcycle::service
