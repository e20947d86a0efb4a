#include "loadcycle/core/normalize.hpp"

#include <cmath>
#include <map>
#include <set>

#include "loadcycle/error.hpp"

namespace loadcycle::core {

namespace {

// Two-pass accumulation keeps the fitted moments exact enough for the
// refit-after-normalize property.
class MomentAccumulator {
 public:
  void add(const std::array<double, kNumChannels>& x) { samples_.push_back(x); }

  NormStats finish() const {
    if (samples_.empty()) fail(ErrorCode::empty_dataset, "no frames to fit a normalizer on");
    NormStats s;
    const auto n = static_cast<double>(samples_.size());
    for (int c = 0; c < kNumChannels; ++c) {
      double sum = 0.0;
      for (const auto& x : samples_) sum += x[c];
      const double mean = sum / n;
      double ss = 0.0;
      for (const auto& x : samples_) ss += (x[c] - mean) * (x[c] - mean);
      const double sd = std::sqrt(ss / n);
      s.mean[c] = mean;
      s.constant[c] = !(sd > 0.0);
      s.std[c] = s.constant[c] ? 1.0 : sd;
    }
    s.fitted = true;
    return s;
  }

 private:
  std::vector<std::array<double, kNumChannels>> samples_;
};

}  // namespace

NormStats fit_normalizer(const std::vector<LabeledSequence>& train) {
  MomentAccumulator acc;
  for (const auto& seq : train)
    for (const auto& f : seq.frames) acc.add(f.channels());
  return acc.finish();
}

NormStats fit_normalizer(const WindowSet& windows) {
  MomentAccumulator acc;
  std::map<std::string, std::set<std::size_t>> seen;
  const auto ws = static_cast<std::size_t>(windows.ws);
  for (const auto& w : windows.windows) {
    auto& covered = seen[w.cycle_id];
    const std::size_t start = w.end_index + 1 - ws;
    for (std::size_t j = 0; j < ws; ++j) {
      if (!covered.insert(start + j).second) continue;
      std::array<double, kNumChannels> x{};
      for (int c = 0; c < kNumChannels; ++c) x[c] = w.values[c * ws + j];
      acc.add(x);
    }
  }
  return acc.finish();
}

Window apply_normalizer(const Window& w, const NormStats& s) {
  Window out = w;
  const std::size_t ws = w.values.size() / kNumChannels;
  for (int c = 0; c < kNumChannels; ++c) {
    for (std::size_t j = 0; j < ws; ++j) {
      auto& v = out.values[c * ws + j];
      v = static_cast<float>((static_cast<double>(v) - s.mean[c]) / s.std[c]);
    }
  }
  return out;
}

LabeledSequence apply_normalizer(const LabeledSequence& seq, const NormStats& s) {
  LabeledSequence out = seq;
  for (auto& f : out.frames)
    for (int c = 0; c < kNumChannels; ++c) f.set_channel(c, (f.channel(c) - s.mean[c]) / s.std[c]);
  return out;
}

WindowSet apply_normalizer(const WindowSet& set, const NormStats& s) {
  WindowSet out;
  out.ws = set.ws;
  out.windows.reserve(set.size());
  for (const auto& w : set.windows) out.windows.push_back(apply_normalizer(w, s));
  return out;
}

}  // namespace loadcycle::core
