#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "loadcycle/core/metrics.hpp"
#include "loadcycle/core/normalize.hpp"
#include "loadcycle/core/sequence_io.hpp"
#include "loadcycle/core/windowing.hpp"
#include "reference.hpp"

using namespace loadcycle;
using namespace loadcycle::core;
using testing::code_of;
using testing::runs;

TEST_CASE("state codes are fixed") {
  CHECK(to_index(WorkState::traveling) == 0);
  CHECK(to_index(WorkState::loading) == 1);
  CHECK(to_index(WorkState::unloading) == 2);
  CHECK(state_from_index(2) == WorkState::unloading);
  CHECK(code_of([] { state_from_index(3); }) == ErrorCode::bad_format);
}

TEST_CASE("segment counts and boundaries") {
  const auto cfg = WindowConfig::majority(15);
  CHECK(segment(testing::make_sequence(100, 1), cfg).size() == 86);

  const auto seq15 = testing::make_sequence(15, 2);
  const auto one = segment(seq15, cfg);
  REQUIRE(one.size() == 1);
  CHECK(one.windows[0].end_index == 14);
  for (int c = 0; c < kNumChannels; ++c)
    for (int t = 0; t < 15; ++t) CHECK(one.windows[0].at(c, t, 15) == static_cast<float>(seq15.frames[t].channel(c)));

  CHECK(code_of([] { segment(testing::make_sequence(14, 3), WindowConfig::majority(15)); }) ==
        ErrorCode::sequence_too_short);
}

TEST_CASE("segment end indices and stride") {
  const auto seq = testing::make_sequence(40, 4);
  for (int ws : {5, 9, 15, 25}) {
    const auto set = segment(seq, WindowConfig::majority(ws));
    REQUIRE(set.size() == 40 - static_cast<std::size_t>(ws) + 1);
    for (std::size_t i = 0; i < set.size(); ++i) CHECK(set.windows[i].end_index == i + static_cast<std::size_t>(ws) - 1);
  }
  const auto strided = segment(seq, WindowConfig::majority(5, 3));
  CHECK(strided.size() == 12);  // starts 0,3,...,33
  CHECK(strided.windows.back().end_index == 37);
}

TEST_CASE("window config validation") {
  CHECK(code_of([] { validate(WindowConfig::majority(14)); }) == ErrorCode::even_window);
  CHECK(code_of([] { validate(WindowConfig::tail(15, 4)); }) == ErrorCode::bad_tail);
  CHECK(code_of([] { validate(WindowConfig::majority(5, 0)); }) == ErrorCode::invalid_config);
  CHECK(code_of([] { validate(WindowConfig::tail(3, 5)); }) == ErrorCode::bad_tail);
  CHECK_NOTHROW(validate(WindowConfig::tail(5, 5)));
}

TEST_CASE("majority labeling examples") {
  CHECK(label_majority(runs({{7, 1}, {8, 0}})) == WorkState::traveling);
  CHECK(label_majority(runs({{15, 2}})) == WorkState::unloading);
  CHECK(label_majority(runs({{7, 0}, {1, 2}, {7, 1}})) == WorkState::loading);
  CHECK(code_of([] { label_majority(runs({{4, 0}})); }) == ErrorCode::even_window);
}

TEST_CASE("tail labeling examples") {
  CHECK(label_tail(runs({{12, 0}, {3, 1}}), 3) == WorkState::loading);
  CHECK(label_tail(runs({{15, 0}}), 5) == WorkState::traveling);
  CHECK(label_tail(testing::states({0, 1, 1}), 3) == WorkState::loading);
  CHECK(code_of([] { label_tail(runs({{15, 0}}), 4); }) == ErrorCode::bad_tail);
}

TEST_CASE("exhaustive ws=5 labeling against brute force") {
  // All 3^5 label tuples.
  std::vector<int> tuple(5, 0);
  int checked = 0;
  for (int code = 0; code < 243; ++code) {
    int v = code;
    for (int i = 0; i < 5; ++i) {
      tuple[i] = v % 3;
      v /= 3;
    }
    const auto labels = testing::states(tuple);
    const auto maj = label_majority(labels);
    CHECK(to_index(maj) == ref::brute_mode(tuple));

    // Permutation invariance whenever the mode is unique.
    std::array<int, 3> counts{};
    for (int x : tuple) ++counts[x];
    const int top = *std::max_element(counts.begin(), counts.end());
    if (std::count(counts.begin(), counts.end(), top) == 1) {
      auto perm = tuple;
      std::sort(perm.begin(), perm.end());
      do {
        CHECK(label_majority(testing::states(perm)) == maj);
      } while (std::next_permutation(perm.begin(), perm.end()));
    }

    for (int k : {3, 5}) {
      const auto tail = label_tail(labels, k);
      CHECK(to_index(tail) == ref::brute_mode(std::vector<int>(tuple.end() - k, tuple.end())));
      // Changing anything before the tail leaves the result alone.
      for (int i = 0; i < 5 - k; ++i)
        for (int s = 0; s < 3; ++s) {
          auto mutated = tuple;
          mutated[i] = s;
          CHECK(label_tail(testing::states(mutated), k) == tail);
        }
    }

    // Windowing a 5-sample sequence labels its single window the same way.
    const auto seq = testing::make_sequence(5, 9, "x", labels);
    CHECK(segment(seq, WindowConfig::majority(5)).windows[0].label == maj);
    CHECK(segment(seq, WindowConfig::tail(5, 3)).windows[0].label == label_tail(labels, 3));
    ++checked;
  }
  CHECK(checked == 243);
}

TEST_CASE("majority label is permutation invariant on random windows") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> w(15);
    for (auto& x : w) x = pick(rng);
    std::array<int, 3> counts{};
    for (int x : w) ++counts[x];
    const int top = *std::max_element(counts.begin(), counts.end());
    const auto m = label_majority(testing::states(w));
    CHECK(to_index(m) == ref::brute_mode(w));
    if (std::count(counts.begin(), counts.end(), top) > 1) continue;
    std::shuffle(w.begin(), w.end(), rng);
    CHECK(label_majority(testing::states(w)) == m);
  }
}

namespace {

LabeledSequence single_channel(std::vector<double> values) {
  LabeledSequence s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    TelemetryFrame f;
    f.t = static_cast<double>(i) * kSamplePeriod;
    f.p_bu = values[i];
    f.v_veh = static_cast<double>(i);
    s.frames.push_back(f);
    s.labels.push_back(WorkState::traveling);
  }
  return s;
}

}  // namespace

TEST_CASE("normalizer closed forms") {
  const auto s = fit_normalizer(std::vector{single_channel({1, 2, 3})});
  CHECK(s.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(s.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  CHECK_FALSE(s.constant[0]);

  const auto c = fit_normalizer(std::vector{single_channel({4, 4, 4})});
  CHECK(c.mean[0] == 4.0);
  CHECK(c.std[0] == 1.0);
  CHECK(c.constant[0]);

  const auto two = fit_normalizer(std::vector{single_channel({0, 0}), single_channel({2, 2})});
  CHECK(two.mean[0] == doctest::Approx(1.0));
  CHECK(two.std[0] == doctest::Approx(1.0));

  CHECK(code_of([] { fit_normalizer(std::vector<LabeledSequence>{}); }) == ErrorCode::empty_dataset);
}

TEST_CASE("apply normalizer") {
  NormStats s;
  s.mean[0] = 10;
  s.std[0] = 2;
  s.fitted = true;
  auto seq = single_channel({10, 12});
  const auto n = apply_normalizer(seq, s);
  CHECK(n.frames[0].p_bu == 0.0);
  CHECK(n.frames[1].p_bu == 1.0);

  std::vector<LabeledSequence> train;
  for (int i = 0; i < 4; ++i) train.push_back(testing::make_sequence(50, 100 + i));
  for (auto& seq2 : train)
    for (auto& f : seq2.frames) f.p_bo = 3.0;  // constant channel
  const auto fitted = fit_normalizer(train);
  std::vector<LabeledSequence> normalized;
  for (const auto& q : train) normalized.push_back(apply_normalizer(q, fitted));
  const auto again = fit_normalizer(normalized);
  for (int c = 0; c < kNumChannels; ++c) {
    if (fitted.constant[c]) continue;
    CHECK(std::abs(again.mean[c]) < 1e-6);
    CHECK(std::abs(again.std[c] - 1.0) < 1e-6);
  }
  CHECK(fitted.constant[static_cast<int>(Channel::p_bo)]);
}

TEST_CASE("window-set normalizer counts overlapping frames once") {
  const auto seq = testing::make_sequence(30, 8);
  const auto windows = segment(seq, WindowConfig::majority(5));
  const auto a = fit_normalizer(windows);
  const auto b = fit_normalizer(std::vector{seq});
  for (int c = 0; c < kNumChannels; ++c) {
    // Windows hold float copies of the frame values.
    CHECK(a.mean[c] == doctest::Approx(b.mean[c]).epsilon(1e-6));
    CHECK(a.std[c] == doctest::Approx(b.std[c]).epsilon(1e-6));
  }
}

TEST_CASE("confusion and micro F1") {
  const auto cm = confusion(runs({{10, 0}}), runs({{10, 0}}));
  CHECK(cm.counts[0][0] == 10);
  CHECK(cm.total() == 10);

  const auto one = confusion(testing::states({2}), testing::states({1}));
  CHECK(one.counts[1][2] == 1);
  CHECK(code_of([] { confusion({}, {}); }) == ErrorCode::length_mismatch);
  CHECK(code_of([] { confusion(testing::states({0}), testing::states({0, 1})); }) == ErrorCode::length_mismatch);

  ConfusionMatrix diag;
  diag.counts = {{{50, 0, 0}, {0, 30, 0}, {0, 0, 20}}};
  CHECK(micro_f1(diag) == 1.0);

  ConfusionMatrix m;
  m.counts = {{{45, 5, 0}, {3, 27, 0}, {0, 0, 20}}};
  CHECK(micro_f1(m) == doctest::Approx(0.92).epsilon(1e-15));

  ConfusionMatrix wrong;
  wrong.counts[0][1] = 100;
  CHECK(micro_f1(wrong) == 0.0);
  CHECK(code_of([] { micro_f1(ConfusionMatrix{}); }) == ErrorCode::empty_matrix);
}

TEST_CASE("micro F1 equals trace over total on random matrices") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cell(0, 40);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm;
    for (auto& row : cm.counts)
      for (auto& v : row) v = static_cast<std::uint64_t>(cell(rng) * (trial % 7 == 0 ? 0 : 1));
    cm.counts[trial % 3][trial % 3] += 1;
    CHECK(micro_f1(cm) == doctest::Approx(static_cast<double>(cm.trace()) / static_cast<double>(cm.total())).epsilon(1e-14));
    CHECK(cross_confusion_guard(cm) == (cm.counts[1][2] + cm.counts[2][1] == 0));
  }
}

TEST_CASE("confusion rows equal class support") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> pick(0, 2);
  std::vector<WorkState> p, t;
  std::array<std::uint64_t, 3> support{};
  for (int i = 0; i < 1000; ++i) {
    p.push_back(static_cast<WorkState>(pick(rng)));
    t.push_back(static_cast<WorkState>(pick(rng)));
    ++support[to_index(t.back())];
  }
  const auto cm = confusion(p, t);
  for (int k = 0; k < 3; ++k) CHECK(cm.support(k) == support[k]);
  CHECK(cm.total() == 1000);
}

TEST_CASE("cross confusion guard") {
  ConfusionMatrix diag;
  diag.counts = {{{5, 0, 0}, {0, 5, 0}, {0, 0, 5}}};
  CHECK(cross_confusion_guard(diag));
  auto bad = diag;
  bad.counts[1][2] = 1;
  CHECK_FALSE(cross_confusion_guard(bad));
  auto bad2 = diag;
  bad2.counts[2][1] = 3;
  CHECK_FALSE(cross_confusion_guard(bad2));
  auto travel = diag;
  travel.counts[0][1] = 5;
  travel.counts[2][0] = 4;
  CHECK(cross_confusion_guard(travel));
}

TEST_CASE("per-class scores") {
  ConfusionMatrix m;
  m.counts = {{{45, 5, 0}, {3, 27, 0}, {0, 0, 20}}};
  const auto s = per_class_scores(m);
  CHECK(s.precision[0] == doctest::Approx(45.0 / 48.0));
  CHECK(s.recall[0] == doctest::Approx(45.0 / 50.0));
  CHECK(s.precision[1] == doctest::Approx(27.0 / 32.0));
  CHECK(s.recall[2] == 1.0);
}

TEST_CASE("sequence file round trip") {
  auto seq = testing::make_sequence(40, 13, "r");
  seq.frames[3].p_bu = 0.1 + 0.2;  // needs all 17 digits
  std::stringstream buf;
  write_sequence(buf, seq);
  std::string header;
  std::getline(std::stringstream(buf.str()), header);
  CHECK(header == "# loadcycle-v1 rate=5");
  const auto back = read_sequence(buf, Origin::target_domain, "r");
  REQUIRE(back.size() == seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    for (int c = 0; c < kNumChannels; ++c) CHECK(back.frames[i].channel(c) == seq.frames[i].channel(c));
    CHECK(back.frames[i].t == seq.frames[i].t);
    CHECK(back.labels[i] == seq.labels[i]);
  }
  CHECK(back.origin == Origin::target_domain);
}

TEST_CASE("sequence file rejects bad input") {
  auto read = [](const std::string& text) {
    std::istringstream in(text);
    return read_sequence(in, Origin::source_domain, "x");
  };
  CHECK(code_of([&] { read("t,p\n"); }) == ErrorCode::bad_format);
  CHECK(code_of([&] { read("# loadcycle-v1 rate=5\n0,1,2,3,4,5\n"); }) == ErrorCode::bad_format);
  CHECK(code_of([&] { read("# loadcycle-v1 rate=5\n0,1,2,3,4,5,7\n"); }) == ErrorCode::bad_format);
  CHECK(code_of([&] { read("# loadcycle-v1 rate=5\n0,1,2,0.5,4,5,1\n0,1,2,0.5,4,5,1\n"); }) == ErrorCode::bad_format);
  CHECK(code_of([&] { read("# loadcycle-v1 rate=5\n0,abc,2,0.5,4,5,1\n"); }) == ErrorCode::bad_format);
}

TEST_CASE("sequence invariants") {
  auto seq = testing::make_sequence(5, 1);
  CHECK_NOTHROW(validate(seq));
  auto shorter = seq;
  shorter.labels.pop_back();
  CHECK(code_of([&] { validate(shorter); }) == ErrorCode::length_mismatch);
  auto backwards = seq;
  backwards.frames[2].t = backwards.frames[1].t;
  CHECK(code_of([&] { validate(backwards); }) == ErrorCode::bad_format);
  CHECK(code_of([] { validate(LabeledSequence{}); }) == ErrorCode::bad_format);
}

TEST_CASE("onset delays") {
  // 10 e0 then 10 e1; majority windows of 5 report e1 from the window ending at 12.
  const auto seq = testing::make_sequence(20, 3, "d", runs({{10, 0}, {10, 1}}));
  const auto set = segment(seq, WindowConfig::majority(5));
  std::vector<WorkState> reported;
  for (const auto& w : set.windows) reported.push_back(w.label);
  const auto d = onset_delays(seq, set, reported);
  REQUIRE(d.size() == 1);
  CHECK(d[0].onset_index == 10);
  CHECK(d[0].state == WorkState::loading);
  CHECK(d[0].delay == 2);

  const auto tail = segment(seq, WindowConfig::tail(5, 3));
  reported.clear();
  for (const auto& w : tail.windows) reported.push_back(w.label);
  CHECK(onset_delays(seq, tail, reported)[0].delay == 1);
}
