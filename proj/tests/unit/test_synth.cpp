#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "loadcycle/synth/generator.hpp"

using namespace loadcycle;
using namespace loadcycle::synth;
using core::WorkState;
using testing::code_of;

namespace {

DomainParams fixed_params() {
  auto p = preset(Preset::source);
  p.noise_std = {0, 0, 0, 0, 0};
  p.traveling = {8.0, 8.0};
  p.loading = {5.0, 5.0};
  p.unloading = {3.0, 3.0};
  return p;
}

std::vector<std::size_t> boundaries(const std::vector<WorkState>& labels) {
  std::vector<std::size_t> b;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] != labels[i - 1]) b.push_back(i);
  return b;
}

bool same_bits(const core::LabeledSequence& a, const core::LabeledSequence& b) {
  if (a.size() != b.size() || a.labels != b.labels) return false;
  return std::memcmp(a.frames.data(), b.frames.data(), a.size() * sizeof(core::TelemetryFrame)) == 0;
}

}  // namespace

TEST_CASE("fixed durations give the exact five-segment chain") {
  const auto seq = generate_cycle(fixed_params(), 4);
  const std::vector<std::pair<WorkState, std::size_t>> expected = {
      {WorkState::traveling, 40}, {WorkState::loading, 25}, {WorkState::traveling, 40},
      {WorkState::unloading, 15}, {WorkState::traveling, 40}};
  std::size_t i = 0;
  for (auto [state, n] : expected)
    for (std::size_t k = 0; k < n; ++k, ++i) {
      REQUIRE(i < seq.labels.size());
      CHECK(seq.labels[i] == state);
    }
  CHECK(i == seq.size());
}

TEST_CASE("generation is deterministic") {
  for (auto pr : {Preset::source, Preset::target}) {
    const auto a = generate_cycle(preset(pr), 77, 3.0, "x");
    const auto b = generate_cycle(preset(pr), 77, 3.0, "x");
    CHECK(same_bits(a, b));
    CHECK_FALSE(same_bits(a, generate_cycle(preset(pr), 78, 3.0, "x")));
  }
  const auto d1 = generate_dataset(3, preset(Preset::target), 5);
  const auto d2 = generate_dataset(3, preset(Preset::target), 5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same_bits(d1[i], d2[i]));
}

TEST_CASE("sequence invariants hold for every generated cycle") {
  for (auto pr : {Preset::source, Preset::target}) {
    const auto set = generate_dataset(12, preset(pr), 9, "p");
    for (const auto& s : set) {
      CHECK_NOTHROW(core::validate(s));
      for (std::size_t i = 1; i < s.size(); ++i)
        CHECK(s.frames[i].t - s.frames[i - 1].t == doctest::Approx(core::kSamplePeriod).epsilon(1e-9));
      std::set<WorkState> present(s.labels.begin(), s.labels.end());
      CHECK(present.size() == 3);
      for (const auto& f : s.frames) {
        CHECK(f.u_js >= -1.0);
        CHECK(f.u_js <= 1.0);
      }
    }
  }
}

TEST_CASE("signal semantics of a cycle") {
  const auto seq = generate_cycle(fixed_params(), 12);
  // Segments: [0,40) travel, [40,65) load, [65,105) travel, [105,120) unload, [120,160) travel.
  auto mean = [&](int ch, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += seq.frames[i].channel(ch);
    return s / static_cast<double>(b - a);
  };
  const int p_bu = static_cast<int>(core::Channel::p_bu);
  CHECK(mean(p_bu, 55, 65) > mean(p_bu, 0, 35));  // bucket fills while loading
  CHECK(mean(p_bu, 70, 100) > mean(p_bu, 125, 160));  // carried load is gone after unloading
  bool forward = false, backward = false;
  for (const auto& f : seq.frames) {
    forward = forward || f.v_veh > 0.5;
    backward = backward || f.v_veh < -0.5;
  }
  CHECK(forward);
  CHECK(backward);
}

TEST_CASE("shovel scale multiplies the implement pressures") {
  auto p = fixed_params();
  const auto a = generate_cycle(p, 3);
  p.shovel_scale = 2.0;
  const auto b = generate_cycle(p, 3);
  double pa = 0, pb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa += a.frames[i].p_bu;
    pb += b.frames[i].p_bu;
  }
  CHECK(pb == doctest::Approx(2.0 * pa).epsilon(1e-9));
}

TEST_CASE("fluctuation convention only relabels near transitions") {
  auto standard = preset(Preset::source);
  auto fluct = standard;
  fluct.label_convention = LabelConvention::dpbu_fluctuation;
  fluct.implement_profile = ImplementProfile::stepped;
  standard.implement_profile = ImplementProfile::stepped;
  const auto radius = static_cast<std::size_t>(std::lround(fluct.transition_radius_s * core::kSampleRateHz));
  std::size_t differ = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto a = generate_cycle(standard, seed);
    const auto b = generate_cycle(fluct, seed);
    REQUIRE(a.size() == b.size());
    const auto bounds = boundaries(a.labels);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.frames[i].p_bu == b.frames[i].p_bu);
      if (a.labels[i] == b.labels[i]) continue;
      ++differ;
      CHECK(b.labels[i] == WorkState::traveling);
      std::size_t nearest = a.size();
      for (auto bd : bounds) nearest = std::min(nearest, i >= bd ? i - bd : bd - i);
      CHECK(nearest <= radius);
    }
    total += a.size();
  }
  CHECK(differ > 0);
  CHECK(static_cast<double>(differ) / static_cast<double>(total) < 0.25);
}

TEST_CASE("fluctuation pass on a hand-built sequence") {
  // Quiet traveling, a noisy start of loading, then a calm load.
  core::LabeledSequence s;
  const double p[] = {0, 0.1, 0, 0.1, 0, 5, 0, 5, 0, 5, 5.1, 5.2, 5.3, 5.4, 5.5, 5.6, 5.7, 5.8, 5.9, 6.0};
  for (int i = 0; i < 20; ++i) {
    core::TelemetryFrame f;
    f.t = i * 0.2;
    f.p_bu = p[i];
    s.frames.push_back(f);
    s.labels.push_back(i < 5 ? WorkState::traveling : WorkState::loading);
  }
  auto relabeled = s;
  apply_fluctuation_convention(relabeled, 2.0);
  // Samples 5..9 swing by 5 per step, far above twice the median rate.
  for (int i = 5; i < 9; ++i) CHECK(relabeled.labels[i] == WorkState::traveling);
  for (int i = 11; i < 20; ++i) CHECK(relabeled.labels[i] == WorkState::loading);
  for (int i = 0; i < 5; ++i) CHECK(relabeled.labels[i] == WorkState::traveling);

  const auto rate = bucket_pressure_rate(s);
  CHECK(rate[0] == 0.0);
  CHECK(rate[5] == 5.0);
  CHECK(rate[6] == -5.0);
}

TEST_CASE("a fully fluctuating short state keeps its middle sample") {
  core::LabeledSequence s;
  for (int i = 0; i < 25; ++i) {
    core::TelemetryFrame f;
    f.t = i * 0.2;
    if (i < 10) f.p_bu = (i % 2) * 0.1;
    else if (i < 15) f.p_bu = (i % 2 == 0) ? 5.0 : 0.0;
    else f.p_bu = 5.0 + (i % 2) * 0.1;
    s.frames.push_back(f);
    s.labels.push_back(i >= 10 && i < 15 ? WorkState::unloading : WorkState::traveling);
  }
  apply_fluctuation_convention(s, 2.0);
  // Each walk into the 5-sample segment may take (5 - 1) / 2 = 2 samples.
  for (int i = 0; i < 25; ++i) CHECK(s.labels[i] == (i == 12 ? WorkState::unloading : WorkState::traveling));
}

TEST_CASE("preset sizes and shift") {
  const auto src = preset(Preset::source);
  const auto tgt = preset(Preset::target);
  CHECK(generate_dataset(src.default_cycles, src, 1).size() == 119);
  CHECK(generate_dataset(tgt.default_cycles, tgt, 1).size() == 24);
  CHECK(src.label_convention == LabelConvention::standard);
  CHECK(src.implement_profile == ImplementProfile::smooth);
  CHECK(tgt.label_convention == LabelConvention::dpbu_fluctuation);
  CHECK(tgt.implement_profile == ImplementProfile::stepped);
  CHECK(tgt.shovel_scale != 1.0);
  CHECK(tgt.joystick_style != src.joystick_style);
  CHECK(preset_from_string("target") == Preset::target);
  CHECK(code_of([] { preset_from_string("other"); }) == ErrorCode::invalid_config);
}

TEST_CASE("traveling is the majority class") {
  for (auto pr : {Preset::source, Preset::target}) {
    const auto p = preset(pr);
    const auto set = generate_dataset(p.default_cycles, p, 2);
    std::array<std::size_t, 3> counts{};
    for (const auto& s : set)
      for (auto l : s.labels) ++counts[core::to_index(l)];
    CHECK(counts[0] > counts[1]);
    CHECK(counts[0] > counts[2]);
    CHECK(counts[0] > counts[1] + counts[2]);
  }
}

TEST_CASE("dataset ids, origins and sub-seeds") {
  const auto set = generate_dataset(3, preset(Preset::target), 4, "tgt");
  CHECK(set[0].cycle_id == "tgt_000");
  CHECK(set[2].cycle_id == "tgt_002");
  for (const auto& s : set) CHECK(s.origin == core::Origin::target_domain);
  std::set<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 1000; ++i) seeds.insert(sub_seed(7, i));
  CHECK(seeds.size() == 1000);
  CHECK(sub_seed(7, 0) != sub_seed(8, 0));
  CHECK(code_of([] { generate_dataset(0, preset(Preset::source), 1); }) == ErrorCode::invalid_config);
}

TEST_CASE("domain parameter validation") {
  auto p = preset(Preset::source);
  p.shovel_scale = 0.0;
  CHECK(code_of([&] { validate(p); }) == ErrorCode::invalid_config);
  p = preset(Preset::source);
  p.loading = {0.5, 2.0};
  CHECK(code_of([&] { validate(p); }) == ErrorCode::invalid_config);
  p = preset(Preset::source);
  p.traveling = {5.0, 4.0};
  CHECK(code_of([&] { validate(p); }) == ErrorCode::invalid_config);
  p = preset(Preset::source);
  p.joystick_style = -1.0;
  CHECK(code_of([&] { generate_cycle(p, 1); }) == ErrorCode::invalid_config);
}
