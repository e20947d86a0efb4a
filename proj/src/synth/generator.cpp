#include "loadcycle/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "loadcycle/error.hpp"

namespace loadcycle::synth {

using core::WorkState;

std::string_view to_string(Preset p) { return p == Preset::source ? "source" : "target"; }

Preset preset_from_string(std::string_view s) {
  if (s == "source") return Preset::source;
  if (s == "target") return Preset::target;
  fail(ErrorCode::invalid_config, "unknown preset '" + std::string(s) + "' (expected source or target)");
}

DomainParams preset(Preset p) {
  DomainParams d;
  if (p == Preset::source) {
    d.default_cycles = kSourceCycles;
    return d;
  }
  d.joystick_style = 2.5;
  d.shovel_scale = 1.5;
  d.implement_profile = ImplementProfile::stepped;
  d.label_convention = LabelConvention::dpbu_fluctuation;
  d.noise_std = {1.5, 0.05, 0.02, 2.0, 1.5};
  d.loading = {4.5, 7.5};
  d.unloading = {3.5, 5.5};
  d.transition_radius_s = 2.5;
  d.origin = core::Origin::target_domain;
  d.default_cycles = kTargetCycles;
  return d;
}

void validate(const DomainParams& p) {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, what); };
  if (!(p.joystick_style > 0.0)) bad("joystick_style must be positive");
  if (!(p.shovel_scale > 0.0)) bad("shovel_scale must be positive");
  for (double n : p.noise_std)
    if (!(n >= 0.0)) bad("noise_std must be non-negative");
  for (const auto& r : {p.traveling, p.loading, p.unloading})
    if (!(r.min_s >= 1.0) || !(r.max_s >= r.min_s)) bad("duration ranges need 1 <= min <= max seconds");
  if (!(p.transition_radius_s > 0.0)) bad("transition_radius_s must be positive");
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Smooth 0 -> 1 transition over [0, 1].
double smoothstep(double x) {
  x = clamp01(x);
  return x * x * (3.0 - 2.0 * x);
}

int samples_for(const DurationRange& r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(r.min_s, r.max_s);
  const double seconds = r.min_s == r.max_s ? r.min_s : d(rng);
  return std::max(1, static_cast<int>(std::lround(seconds * core::kSampleRateHz)));
}

struct CycleShape {
  double v_max;      // cruising speed
  double v_approach; // speed entering the pile
  double empty;      // empty bucket pressure
  double full;       // loaded bucket pressure
  double boom_low;
  double boom_high;
  double reverse_share;  // part of a travel leg spent reversing
};

}  // namespace

std::vector<double> bucket_pressure_rate(const core::LabeledSequence& seq) {
  std::vector<double> d(seq.size(), 0.0);
  for (std::size_t i = 1; i < seq.size(); ++i) d[i] = seq.frames[i].p_bu - seq.frames[i - 1].p_bu;
  return d;
}

void apply_fluctuation_convention(core::LabeledSequence& seq, double transition_radius_s) {
  const auto n = seq.size();
  if (n < 2) return;
  const auto rate = bucket_pressure_rate(seq);
  std::vector<double> mag(n);
  for (std::size_t i = 0; i < n; ++i) mag[i] = std::abs(rate[i]);
  std::vector<double> sorted = mag;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n / 2), sorted.end());
  const double threshold = 2.0 * sorted[n / 2];
  const auto radius = static_cast<std::size_t>(std::lround(transition_radius_s * core::kSampleRateHz));
  auto fluctuating = [&](std::size_t i) {
    // one quiet sample does not end a fluctuation
    return mag[i] > threshold || (i + 1 < n && mag[i + 1] > threshold);
  };

  const auto chain = seq.labels;
  // The two walks into a segment leave at least one of its samples, so a
  // working state never disappears.
  auto reach = [&](std::size_t len) { return std::min(radius, (len - 1) / 2); };
  for (std::size_t b = 1; b < n; ++b) {
    if (chain[b] == chain[b - 1]) continue;
    // Entering a working state: walk forward from the change.
    if (chain[b] != WorkState::traveling) {
      std::size_t end = b;
      while (end < n && chain[end] == chain[b]) ++end;
      const auto limit = b + reach(end - b);
      for (std::size_t i = b; i < limit && fluctuating(i); ++i) seq.labels[i] = WorkState::traveling;
    }
    // Leaving a working state: walk backward from the change.
    if (chain[b - 1] != WorkState::traveling) {
      std::size_t start = b - 1;
      while (start > 0 && chain[start - 1] == chain[b - 1]) --start;
      const auto limit = b - reach(b - start);
      for (std::size_t i = b; i-- > limit && fluctuating(i);) seq.labels[i] = WorkState::traveling;
    }
  }
}

core::LabeledSequence generate_cycle(const DomainParams& p, std::uint64_t seed, double t0,
                                     const std::string& cycle_id) {
  validate(p);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto jitter = [&](double center, double rel) { return center * (1.0 + rel * (2.0 * u01(rng) - 1.0)); };

  const std::array<WorkState, 5> chain = {WorkState::traveling, WorkState::loading, WorkState::traveling,
                                          WorkState::unloading, WorkState::traveling};
  std::array<int, 5> len{};
  for (int s = 0; s < 5; ++s) {
    const auto& r = chain[s] == WorkState::loading     ? p.loading
                    : chain[s] == WorkState::unloading ? p.unloading
                                                       : p.traveling;
    len[s] = samples_for(r, rng);
  }
  CycleShape c;
  c.v_max = jitter(3.0, 0.15);
  c.v_approach = jitter(1.2, 0.2);
  c.empty = jitter(15.0, 0.1);
  c.full = jitter(100.0, 0.1);
  c.boom_low = jitter(25.0, 0.1);
  c.boom_high = jitter(110.0, 0.1);
  c.reverse_share = jitter(0.4, 0.2);
  const double js = p.joystick_style;
  const double scale = p.shovel_scale;
  const bool stepped = p.implement_profile == ImplementProfile::stepped;
  const double dt = core::kSamplePeriod;

  core::LabeledSequence seq;
  seq.cycle_id = cycle_id;
  seq.origin = p.origin;
  const int total = len[0] + len[1] + len[2] + len[3] + len[4];
  seq.frames.reserve(static_cast<std::size_t>(total));
  seq.labels.reserve(static_cast<std::size_t>(total));

  // Bucket fill level in [0, 1] while loading, from the implement profile.
  auto fill = [&](double tau, double dur) {
    if (!stepped) return 1.0 - std::exp(-3.0 * tau / dur);
    const int steps = 3;
    const double k = std::floor(tau / (dur / steps)) + 1.0;
    return std::min(1.0, k / steps);
  };
  // A stepped valve rings after every step; time since the last step.
  auto ripple = [&](double since) {
    return stepped ? 0.12 * std::exp(-since / 0.9) * std::sin(2.0 * M_PI * since / 0.45) : 0.0;
  };

  int index = 0;
  for (int s = 0; s < 5; ++s) {
    const double dur = len[s] * dt;
    for (int i = 0; i < len[s]; ++i, ++index) {
      const double tau = i * dt;
      core::TelemetryFrame f;
      f.t = t0 + index * dt;
      double v = 0.0, u = 0.0, bu = 0.0, bo = 0.0, cc_push = 0.0;
      switch (s) {
        case 0:  // to the pile
          v = c.v_max * smoothstep(tau / 2.0) - (c.v_max - c.v_approach) * smoothstep((tau - (dur - 2.5)) / 2.0);
          u = -0.3 * smoothstep(js * (tau - (dur - 2.0)) / 1.0);
          bu = c.empty;
          bo = c.boom_low;
          break;
        case 1: {  // penetrate, fill, raise
          v = c.v_approach * (1.0 - smoothstep(tau / (0.6 * dur)));
          u = 0.9 * smoothstep(js * tau / 0.8);
          const double level = fill(tau, dur);
          bu = c.empty + (c.full - c.empty) * (level + ripple(std::fmod(tau, dur / 3.0)));
          bo = c.boom_low + (c.boom_high - c.boom_low) * 0.6 * smoothstep(tau / dur);
          cc_push = 110.0 * (1.0 - smoothstep(tau / dur));
          break;
        }
        case 2: {  // reverse, then forward to the truck
          const double rev = c.reverse_share * dur;
          if (tau < rev) {
            v = -0.8 * c.v_max * std::sin(M_PI * tau / rev);
          } else {
            const double x = (tau - rev) / (dur - rev);
            v = c.v_max * std::sin(M_PI * x) * 0.8 + 0.3 * x;
          }
          u = 0.4 * (1.0 - smoothstep(js * tau / 3.0));
          bu = c.full + 3.0 * std::sin(2.0 * M_PI * tau / 1.3);
          bo = c.boom_low + (c.boom_high - c.boom_low) * (0.6 + 0.4 * smoothstep(tau / (0.5 * dur)));
          break;
        }
        case 3: {  // dump
          v = 0.3 * (1.0 - smoothstep(tau / 0.6));
          u = -0.9 * smoothstep(js * tau / 0.5);
          const double spike = 0.25 * (c.full - c.empty) * std::exp(-tau / 0.3);
          const double drop = stepped ? std::min(1.0, std::floor(tau / 0.6 + 1.0) / 2.0) : smoothstep(tau / 1.2);
          bu = c.full + spike - (c.full - c.empty) * (drop + ripple(tau < 0.6 ? tau : tau - 0.6));
          bo = c.boom_high - (c.boom_high - c.boom_low) * 0.5 * smoothstep(tau / dur);
          break;
        }
        default: {  // back away, turn toward the pile
          const double rev = c.reverse_share * dur;
          v = tau < rev ? -0.8 * c.v_max * std::sin(M_PI * tau / rev)
                        : 0.7 * c.v_max * smoothstep((tau - rev) / 2.0);
          u = -0.4 * (1.0 - smoothstep(js * tau / 2.5));
          bu = c.empty;
          bo = c.boom_low + (c.boom_high - c.boom_low) * 0.5 * (1.0 - smoothstep(tau / 3.0));
          break;
        }
      }
      f.v_veh = v;
      f.u_js = u;
      f.p_bu = scale * bu;
      f.p_bo = scale * bo;
      f.p_cc = 40.0 + 25.0 * std::abs(v) + cc_push;
      seq.frames.push_back(f);
      seq.labels.push_back(chain[s]);
    }
  }

  // Accelerating takes pressure too.
  for (std::size_t i = 1; i < seq.frames.size(); ++i)
    seq.frames[i].p_cc += 20.0 * std::abs(seq.frames[i].v_veh - seq.frames[i - 1].v_veh) / dt;

  for (auto& f : seq.frames) {
    for (int ch = 0; ch < core::kNumChannels; ++ch) {
      const double sd = p.noise_std[static_cast<std::size_t>(ch)];
      if (sd > 0.0) {
        std::normal_distribution<double> noise(0.0, sd);
        f.set_channel(ch, f.channel(ch) + noise(rng));
      }
    }
    f.u_js = std::clamp(f.u_js, -1.0, 1.0);
  }

  if (p.label_convention == LabelConvention::dpbu_fluctuation) apply_fluctuation_convention(seq, p.transition_radius_s);
  return seq;
}

std::vector<core::LabeledSequence> generate_dataset(int n_cycles, const DomainParams& params, std::uint64_t seed,
                                                    const std::string& prefix) {
  if (n_cycles < 1) fail(ErrorCode::invalid_config, "n_cycles must be at least 1");
  std::vector<core::LabeledSequence> out(static_cast<std::size_t>(n_cycles));
  for (int i = 0; i < n_cycles; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "_%03d", i);
    out[static_cast<std::size_t>(i)] =
        generate_cycle(params, sub_seed(seed, static_cast<std::uint64_t>(i)), 0.0, prefix + id);
  }
  return out;
}

}  // namespace loadcycle::synth
