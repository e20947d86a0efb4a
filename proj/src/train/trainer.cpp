#include "loadcycle/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>

#include "loadcycle/core/normalize.hpp"
#include "loadcycle/error.hpp"
#include "loadcycle/nn/layers.hpp"
#include "loadcycle/train/adam.hpp"

namespace loadcycle::train {

void validate(const TrainConfig& c) {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_config, what); };
  if (c.batch_size < 1) bad("batch_size must be at least 1");
  if (!(c.lr0 > 0.0)) bad("lr0 must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0)) bad("betas must lie in [0, 1)");
  if (!(c.eps_adam > 0.0)) bad("eps_adam must be positive");
  if (c.patience < 1) bad("patience must be at least 1");
  if (!(c.l2_lambda >= 0.0)) bad("l2_lambda must be non-negative");
  if (c.epochs_max < 1) bad("epochs_max must be at least 1");
  if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) bad("val_fraction must lie in (0, 1)");
  if (!(c.lr_multiplier_backbone >= 0.0)) bad("lr_multiplier_backbone must be non-negative");
  if (c.lr_decay_patience < 1 || !(c.lr_decay_factor > 0.0 && c.lr_decay_factor <= 1.0) || !(c.lr_floor >= 0.0))
    bad("invalid learning-rate decay settings");
  nn::validate(c.class_weights);
}

bool EarlyStopping::update(int epoch, double cost) {
  if (best_epoch_ == 0 || cost < best_cost_) {
    best_epoch_ = epoch;
    best_cost_ = cost;
    return true;
  }
  return false;
}

void PlateauDecay::update(bool improved) {
  if (improved) {
    stale_ = 0;
    return;
  }
  if (++stale_ >= patience_) {
    lr_ = std::max(floor_, lr_ * factor_);
    stale_ = 0;
  }
}

Split split_by_cycle(const core::WindowSet& windows, double val_fraction, std::uint64_t seed) {
  if (windows.empty()) fail(ErrorCode::empty_dataset, "no windows to train on");
  std::vector<std::string> cycles;
  std::map<std::string, bool> seen;
  for (const auto& w : windows.windows)
    if (!seen[w.cycle_id]) {
      seen[w.cycle_id] = true;
      cycles.push_back(w.cycle_id);
    }
  if (cycles.size() < 2) fail(ErrorCode::no_validation_cycles, "at least two cycles are needed for validation");
  std::mt19937_64 rng(seed);
  std::shuffle(cycles.begin(), cycles.end(), rng);
  auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(cycles.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, cycles.size() - 1);
  std::map<std::string, bool> is_val;
  for (std::size_t i = 0; i < n_val; ++i) is_val[cycles[i]] = true;
  Split s;
  s.train.ws = s.val.ws = windows.ws;
  for (const auto& w : windows.windows) (is_val[w.cycle_id] ? s.val : s.train).windows.push_back(w);
  return s;
}

double dataset_cost(const nn::Model& model, const core::WindowSet& set, const TrainConfig& cfg) {
  constexpr std::size_t kChunk = 1024;
  double weighted = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + kChunk); ++i) idx.push_back(i);
    const auto b = nn::make_batch<float>(set, idx);
    const double mean = nn::loss_value(model, b, cfg.class_weights, 0.0, nn::Phase::inference);
    weighted += mean * static_cast<double>(idx.size());
  }
  double l2 = 0.0;
  if (cfg.l2_lambda != 0.0)
    for (const auto& p : model.params)
      if (p.role == nn::Role::weight)
        for (float v : p.values) l2 += static_cast<double>(v) * v;
  return weighted / static_cast<double>(set.size()) + cfg.l2_lambda * l2;
}

namespace {

void apply_buffer_updates(nn::Model& model, const std::vector<nn::BufferUpdate<float>>& updates) {
  constexpr double kMomentum = nn::BatchNorm<float>::kMomentum;
  for (const auto& u : updates) {
    auto& values = model.params[static_cast<std::size_t>(u.index)].values;
    for (std::size_t j = 0; j < values.size(); ++j)
      values[j] = static_cast<float>(kMomentum * values[j] + (1.0 - kMomentum) * u.batch_value[j]);
  }
}

}  // namespace

TrainReport train(nn::Model& model, const core::WindowSet& windows, const TrainConfig& cfg, const TrainHooks& hooks) {
  validate(cfg);
  if (windows.empty()) fail(ErrorCode::empty_dataset, "no windows to train on");
  const auto t0 = std::chrono::steady_clock::now();

  apply_mode(model, cfg.mode, cfg.lr_multiplier_backbone);
  Split split = split_by_cycle(windows, cfg.val_fraction, cfg.seed);
  if (cfg.mode == Mode::fs || !model.norm.fitted) model.norm = core::fit_normalizer(split.train);
  const auto train_set = core::apply_normalizer(split.train, model.norm);
  const auto val_set = core::apply_normalizer(split.val, model.norm);

  TrainReport rep;
  rep.mode = cfg.mode;
  rep.samples_per_epoch = windows.size();
  rep.train_windows = train_set.size();
  rep.val_windows = val_set.size();
  rep.trainable_params = nn::count_params(model, nn::ParamFilter::trainable);

  AdamConfig adam{cfg.beta1, cfg.beta2, cfg.eps_adam};
  auto state = make_adam_state(model.params);
  EarlyStopping stopper(cfg.patience);
  PlateauDecay decay(cfg.lr0, cfg.lr_decay_patience, cfg.lr_decay_factor, cfg.lr_floor);
  std::mt19937_64 rng(cfg.seed + 1);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<nn::Parameter<float>> best = model.params;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs_max; ++epoch) {
    if (hooks.cancelled && hooks.cancelled()) {
      rep.cancelled = true;
      break;
    }
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = decay.lr();
    double cost_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(batch, order.size() - start));
      const auto b = nn::make_batch<float>(train_set, idx);
      auto r = nn::loss_and_grads(model, b, cfg.class_weights, cfg.l2_lambda);
      adam_step(model.params, r.grads, state, lr, adam);
      apply_buffer_updates(model, r.buffer_updates);
      cost_sum += r.loss * static_cast<double>(idx.size());
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_cost = cost_sum / static_cast<double>(order.size());
    std::optional<double> injected;
    if (hooks.val_cost_override) injected = hooks.val_cost_override(epoch);
    rec.val_cost = injected ? *injected : dataset_cost(model, val_set, cfg);
    rep.history.push_back(rec);

    const bool improved = stopper.update(epoch, rec.val_cost);
    if (improved) best = model.params;
    decay.update(improved);
    rep.stop_epoch = epoch;
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (stopper.should_stop(epoch)) {
      rep.stopped_early = epoch < cfg.epochs_max;
      break;
    }
  }

  model.params = std::move(best);
  rep.best_epoch = stopper.best_epoch();
  rep.best_val_cost = stopper.best_cost();
  EvalOptions eo;
  eo.timing_windows = cfg.timing_windows;
  rep.metrics_val = evaluate(model, split.val, eo);
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace loadcycle::train
