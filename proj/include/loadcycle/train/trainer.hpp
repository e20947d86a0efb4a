#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/loss.hpp"
#include "loadcycle/nn/model.hpp"
#include "loadcycle/train/evaluate.hpp"
#include "loadcycle/train/regime.hpp"

namespace loadcycle::train {

struct TrainConfig {
  int batch_size = 128;
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int patience = 100;
  double l2_lambda = 1e-4;
  nn::ClassWeights class_weights{1.0, 1.0, 1.0};
  int epochs_max = 1000;
  Mode mode = Mode::fs;
  double lr_multiplier_backbone = kDefaultBackboneMultiplier;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;

  // Plateau decay: lr *= factor after this many epochs without improvement.
  int lr_decay_patience = 25;
  double lr_decay_factor = 0.5;
  double lr_floor = 1e-6;

  // Latency windows timed for metrics_val; 0 disables timing.
  int timing_windows = 1000;

  static TrainConfig base() { return {}; }
  static TrainConfig transfer(Mode m) {
    TrainConfig c;
    c.mode = m;
    c.patience = 50;
    return c;
  }
};

// Throws invalid_config / non_positive_weight.
void validate(const TrainConfig& cfg);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_cost = 0.0;
  double val_cost = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  int stop_epoch = 0;
  double best_val_cost = 0.0;
  bool stopped_early = false;  // patience exhausted before epochs_max
  bool cancelled = false;
  double wall_time_s = 0.0;
  std::size_t samples_per_epoch = 0;  // windows handed to train, both splits
  std::size_t train_windows = 0;
  std::size_t val_windows = 0;
  std::size_t trainable_params = 0;
  Mode mode = Mode::fs;
  Metrics metrics_val;
};

// Strict-improvement tracker; stop once epoch - best_epoch reaches patience.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}
  // Returns true when cost is a new best.
  bool update(int epoch, double cost);
  bool should_stop(int epoch) const { return best_epoch_ > 0 && epoch - best_epoch_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_cost() const { return best_cost_; }

 private:
  int patience_;
  int best_epoch_ = 0;
  double best_cost_ = 0.0;
};

// Halves (by factor) the rate after `patience` epochs without improvement.
class PlateauDecay {
 public:
  PlateauDecay(double lr0, int patience, double factor, double floor)
      : lr_(lr0), patience_(patience), factor_(factor), floor_(floor) {}
  void update(bool improved);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double floor_;
  int stale_ = 0;
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Replaces the measured validation cost of an epoch when it returns a value.
  std::function<std::optional<double>(int epoch)> val_cost_override;
  std::function<bool()> cancelled;
};

// Cycles are split, not windows: every window of a cycle lands on one side.
struct Split {
  core::WindowSet train;
  core::WindowSet val;
};
Split split_by_cycle(const core::WindowSet& windows, double val_fraction, std::uint64_t seed);

// Trains model in place on raw windows. fs fits the normalizer on the
// training split; ftf/otf keep the normalizer the model arrived with.
TrainReport train(nn::Model& model, const core::WindowSet& windows, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// Loss over a whole (normalized) set in inference mode, chunked.
double dataset_cost(const nn::Model& model, const core::WindowSet& normalized, const TrainConfig& cfg);

}  // namespace loadcycle::train
