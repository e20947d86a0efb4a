#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/model.hpp"
#include "loadcycle/nn/spec.hpp"
#include "loadcycle/train/evaluate.hpp"
#include "loadcycle/train/regime.hpp"
#include "loadcycle/train/trainer.hpp"

namespace loadcycle::train {

// Raw windows. Train sets are split again by cycle into train/validation.
struct ExperimentData {
  core::WindowSet source_train;
  core::WindowSet source_test;
  core::WindowSet target_train;
  core::WindowSet target_test;
};

struct ExperimentConfig {
  nn::ModelSpec spec;
  TrainConfig train;  // mode is overwritten from the regime
  EvalOptions eval;
  std::uint64_t init_seed = 0;  // fresh models of nd_fs / nd_pd_fs
};

struct ExperimentRow {
  Regime regime = Regime::nd_fs;
  Metrics source;
  Metrics target;
  TrainReport report;
};

// nd_fs trains on target only, nd_ftf / nd_otf fine-tune a copy of base on
// target, nd_pd_fs trains from scratch on source and target together.
// Throws missing_base_model when a fine-tuning regime gets no base.
ExperimentRow run_experiment(Regime regime, const std::optional<nn::Model>& base, const ExperimentData& data,
                             const ExperimentConfig& cfg, nn::Model* trained = nullptr);

// Shortest round-trip decimal text, as in sequence files.
std::string number_text(double v);

// "epoch,train_cost,val_cost,lr" lines behind a "# loadcycle-report-v1" header.
void write_history(std::ostream& out, const TrainReport& report);
std::string summary_json(const TrainReport& report);
std::string metrics_json(const Metrics& m);
std::string rows_json(const std::vector<ExperimentRow>& rows);
void write_comparison(std::ostream& out, const std::vector<ExperimentRow>& rows);

// Writes <stem>.log and <stem>.json next to each other.
void save_report(const std::filesystem::path& stem, const TrainReport& report);

}  // namespace loadcycle::train
