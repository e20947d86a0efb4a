#include "loadcycle/train/experiment.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "json.hpp"
#include "loadcycle/error.hpp"

namespace loadcycle::train {

namespace {

using Json = nlohmann::ordered_json;

Json metrics_object(const Metrics& m) {
  Json cm = Json::array();
  for (const auto& row : m.cm.counts) cm.push_back(row);
  return {{"micro_f1", m.micro_f1},
          {"guard_ok", m.guard_ok},
          {"confusion", cm},
          {"precision", m.per_class.precision},
          {"recall", m.per_class.recall},
          {"avg_test_ms_per_window", m.avg_test_ms_per_window},
          {"n_windows", m.n_windows}};
}

Json summary_object(const TrainReport& r) {
  return {{"mode", to_string(r.mode)},
          {"best_epoch", r.best_epoch},
          {"stop_epoch", r.stop_epoch},
          {"best_val_cost", r.best_val_cost},
          {"stopped_early", r.stopped_early},
          {"cancelled", r.cancelled},
          {"wall_time_s", r.wall_time_s},
          {"samples_per_epoch", r.samples_per_epoch},
          {"train_windows", r.train_windows},
          {"val_windows", r.val_windows},
          {"trainable_params", r.trainable_params},
          {"metrics_val", metrics_object(r.metrics_val)}};
}

}  // namespace

ExperimentRow run_experiment(Regime regime, const std::optional<nn::Model>& base, const ExperimentData& data,
                             const ExperimentConfig& cfg, nn::Model* trained) {
  TrainConfig tc = cfg.train;
  tc.mode = mode_of(regime);
  nn::Model model;
  core::WindowSet train_set;
  if (needs_base(regime)) {
    if (!base) fail(ErrorCode::missing_base_model, std::string(to_string(regime)) + " needs a base model");
    model = *base;
    train_set = data.target_train;
  } else {
    model = nn::build_model<float>(cfg.spec, cfg.init_seed);
    if (regime == Regime::nd_pd_fs) {
      train_set = data.source_train;
      train_set.append(data.target_train);
    } else {
      train_set = data.target_train;
    }
  }

  ExperimentRow row;
  row.regime = regime;
  row.report = train(model, train_set, tc);
  if (!data.source_test.empty()) row.source = evaluate(model, data.source_test, cfg.eval);
  if (!data.target_test.empty()) row.target = evaluate(model, data.target_test, cfg.eval);
  if (trained) *trained = std::move(model);
  return row;
}

std::string number_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_history(std::ostream& out, const TrainReport& r) {
  out << "# loadcycle-report-v1\n# epoch,train_cost,val_cost,lr\n";
  for (const auto& e : r.history)
    out << e.epoch << ',' << number_text(e.train_cost) << ',' << number_text(e.val_cost) << ','
        << number_text(e.lr) << '\n';
}

std::string summary_json(const TrainReport& r) { return summary_object(r).dump(2); }
std::string metrics_json(const Metrics& m) { return metrics_object(m).dump(2); }

std::string rows_json(const std::vector<ExperimentRow>& rows) {
  Json out = Json::array();
  for (const auto& row : rows)
    out.push_back({{"regime", to_string(row.regime)},
                   {"f1_source", row.source.micro_f1},
                   {"f1_target", row.target.micro_f1},
                   {"guard_source", row.source.guard_ok},
                   {"guard_target", row.target.guard_ok},
                   {"samples_per_epoch", row.report.samples_per_epoch},
                   {"trainable_params", row.report.trainable_params},
                   {"wall_time_s", row.report.wall_time_s},
                   {"best_epoch", row.report.best_epoch},
                   {"stop_epoch", row.report.stop_epoch}});
  return out.dump(2);
}

void write_comparison(std::ostream& out, const std::vector<ExperimentRow>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %10s %10s %12s %10s %12s %6s\n", "regime", "F1 source", "F1 target",
                "samples/ep", "trainable", "train time s", "guard");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-10s %10.4f %10.4f %12zu %10zu %12.2f %6s\n", std::string(to_string(r.regime)).c_str(),
                  r.source.micro_f1, r.target.micro_f1, r.report.samples_per_epoch, r.report.trainable_params,
                  r.report.wall_time_s, r.target.guard_ok ? "yes" : "no");
    out << line;
  }
}

void save_report(const std::filesystem::path& stem, const TrainReport& report) {
  auto log_path = stem;
  log_path += ".log";
  auto json_path = stem;
  json_path += ".json";
  std::ofstream log(log_path);
  std::ofstream js(json_path);
  if (!log || !js) fail(ErrorCode::io_failure, "cannot write report " + stem.string());
  write_history(log, report);
  js << summary_json(report) << '\n';
}

}  // namespace loadcycle::train
