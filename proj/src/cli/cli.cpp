#include "loadcycle/cli/cli.hpp"

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "loadcycle/core/sequence_io.hpp"
#include "loadcycle/core/windowing.hpp"
#include "loadcycle/error.hpp"
#include "loadcycle/nn/serialize.hpp"
#include "loadcycle/service/server.hpp"
#include "loadcycle/synth/generator.hpp"
#include "loadcycle/train/experiment.hpp"
#include "loadcycle/train/grad_check.hpp"

namespace loadcycle::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WindowOptions {
  int ws = 15;
  std::string label_mode = "majority";
  int tail_k = 3;
  int stride = 1;

  core::WindowConfig config() const {
    core::WindowConfig c;
    c.ws = ws;
    c.stride = stride;
    c.tail_k = tail_k;
    if (label_mode == "majority") c.label_mode = core::LabelMode::majority;
    else if (label_mode == "tail") c.label_mode = core::LabelMode::tail;
    else throw UsageError("--label-mode must be majority or tail");
    core::validate(c);
    return c;
  }
};

void add_window_options(CLI::App* app, WindowOptions& w) {
  app->add_option("--ws", w.ws, "Window size in samples (odd)")->capture_default_str();
  app->add_option("--label-mode", w.label_mode, "majority or tail")->capture_default_str();
  app->add_option("--tail-k", w.tail_k, "Tail length for tail labeling (3 or 5)")->capture_default_str();
  app->add_option("--stride", w.stride, "Window stride")->capture_default_str();
}

struct TrainOptions {
  int epochs = 1000;
  double lr = 1e-4;
  int patience = 100;
  int batch_size = 128;
  double l2 = 1e-4;
  std::vector<double> class_weights{1.0, 1.0, 1.0};
  double val_fraction = 0.2;
  double backbone = train::kDefaultBackboneMultiplier;
  int timing = 1000;

  train::TrainConfig config(train::Mode mode, std::uint64_t seed) const {
    auto c = train::TrainConfig::base();
    c.mode = mode;
    c.epochs_max = epochs;
    c.lr0 = lr;
    c.patience = patience;
    c.batch_size = batch_size;
    c.l2_lambda = l2;
    if (class_weights.size() != 3) throw UsageError("--class-weights takes three values");
    for (int k = 0; k < 3; ++k) c.class_weights[k] = class_weights[static_cast<std::size_t>(k)];
    c.val_fraction = val_fraction;
    c.lr_multiplier_backbone = backbone;
    c.seed = seed;
    c.timing_windows = timing;
    train::validate(c);
    return c;
  }
};

void add_train_options(CLI::App* app, TrainOptions& t) {
  app->add_option("--epochs", t.epochs, "Epoch cap")->capture_default_str();
  app->add_option("--lr", t.lr, "Initial learning rate")->capture_default_str();
  app->add_option("--patience", t.patience, "Early-stopping patience in epochs")->capture_default_str();
  app->add_option("--batch-size", t.batch_size, "Mini-batch size")->capture_default_str();
  app->add_option("--l2", t.l2, "L2 penalty on weight tensors")->capture_default_str();
  app->add_option("--class-weights", t.class_weights, "Loss weights of traveling,loading,unloading")
      ->delimiter(',')
      ->expected(3)
      ->capture_default_str();
  app->add_option("--val-fraction", t.val_fraction, "Fraction of cycles held out for validation")
      ->capture_default_str();
  app->add_option("--backbone-multiplier", t.backbone, "Backbone learning-rate multiplier for otf")
      ->capture_default_str();
  app->add_option("--timing-windows", t.timing, "Windows timed for the latency figure")->capture_default_str();
}

std::vector<core::LabeledSequence> load_sequences(const std::string& source, core::Origin origin, int cycles,
                                                  std::uint64_t seed) {
  auto seqs = service::load_replay(source, cycles, seed);
  for (auto& s : seqs) s.origin = origin;
  return seqs;
}

void print_metrics(std::ostream& out, const std::string& title, const train::Metrics& m) {
  char line[160];
  out << title << ": micro F1 " << m.micro_f1 << ", guard " << (m.guard_ok ? "yes" : "no") << ", "
      << m.n_windows << " windows, " << m.avg_test_ms_per_window << " ms/window\n";
  out << "  confusion (rows truth, cols predicted)\n";
  for (int i = 0; i < core::kNumStates; ++i) {
    std::snprintf(line, sizeof line, "  %-10s %8llu %8llu %8llu\n", core::state_name(static_cast<core::WorkState>(i)),
                  static_cast<unsigned long long>(m.cm.counts[i][0]),
                  static_cast<unsigned long long>(m.cm.counts[i][1]),
                  static_cast<unsigned long long>(m.cm.counts[i][2]));
    out << line;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::io_failure, "cannot write " + path.string());
  f << text;
}

// Keeps the global options and the section of the subcommand that ran.
std::string manifest_text(const CLI::App& app, const CLI::App* active) {
  std::istringstream all(app.config_to_str(true, false));
  std::ostringstream out;
  std::string section;
  std::string line;
  auto inactive = [&](const std::string& name) { return !name.empty() && (!active || name != active->get_name()); };
  while (std::getline(all, line)) {
    if (!line.empty() && line.front() == '[') {
      section = line.substr(1, line.find(']') - 1);
      if (inactive(section)) continue;
    } else if (inactive(section)) {
      continue;
    } else {
      const auto dot = line.find('.');
      const auto eq = line.find('=');
      if (dot != std::string::npos && dot < eq && inactive(line.substr(0, dot))) continue;
    }
    out << line << '\n';
  }
  return out.str();
}

train::TrainHooks progress_hooks(std::ostream& out) {
  train::TrainHooks hooks;
  hooks.on_epoch = [&out](const train::EpochRecord& e) {
    out << "epoch " << e.epoch << " train " << e.train_cost << " val " << e.val_cost << "\n";
  };
  return hooks;
}

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Working-state recognition for wheel-loader telemetry", "loadcycle"};
  app.set_config("--config", "", "Rerun from a manifest.ini written by an earlier run");
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  app.add_option("--seed", seed, "Global seed")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  // gen
  auto* gen = app.add_subcommand("gen", "Write a synthetic preset as .lcs files");
  std::string gen_preset = "source";
  int gen_cycles = 0;
  gen->add_option("--preset", gen_preset, "source or target")->capture_default_str();
  gen->add_option("--cycles", gen_cycles, "Cycle count (0 = preset default)")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train a base model from scratch");
  std::string trn_data = "synth:source";
  std::string trn_test;
  std::string trn_variant = "crdnn_2lstm";
  WindowOptions trn_win;
  TrainOptions trn_opt;
  trn->add_option("--data", trn_data, "Training cycles: .lcs file, directory or synth:<preset>")
      ->capture_default_str();
  trn->add_option("--test-data", trn_test, "Held-out cycles to evaluate after training");
  trn->add_option("--variant", trn_variant, "Architecture")->capture_default_str();
  add_window_options(trn, trn_win);
  add_train_options(trn, trn_opt);

  // transfer
  auto* tra = app.add_subcommand("transfer", "Fine-tune a base model on target cycles");
  std::string tra_base;
  std::string tra_mode = "ftf";
  std::string tra_data = "synth:target";
  std::string tra_test;
  std::string tra_variant = "crdnn_2lstm";
  WindowOptions tra_win;
  TrainOptions tra_opt;
  tra_opt.patience = 50;
  tra->add_option("--base", tra_base, "Base model file (required for ftf and otf)");
  tra->add_option("--mode", tra_mode, "fs, ftf or otf")->capture_default_str();
  tra->add_option("--data", tra_data, "Target training cycles")->capture_default_str();
  tra->add_option("--test-data", tra_test, "Held-out target cycles");
  tra->add_option("--variant", tra_variant, "Architecture for mode fs")->capture_default_str();
  add_window_options(tra, tra_win);
  add_train_options(tra, tra_opt);

  // eval
  auto* evl = app.add_subcommand("eval", "Evaluate a model on labeled cycles");
  std::string evl_model;
  std::string evl_data;
  std::string evl_label_mode = "majority";
  int evl_tail_k = 3;
  int evl_timing = 1000;
  evl->add_option("--model", evl_model, "Model file")->required();
  evl->add_option("--data", evl_data, "Cycles to evaluate on")->required();
  evl->add_option("--label-mode", evl_label_mode, "majority or tail")->capture_default_str();
  evl->add_option("--tail-k", evl_tail_k, "Tail length")->capture_default_str();
  evl->add_option("--timing-windows", evl_timing, "Windows timed for latency")->capture_default_str();

  // bench
  auto* bch = app.add_subcommand("bench", "Architecture x window-size grid");
  std::vector<int> bch_ws{5, 9, 15, 25};
  std::vector<std::string> bch_variants{"crdnn_1lstm", "crdnn_2lstm", "crdnn_bilstm", "crdnn_2lstm_sae",
                                        "lstm_fcn"};
  std::string bch_data = "synth:source";
  int bch_cycles = 119;
  double bch_test_fraction = 0.2;
  TrainOptions bch_opt;
  bch_opt.epochs = 20;
  bch_opt.lr = 1e-3;
  bch->add_option("--ws", bch_ws, "Window sizes")->delimiter(',')->capture_default_str();
  bch->add_option("--variant", bch_variants, "Architectures")->delimiter(',')->capture_default_str();
  bch->add_option("--data", bch_data, "Cycles")->capture_default_str();
  bch->add_option("--cycles", bch_cycles, "Cycle count for synthetic data")->capture_default_str();
  bch->add_option("--test-fraction", bch_test_fraction, "Fraction of cycles held out for testing")
      ->capture_default_str();
  add_train_options(bch, bch_opt);

  // gradcheck
  auto* gck = app.add_subcommand("gradcheck", "Finite-difference gradient sweep");
  std::vector<std::string> gck_variants = bch_variants;
  std::vector<int> gck_ws{5, 15};
  int gck_seeds = 3;
  double gck_eps = train::GradCheckOptions{}.eps;
  int gck_order = train::GradCheckOptions{}.order;
  double gck_threshold = 1e-4;
  gck->add_option("--variant", gck_variants, "Architectures")->delimiter(',')->capture_default_str();
  gck->add_option("--ws", gck_ws, "Window sizes")->delimiter(',')->capture_default_str();
  gck->add_option("--seeds", gck_seeds, "Seeds per cell")->capture_default_str();
  gck->add_option("--eps", gck_eps, "Finite-difference step")->capture_default_str();
  gck->add_option("--order", gck_order, "Stencil order, 2 or 4")->capture_default_str();
  gck->add_option("--threshold", gck_threshold, "Fail (exit 1) at or above this error")->capture_default_str();

  // serve
  auto* srv = app.add_subcommand("serve", "Run the telemetry and training service");
  service::ServerConfig scfg;
  std::string srv_registry = scfg.registry_dir.string();
  std::string srv_base;
  double srv_duration = 0.0;
  srv->add_option("--host", scfg.host, "Listen address")->capture_default_str();
  srv->add_option("--port", scfg.port, "Port (0 = any free port)")->capture_default_str();
  srv->add_option("--registry", srv_registry, "Model registry directory")->capture_default_str();
  srv->add_option("--replay", scfg.replay, "Replay source for stream_start")->capture_default_str();
  srv->add_option("--rate-factor", scfg.rate_factor, "Replay speed, 1 = real time, 0 = unthrottled")
      ->capture_default_str();
  srv->add_option("--replay-cycles", scfg.replay_cycles, "Cycles per replay")->capture_default_str();
  srv->add_option("--base-model", srv_base, "Model registered when the registry is empty");
  srv->add_option("--pretrain-cycles", scfg.pretrain_cycles, "Source cycles for nd_pd_fs jobs")
      ->capture_default_str();
  srv->add_option("--epochs", scfg.train_defaults.epochs_max, "Default epoch cap of jobs")->capture_default_str();
  srv->add_option("--lr", scfg.train_defaults.lr0, "Default learning rate of jobs")->capture_default_str();
  srv->add_option("--duration", srv_duration, "Stop after this many seconds (0 = until SIGINT)")
      ->capture_default_str();

  for (auto* sub : app.get_subcommands({})) sub->configurable();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  const CLI::App* active = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front();
  const fs::path dir(out_dir);
  try {
    fs::create_directories(dir);
    // Written before running so a failed run can be reproduced too.
    write_text(dir / "manifest.ini", manifest_text(app, active));

    if (gen->parsed()) {
      const auto preset = synth::preset_from_string(gen_preset);
      const auto params = synth::preset(preset);
      const int n = gen_cycles > 0 ? gen_cycles : params.default_cycles;
      const auto seqs = synth::generate_dataset(n, params, seed, std::string(synth::to_string(preset)));
      const auto paths = core::save_dataset(dir, std::string(synth::to_string(preset)), seqs);
      out << "wrote " << paths.size() << " cycles to " << dir.string() << "\n";
      return kExitOk;
    }

    if (trn->parsed()) {
      const auto wcfg = trn_win.config();
      const auto tcfg = trn_opt.config(train::Mode::fs, seed);
      const auto spec = nn::ModelSpec::defaults(nn::variant_from_string(trn_variant), wcfg.ws);
      const auto windows = core::segment_all(load_sequences(trn_data, core::Origin::source_domain, 0, seed), wcfg);
      auto model = nn::build_model<float>(spec, seed);
      const auto report = train::train(model, windows, tcfg, progress_hooks(out));
      nn::save_model(model, dir / "model.lcm");
      train::save_report(dir / "train", report);
      out << "best epoch " << report.best_epoch << ", stopped at " << report.stop_epoch << ", "
          << report.trainable_params << " trainable parameters, " << report.wall_time_s << " s\n";
      print_metrics(out, "validation", report.metrics_val);
      if (!trn_test.empty()) {
        const auto test = core::segment_all(load_sequences(trn_test, core::Origin::source_domain, 0, seed + 1), wcfg);
        const auto m = train::evaluate(model, test, {.timing_windows = tcfg.timing_windows});
        print_metrics(out, "test", m);
        write_text(dir / "test.json", train::metrics_json(m) + "\n");
      }
      return kExitOk;
    }

    if (tra->parsed()) {
      const auto mode = train::mode_from_string(tra_mode);
      if (mode != train::Mode::fs && tra_base.empty())
        throw UsageError("--mode " + tra_mode + " needs --base");
      const auto wcfg = tra_win.config();
      const auto tcfg = tra_opt.config(mode, seed);
      nn::Model model;
      if (!tra_base.empty()) {
        model = nn::load_model(tra_base);
        if (model.spec.ws != wcfg.ws)
          throw UsageError("--ws " + std::to_string(wcfg.ws) + " differs from the base model's " +
                           std::to_string(model.spec.ws));
      } else {
        model = nn::build_model<float>(nn::ModelSpec::defaults(nn::variant_from_string(tra_variant), wcfg.ws), seed);
      }
      const auto windows = core::segment_all(load_sequences(tra_data, core::Origin::target_domain, 0, seed), wcfg);
      const auto report = train::train(model, windows, tcfg, progress_hooks(out));
      nn::save_model(model, dir / "model.lcm");
      train::save_report(dir / "transfer", report);
      out << train::to_string(mode) << ": best epoch " << report.best_epoch << ", stopped at " << report.stop_epoch
          << ", " << report.trainable_params << " trainable parameters, " << report.wall_time_s << " s\n";
      print_metrics(out, "validation", report.metrics_val);
      if (!tra_test.empty()) {
        const auto test = core::segment_all(load_sequences(tra_test, core::Origin::target_domain, 0, seed + 1), wcfg);
        const auto m = train::evaluate(model, test, {.timing_windows = tcfg.timing_windows});
        print_metrics(out, "test", m);
        write_text(dir / "test.json", train::metrics_json(m) + "\n");
      }
      return kExitOk;
    }

    if (evl->parsed()) {
      const auto model = nn::load_model(evl_model);
      WindowOptions w;
      w.ws = model.spec.ws;
      w.label_mode = evl_label_mode;
      w.tail_k = evl_tail_k;
      const auto windows =
          core::segment_all(load_sequences(evl_data, core::Origin::target_domain, 0, seed), w.config());
      const auto m = train::evaluate(model, windows, {.timing_windows = evl_timing});
      print_metrics(out, "eval", m);
      write_text(dir / "eval.json", train::metrics_json(m) + "\n");
      return kExitOk;
    }

    if (bch->parsed()) {
      const auto seqs = load_sequences(bch_data, core::Origin::source_domain, bch_cycles, seed);
      const auto tcfg = bch_opt.config(train::Mode::fs, seed);
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      char line[200];
      std::snprintf(line, sizeof line, "%-16s %4s %10s %12s %8s %10s %6s\n", "variant", "ws", "params",
                    "train time s", "F1", "ms/window", "guard");
      out << line;
      for (const auto& vname : bch_variants) {
        const auto variant = nn::variant_from_string(vname);
        for (int ws : bch_ws) {
          const auto windows = core::segment_all(seqs, core::WindowConfig::majority(ws));
          const auto split = train::split_by_cycle(windows, bch_test_fraction, seed + 7);
          auto model = nn::build_model<float>(nn::ModelSpec::defaults(variant, ws), seed);
          const auto report = train::train(model, split.train, tcfg);
          const auto m = train::evaluate(model, split.val, {.timing_windows = tcfg.timing_windows});
          std::snprintf(line, sizeof line, "%-16s %4d %10zu %12.2f %8.4f %10.4f %6s\n", vname.c_str(), ws,
                        report.trainable_params, report.wall_time_s, m.micro_f1, m.avg_test_ms_per_window,
                        m.guard_ok ? "yes" : "no");
          out << line << std::flush;
          rows.push_back({{"variant", vname},
                          {"ws", ws},
                          {"trainable_params", report.trainable_params},
                          {"train_time_s", report.wall_time_s},
                          {"micro_f1", m.micro_f1},
                          {"avg_test_ms_per_window", m.avg_test_ms_per_window},
                          {"guard_ok", m.guard_ok},
                          {"best_epoch", report.best_epoch},
                          {"stop_epoch", report.stop_epoch}});
        }
      }
      write_text(dir / "bench.json", rows.dump(2) + "\n");
      return kExitOk;
    }

    if (gck->parsed()) {
      if (gck_order != 2 && gck_order != 4) throw UsageError("--order must be 2 or 4");
      if (!(gck_eps > 0.0)) throw UsageError("--eps must be positive");
      train::GradCheckOptions opt;
      opt.eps = gck_eps;
      opt.order = gck_order;
      bool ok = true;
      char line[200];
      for (const auto& vname : gck_variants) {
        const auto variant = nn::variant_from_string(vname);
        for (int ws : gck_ws) {
          double worst = 0.0;
          std::string where;
          for (int s = 0; s < gck_seeds; ++s) {
            const auto r = train::grad_check(nn::ModelSpec::defaults(variant, ws), seed + static_cast<std::uint64_t>(s), opt);
            if (r.max_rel_error >= worst) {
              worst = r.max_rel_error;
              where = r.worst_tensor;
            }
          }
          const bool pass = worst < gck_threshold;
          ok = ok && pass;
          std::snprintf(line, sizeof line, "%-16s ws=%-3d max_rel_error=%.3e %s (%s)\n", vname.c_str(), ws, worst,
                        pass ? "ok" : "FAIL", where.c_str());
          out << line;
        }
      }
      return ok ? kExitOk : kExitRuntime;
    }

    if (srv->parsed()) {
      scfg.registry_dir = srv_registry;
      scfg.seed = seed;
      if (!srv_base.empty()) scfg.base_model = srv_base;
      service::Server server(scfg);
      server.start();
      out << "listening on " << scfg.host << ":" << server.port() << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto t0 = std::chrono::steady_clock::now();
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (srv_duration > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >= srv_duration)
          break;
      }
      server.stop();
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    const bool usage = e.code() == ErrorCode::invalid_config || e.code() == ErrorCode::even_window ||
                       e.code() == ErrorCode::bad_tail || e.code() == ErrorCode::unsupported_spec ||
                       e.code() == ErrorCode::non_positive_weight;
    err << (usage ? "usage error: " : "error: ") << to_string(e.code()) << ": " << e.what() << "\n";
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace loadcycle::cli
