#include "loadcycle/service/jobs.hpp"

#include <condition_variable>

#include "loadcycle/error.hpp"
#include "loadcycle/nn/model.hpp"

namespace loadcycle::service {

std::string_view to_string(JobPhase p) {
  switch (p) {
    case JobPhase::running: return "running";
    case JobPhase::stopped_early: return "stopped_early";
    case JobPhase::done: return "done";
    case JobPhase::failed: return "failed";
  }
  return "?";
}

Json status_json(const JobStatus& s) {
  Json j = {{"type", "job_status"}, {"job_id", s.job_id},       {"regime", train::to_string(s.regime)},
            {"phase", to_string(s.phase)}, {"epoch", s.epoch}, {"train_cost", s.train_cost},
            {"val_cost", s.val_cost}};
  if (s.result) j["result"] = result_json(s);
  if (s.phase == JobPhase::failed) j["error"] = {{"code", s.error_code}, {"msg", s.error_msg}};
  return j;
}

Json result_json(const JobStatus& s) {
  const auto& r = *s.result;
  return {{"type", "result"},
          {"job_id", s.job_id},
          {"micro_f1", r.metrics.micro_f1},
          {"confusion", confusion_json(r.metrics.cm)},
          {"guard_ok", r.metrics.guard_ok},
          {"trainable_params", r.trainable_params},
          {"wall_time_s", r.wall_time_s},
          {"windows", r.windows},
          {"val_micro_f1", r.val_micro_f1},
          {"best_epoch", r.best_epoch},
          {"stop_epoch", r.stop_epoch},
          {"phase", to_string(s.phase)},
          {"version", r.version}};
}

JobManager::~JobManager() { shutdown(); }

std::string JobManager::start(JobRequest req, Listener listener) {
  if (train::needs_base(req.regime) && !req.base)
    fail(ErrorCode::missing_base_model, "regime needs a registered base model");
  std::lock_guard lock(mu_);
  for (const auto& [id, s] : jobs_)
    if (s.session_id == req.session_id && s.phase == JobPhase::running)
      fail(ErrorCode::job_already_running, "session already runs " + id);
  const std::string id = "job-" + std::to_string(next_id_++);
  JobStatus s;
  s.job_id = id;
  s.session_id = req.session_id;
  s.regime = req.regime;
  jobs_[id] = s;
  threads_.emplace_back([this, id, r = std::move(req), l = std::move(listener)]() mutable {
    run(id, std::move(r), std::move(l));
  });
  return id;
}

std::optional<JobStatus> JobManager::status(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

bool JobManager::running_for(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, s] : jobs_)
    if (s.session_id == session_id && s.phase == JobPhase::running) return true;
  return false;
}

void JobManager::wait(const std::string& job_id) const {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] {
    const auto it = jobs_.find(job_id);
    return it == jobs_.end() || it->second.phase != JobPhase::running;
  });
}

void JobManager::shutdown() {
  cancel_ = true;
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mu_);
    threads.swap(threads_);
  }
  for (auto& t : threads)
    if (t.joinable()) t.join();
}

void JobManager::update(const std::string& job_id, const std::function<void(JobStatus&)>& fn) {
  {
    std::lock_guard lock(mu_);
    fn(jobs_.at(job_id));
  }
  cv_.notify_all();
}

void JobManager::run(const std::string& job_id, JobRequest req, Listener listener) {
  auto emit = [&](const Json& msg) {
    if (listener) listener(msg);
  };
  try {
    nn::Model model = req.base ? *req.base : nn::build_model<float>(req.spec, req.cfg.seed);
    core::WindowSet data = req.windows;
    if (req.regime == train::Regime::nd_pd_fs) {
      data = req.source_windows;
      data.append(req.windows);
    }
    auto cfg = req.cfg;
    cfg.mode = train::mode_of(req.regime);
    train::TrainHooks hooks;
    hooks.cancelled = [this] { return cancel_.load(); };
    hooks.on_epoch = [&](const train::EpochRecord& e) {
      update(job_id, [&](JobStatus& s) {
        s.epoch = e.epoch;
        s.train_cost = e.train_cost;
        s.val_cost = e.val_cost;
      });
      emit(progress_msg(job_id, e.epoch, e.train_cost, e.val_cost));
    };
    const auto report = train::train(model, data, cfg, hooks);
    if (report.cancelled) fail(ErrorCode::invalid_config, "job cancelled by shutdown");

    JobResult r;
    train::EvalOptions eo;
    eo.timing_windows = 0;
    r.metrics = train::evaluate(model, req.windows, eo);
    r.windows = req.windows.size();
    r.trainable_params = report.trainable_params;
    r.wall_time_s = report.wall_time_s;
    r.val_micro_f1 = report.metrics_val.micro_f1;
    r.best_epoch = report.best_epoch;
    r.stop_epoch = report.stop_epoch;
    r.version = registry_.add(model, std::string(train::to_string(req.regime)) + " " + job_id);
    JobStatus final_status;
    update(job_id, [&](JobStatus& s) {
      s.phase = report.stopped_early ? JobPhase::stopped_early : JobPhase::done;
      s.result = r;
      final_status = s;
    });
    emit(result_json(final_status));
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    const std::string code = err ? std::string(to_string(err->code())) : "internal";
    update(job_id, [&](JobStatus& s) {
      s.phase = JobPhase::failed;
      s.error_code = code;
      s.error_msg = e.what();
    });
    Json msg = error_msg(code, e.what());
    msg["job_id"] = job_id;
    emit(msg);
  }
}

}  // namespace loadcycle::service
