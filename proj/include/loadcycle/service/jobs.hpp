#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/model.hpp"
#include "loadcycle/service/protocol.hpp"
#include "loadcycle/service/registry.hpp"
#include "loadcycle/train/evaluate.hpp"
#include "loadcycle/train/regime.hpp"
#include "loadcycle/train/trainer.hpp"

namespace loadcycle::service {

enum class JobPhase { running, stopped_early, done, failed };
std::string_view to_string(JobPhase p);

struct JobResult {
  train::Metrics metrics;  // over every window built from the labeled data
  std::size_t windows = 0;
  std::size_t trainable_params = 0;
  double wall_time_s = 0.0;
  double val_micro_f1 = 0.0;
  int best_epoch = 0;
  int stop_epoch = 0;
  int version = 0;  // registry version holding the trained model
};

struct JobStatus {
  std::string job_id;
  std::string session_id;
  train::Regime regime = train::Regime::nd_ftf;
  JobPhase phase = JobPhase::running;
  int epoch = 0;
  double train_cost = 0.0;
  double val_cost = 0.0;
  std::optional<JobResult> result;
  std::string error_code;
  std::string error_msg;
};

struct JobRequest {
  std::string session_id;
  train::Regime regime = train::Regime::nd_ftf;
  core::WindowSet windows;         // labeled session data
  core::WindowSet source_windows;  // pre-training data, nd_pd_fs only
  std::optional<nn::Model> base;   // nd_ftf / nd_otf
  nn::ModelSpec spec;              // fresh models for nd_fs / nd_pd_fs
  train::TrainConfig cfg;
};

Json status_json(const JobStatus& s);
Json result_json(const JobStatus& s);  // the terminal "result" message

// Runs training jobs on background threads. Listeners get progress and the
// single terminal message; status stays queryable after the listener is gone.
class JobManager {
 public:
  using Listener = std::function<void(const Json&)>;

  explicit JobManager(Registry& registry) : registry_(registry) {}
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  // Throws job_already_running when the session has a running job.
  std::string start(JobRequest req, Listener listener);
  std::optional<JobStatus> status(const std::string& job_id) const;
  bool running_for(const std::string& session_id) const;
  // Waits until the job leaves the running phase.
  void wait(const std::string& job_id) const;
  void shutdown();  // cancels running jobs and joins them

 private:
  void run(const std::string& job_id, JobRequest req, Listener listener);
  void update(const std::string& job_id, const std::function<void(JobStatus&)>& fn);

  Registry& registry_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::map<std::string, JobStatus> jobs_;
  std::vector<std::thread> threads_;
  std::atomic<bool> cancel_{false};
  int next_id_ = 1;
};

}  // namespace loadcycle::service
