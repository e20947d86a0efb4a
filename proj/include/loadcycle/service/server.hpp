#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "loadcycle/core/types.hpp"
#include "loadcycle/nn/spec.hpp"
#include "loadcycle/service/jobs.hpp"
#include "loadcycle/service/registry.hpp"
#include "loadcycle/train/trainer.hpp"

namespace loadcycle::service {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 7878;  // 0 picks a free port
  std::filesystem::path registry_dir = "registry";
  // "synth:source", "synth:target", or a .lcs file or directory.
  std::string replay = "synth:target";
  double rate_factor = 0.0;  // 1 = real time, 0 = as fast as possible
  int replay_cycles = 2;
  std::uint64_t seed = 1;
  // Registered as version 1 when the registry starts empty.
  std::optional<std::filesystem::path> base_model;
  // Pre-training data for nd_pd_fs jobs, same syntax as replay.
  std::string pretrain_source = "synth:source";
  int pretrain_cycles = 119;
  core::WindowConfig window = core::WindowConfig::majority(15);
  nn::Variant variant = nn::Variant::crdnn_2lstm;
  train::TrainConfig train_defaults = default_train_config();

  static train::TrainConfig default_train_config();
};

// Line-delimited JSON over TCP; a connection that opens with an HTTP GET
// upgrade speaks the same messages inside WebSocket text frames.
class Server {
 public:
  explicit Server(ServerConfig cfg);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();  // binds and listens; throws bind_failure
  void stop();
  void wait();  // until stop() is called from elsewhere
  int port() const { return port_; }

  Registry& registry() { return registry_; }
  JobManager& jobs() { return jobs_; }
  const ServerConfig& config() const { return cfg_; }

  struct Connection;
  struct Session;

 private:
  void accept_loop();
  void serve(std::shared_ptr<Connection> conn);
  void handle(Session& session, const std::shared_ptr<Connection>& conn, const std::string& line);
  core::WindowSet pretrain_windows();

  ServerConfig cfg_;
  Registry registry_;
  JobManager jobs_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::thread acceptor_;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<int, std::shared_ptr<Connection>> conns_;
  int live_ = 0;
  int next_session_ = 1;
  std::mutex pretrain_mu_;
  std::optional<core::WindowSet> pretrain_;
};

// Frames of a replay source; each inner vector is one cycle.
std::vector<core::LabeledSequence> load_replay(const std::string& source, int cycles, std::uint64_t seed);

}  // namespace loadcycle::service
