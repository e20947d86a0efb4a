#include "loadcycle/service/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <future>

#include "loadcycle/core/sequence_io.hpp"
#include "loadcycle/core/windowing.hpp"
#include "loadcycle/nn/serialize.hpp"
#include "loadcycle/service/protocol.hpp"
#include "loadcycle/service/session.hpp"
#include "loadcycle/service/websocket.hpp"
#include "loadcycle/synth/generator.hpp"

namespace loadcycle::service {

train::TrainConfig ServerConfig::default_train_config() {
  auto c = train::TrainConfig::transfer(train::Mode::ftf);
  c.lr0 = 1e-3;
  c.epochs_max = 30;
  c.timing_windows = 200;
  return c;
}

struct Server::Connection {
  int fd = -1;
  bool websocket = false;
  std::mutex write_mu;
  std::atomic<bool> open{true};

  void send_raw(const std::string& bytes) {
    std::lock_guard lock(write_mu);
    if (!open) return;
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) {
        open = false;
        return;
      }
      sent += static_cast<std::size_t>(n);
    }
  }
  void send(const Json& msg) {
    const std::string text = encode(msg);
    send_raw(websocket ? ws::encode_frame(text) : text + "\n");
  }
  void close() {
    open = false;
    ::shutdown(fd, SHUT_RDWR);
  }
};

struct Server::Session {
  std::string id;
  std::string client;
  LabelBuffer buffer;
  std::thread streamer;
  std::atomic<bool> streaming{false};
  std::atomic<bool> stop_stream{false};
  std::string last_job;
  double next_t = 0.0;  // session timeline continues across streams

  void join_stream() {
    stop_stream = true;
    if (streamer.joinable()) streamer.join();
    stop_stream = false;
  }
};

std::vector<core::LabeledSequence> load_replay(const std::string& source, int cycles, std::uint64_t seed) {
  constexpr std::string_view kSynth = "synth:";
  if (source.rfind(kSynth, 0) == 0) {
    const auto preset = synth::preset_from_string(source.substr(kSynth.size()));
    auto params = synth::preset(preset);
    const int n = cycles > 0 ? cycles : params.default_cycles;
    return synth::generate_dataset(n, params, seed, std::string(synth::to_string(preset)));
  }
  auto seqs = core::load_dataset(source, core::Origin::target_domain);
  if (cycles > 0 && static_cast<int>(seqs.size()) > cycles) seqs.resize(static_cast<std::size_t>(cycles));
  return seqs;
}

Server::Server(ServerConfig cfg) : cfg_(std::move(cfg)), registry_(cfg_.registry_dir), jobs_(registry_) {
  if (cfg_.base_model && registry_.empty()) registry_.add(nn::load_model(*cfg_.base_model), "base");
}

Server::~Server() { stop(); }

void Server::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail(ErrorCode::bind_failure, std::strerror(errno));
  int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(cfg_.port));
  if (::inet_pton(AF_INET, cfg_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    fail(ErrorCode::bind_failure, "bad host address " + cfg_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    fail(ErrorCode::bind_failure, "cannot listen on " + cfg_.host + ":" + std::to_string(cfg_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  if (stopping_.exchange(true)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::unique_lock lock(mu_);
    for (auto& [fd, c] : conns_) c->close();
    cv_.wait(lock, [this] { return live_ == 0; });
  }
  jobs_.shutdown();
  cv_.notify_all();
}

void Server::wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return stopping_.load() && live_ == 0; });
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    int yes = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &yes, sizeof yes);
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    {
      std::lock_guard lock(mu_);
      if (stopping_) {
        ::close(fd);
        break;
      }
      conns_[fd] = conn;
      ++live_;
    }
    std::thread([this, conn] {
      serve(conn);
      std::lock_guard lock(mu_);
      conns_.erase(conn->fd);
      ::close(conn->fd);
      --live_;
      cv_.notify_all();
    }).detach();
  }
}

namespace {

// Splits complete lines off the front of buf.
template <typename Fn>
void drain_lines(std::string& buf, Fn&& fn) {
  std::size_t pos;
  while ((pos = buf.find('\n')) != std::string::npos) {
    std::string line = buf.substr(0, pos);
    buf.erase(0, pos + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) fn(line);
  }
}

constexpr std::size_t kMaxLine = 1 << 20;

}  // namespace

void Server::serve(std::shared_ptr<Connection> conn) {
  Session session;
  {
    std::lock_guard lock(mu_);
    session.id = "s" + std::to_string(next_session_++);
  }
  std::string buf;
  std::string fragments;
  bool decided = false;
  char chunk[4096];
  try {
    while (conn->open) {
      const ssize_t n = ::recv(conn->fd, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      buf.append(chunk, static_cast<std::size_t>(n));

      if (!decided) {
        if (buf.size() < 4 && std::string_view("GET ").substr(0, buf.size()) == buf) continue;
        if (buf.rfind("GET ", 0) == 0) {
          const auto end = buf.find("\r\n\r\n");
          if (end == std::string::npos) {
            if (buf.size() > 16384) break;
            continue;
          }
          const auto reply = ws::handshake_response(std::string_view(buf).substr(0, end + 4));
          if (!reply) {
            conn->send_raw("HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
            break;
          }
          conn->send_raw(*reply);
          conn->websocket = true;
          buf.erase(0, end + 4);
        }
        decided = true;
      }

      if (!conn->websocket) {
        drain_lines(buf, [&](const std::string& line) { handle(session, conn, line); });
        if (buf.size() > kMaxLine) {
          conn->send(error_msg(ErrorCode::bad_message, "line too long"));
          buf.clear();
        }
        continue;
      }
      while (auto frame = ws::decode_frame(buf)) {
        switch (frame->op) {
          case ws::Opcode::close:
            conn->send_raw(ws::encode_frame(frame->payload.substr(0, 2), ws::Opcode::close));
            conn->open = false;
            break;
          case ws::Opcode::ping:
            conn->send_raw(ws::encode_frame(frame->payload, ws::Opcode::pong));
            break;
          case ws::Opcode::pong:
            break;
          default: {
            fragments += frame->payload;
            if (!frame->fin) break;
            std::string text = std::move(fragments);
            fragments.clear();
            text.push_back('\n');
            drain_lines(text, [&](const std::string& line) { handle(session, conn, line); });
          }
        }
        if (!conn->open) break;
      }
    }
  } catch (const std::exception&) {
    // a broken frame ends the connection
  }
  conn->open = false;
  session.join_stream();
}

core::WindowSet Server::pretrain_windows() {
  std::lock_guard lock(pretrain_mu_);
  if (!pretrain_) {
    auto seqs = load_replay(cfg_.pretrain_source, cfg_.pretrain_cycles, cfg_.seed + 1000);
    for (auto& s : seqs) s.origin = core::Origin::source_domain;
    pretrain_ = core::segment_all(seqs, cfg_.window);
  }
  return *pretrain_;
}

namespace {

train::TrainConfig apply_overrides(train::TrainConfig cfg, const Json& o) {
  if (o.is_null()) return cfg;
  if (!o.is_object()) fail(ErrorCode::bad_message, "overrides must be an object");
  for (const auto& [key, value] : o.items()) {
    auto number = [&]() {
      if (!value.is_number()) fail(ErrorCode::bad_message, "override '" + key + "' must be a number");
      return value.get<double>();
    };
    if (key == "epochs") cfg.epochs_max = static_cast<int>(number());
    else if (key == "lr") cfg.lr0 = number();
    else if (key == "patience") cfg.patience = static_cast<int>(number());
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(number());
    else if (key == "l2_lambda") cfg.l2_lambda = number();
    else if (key == "lr_multiplier_backbone") cfg.lr_multiplier_backbone = number();
    else if (key == "val_fraction") cfg.val_fraction = number();
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(number());
    else if (key == "class_weights") {
      if (!value.is_array() || value.size() != 3) fail(ErrorCode::bad_message, "class_weights needs 3 numbers");
      for (std::size_t i = 0; i < 3; ++i) {
        if (!value[i].is_number()) fail(ErrorCode::bad_message, "class_weights needs 3 numbers");
        cfg.class_weights[i] = value[i].get<double>();
      }
    } else {
      fail(ErrorCode::invalid_config, "unknown override '" + key + "'");
    }
  }
  train::validate(cfg);
  return cfg;
}

}  // namespace

void Server::handle(Session& session, const std::shared_ptr<Connection>& conn, const std::string& line) {
  std::string type;
  auto make_ack = [&](std::string_view ref) {
    Json ack = ack_msg(ref);
    if (jobs_.running_for(session.id)) ack["state"] = "training";
    else if (session.streaming) ack["state"] = "streaming";
    else if (session.buffer.labeled() > 0) ack["state"] = "labeling";
    else ack["state"] = "idle";
    return ack;
  };
  try {
    const Json msg = parse_message(line);
    type = msg["type"].get<std::string>();

    if (type == "hello") {
      if (msg.contains("proto") && (!msg["proto"].is_number_integer() || msg["proto"].get<int>() != kProtocolVersion))
        fail(ErrorCode::bad_message, "unsupported protocol version");
      if (msg.contains("client") && msg["client"].is_string()) session.client = msg["client"].get<std::string>();
      Json ack = make_ack("hello");
      ack["session_id"] = session.id;
      ack["proto"] = kProtocolVersion;
      conn->send(ack);

    } else if (type == "stream_start") {
      if (session.streaming) fail(ErrorCode::invalid_config, "a stream is already running");
      const std::string source = msg.contains("source") ? get_string(msg, "source") : cfg_.replay;
      const double rate = msg.contains("rate_factor") ? get_number(msg, "rate_factor") : cfg_.rate_factor;
      if (!(rate >= 0.0)) fail(ErrorCode::bad_message, "rate_factor must be non-negative");
      const int cycles = msg.contains("cycles") ? get_int(msg, "cycles") : cfg_.replay_cycles;
      const auto seed = msg.contains("seed") ? static_cast<std::uint64_t>(get_int(msg, "seed")) : cfg_.seed;
      auto seqs = load_replay(source, cycles, seed);
      session.join_stream();
      session.streaming = true;
      conn->send(make_ack("stream_start"));
      session.streamer = std::thread([&session, conn, seqs = std::move(seqs), rate] {
        std::size_t frames = 0;
        int index = 0;
        for (const auto& seq : seqs) {
          session.buffer.begin_cycle(seq.cycle_id + "@" + std::to_string(index++));
          const double shift = session.next_t - seq.frames.front().t;
          for (auto f : seq.frames) {
            if (session.stop_stream || !conn->open) break;
            f.t += shift;
            session.buffer.append(f);
            conn->send(telemetry_msg(f));
            ++frames;
            if (rate > 0.0)
              std::this_thread::sleep_for(std::chrono::duration<double>(core::kSamplePeriod / rate));
          }
          session.next_t += static_cast<double>(seq.size()) * core::kSamplePeriod;
        }
        Json done = ack_msg("stream_complete");
        done["frames"] = frames;
        done["cycles"] = seqs.size();
        session.streaming = false;
        conn->send(done);
      });

    } else if (type == "label") {
      const double t0 = get_number(msg, "t_start");
      const double t1 = get_number(msg, "t_end");
      const auto state = core::state_from_index(get_int(msg, "state"));
      session.buffer.label(t0, t1, state);
      conn->send(make_ack("label"));

    } else if (type == "job_start") {
      const auto regime = train::regime_from_string(get_string(msg, "regime"));
      const auto cfg = apply_overrides(cfg_.train_defaults, msg.contains("overrides") ? msg["overrides"] : Json());
      if (jobs_.running_for(session.id)) fail(ErrorCode::job_already_running, "this session already runs a job");
      auto cycles = session.buffer.labeled_cycles(core::Origin::target_domain);
      if (cycles.empty()) fail(ErrorCode::insufficient_data, "no fully labeled cycle in this session");
      if (cycles.size() == 1) cycles = split_single_cycle(cycles.front(), cfg.val_fraction, cfg_.window.ws);
      if (cycles.size() < 2) fail(ErrorCode::insufficient_data, "the labeled cycle is too short to validate on");
      JobRequest req;
      req.session_id = session.id;
      req.regime = regime;
      req.cfg = cfg;
      req.spec = nn::ModelSpec::defaults(cfg_.variant, cfg_.window.ws);
      try {
        req.windows = core::segment_all(cycles, cfg_.window);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::sequence_too_short) fail(ErrorCode::insufficient_data, e.what());
        throw;
      }
      if (train::needs_base(regime)) {
        auto base = registry_.load_active();
        if (!base) fail(ErrorCode::missing_base_model, "no model registered");
        if (base->spec.ws != cfg_.window.ws) fail(ErrorCode::invalid_config, "active model uses another window size");
        req.base = std::move(base);
      }
      if (regime == train::Regime::nd_pd_fs) req.source_windows = pretrain_windows();
      // Progress may only follow the ack.
      auto gate = std::make_shared<std::promise<void>>();
      auto opened = gate->get_future().share();
      const auto id = jobs_.start(std::move(req), [conn, opened](const Json& m) {
        opened.wait();
        conn->send(m);
      });
      session.last_job = id;
      Json ack = make_ack("job_start");
      ack["job_id"] = id;
      conn->send(ack);
      gate->set_value();

    } else if (type == "job_status") {
      const auto id = get_string(msg, "job_id");
      const auto st = jobs_.status(id);
      if (!st) fail(ErrorCode::unknown_job, "no job " + id);
      conn->send(status_json(*st));

    } else if (type == "registry_list") {
      Json versions = Json::array();
      const auto active = registry_.active();
      for (const auto& v : registry_.list())
        versions.push_back({{"version", v.version},
                            {"digest", v.digest},
                            {"note", v.note},
                            {"active", active && *active == v.version}});
      conn->send({{"type", "registry"}, {"versions", versions}, {"active", active ? Json(*active) : Json()}});

    } else if (type == "promote" || type == "rollback") {
      const int v = get_int(msg, "version");
      if (type == "promote") registry_.promote(v);
      else registry_.rollback(v);
      Json ack = make_ack(type);
      ack["active"] = v;
      conn->send(ack);

    } else {
      fail(ErrorCode::bad_message, "unknown message type '" + type + "'");
    }
  } catch (const Error& e) {
    Json err = error_msg(e.code(), e.what());
    if (!type.empty()) err["ref"] = type;
    conn->send(err);
  } catch (const std::exception& e) {
    Json err = error_msg("internal", e.what());
    if (!type.empty()) err["ref"] = type;
    conn->send(err);
  }
}

}  // namespace loadcycle::service
