#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"
#include "loadcycle/service/protocol.hpp"

namespace testing_support {

using loadcycle::service::Json;
using namespace std::chrono_literals;

// Blocking test client for the service: newline-delimited JSON over TCP, or
// the same messages in masked WebSocket text frames.
class WireClient {
 public:
  static WireClient tcp(int port);
  static WireClient websocket(int port);

  WireClient(WireClient&& other) noexcept;
  WireClient& operator=(WireClient&&) = delete;
  WireClient(const WireClient&) = delete;
  ~WireClient();

  void send(const Json& msg);
  void send_text(const std::string& text);  // raw line or frame payload

  // Next message, or nullopt on timeout or a closed connection.
  std::optional<Json> next(std::chrono::milliseconds timeout = 10s);
  // Reads until pred holds; every message read (including the match) is
  // appended to seen. Throws on timeout.
  Json wait_for(const std::function<bool(const Json&)>& pred, std::chrono::milliseconds timeout = 60s,
                std::vector<Json>* seen = nullptr);
  Json wait_type(const std::string& type, std::chrono::milliseconds timeout = 60s,
                 std::vector<Json>* seen = nullptr);

  void close();

 private:
  WireClient(int fd, bool ws) : fd_(fd), ws_(ws) {}
  bool fill(std::chrono::milliseconds timeout);

  int fd_ = -1;
  bool ws_ = false;
  std::string buf_;
};

// Label messages covering each run of equal states, given the stream's
// starting time for the first cycle.
std::vector<Json> label_messages(const std::vector<loadcycle::core::LabeledSequence>& cycles, double t0 = 0.0);

}  // namespace testing_support
