#include "wire_client.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <stdexcept>

#include "loadcycle/service/websocket.hpp"

namespace testing_support {

namespace ws = loadcycle::service::ws;

namespace {

int connect_local(int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    throw std::runtime_error("connect() failed on port " + std::to_string(port));
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

void send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) throw std::runtime_error("send() failed");
    off += static_cast<std::size_t>(n);
  }
}

}  // namespace

WireClient WireClient::tcp(int port) { return WireClient(connect_local(port), false); }

WireClient WireClient::websocket(int port) {
  WireClient c(connect_local(port), true);
  const std::string key = "dGhlIHNhbXBsZSBub25jZQ==";
  send_all(c.fd_, "GET /ws HTTP/1.1\r\nHost: 127.0.0.1\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                  "Sec-WebSocket-Key: " + key + "\r\nSec-WebSocket-Version: 13\r\n\r\n");
  while (c.buf_.find("\r\n\r\n") == std::string::npos)
    if (!c.fill(5s)) throw std::runtime_error("no handshake response");
  const auto end = c.buf_.find("\r\n\r\n") + 4;
  const auto head = c.buf_.substr(0, end);
  c.buf_.erase(0, end);
  if (head.rfind("HTTP/1.1 101", 0) != 0) throw std::runtime_error("upgrade refused: " + head);
  const auto accept = ws::header_value(head, "Sec-WebSocket-Accept");
  if (!accept || *accept != ws::accept_key(key)) throw std::runtime_error("bad Sec-WebSocket-Accept");
  return c;
}

WireClient::WireClient(WireClient&& other) noexcept
    : fd_(other.fd_), ws_(other.ws_), buf_(std::move(other.buf_)) {
  other.fd_ = -1;
}

WireClient::~WireClient() { close(); }

void WireClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void WireClient::send(const Json& msg) { send_text(loadcycle::service::encode(msg)); }

void WireClient::send_text(const std::string& text) {
  if (ws_) {
    const std::array<std::uint8_t, 4> mask{0x37, 0xfa, 0x21, 0x3d};
    send_all(fd_, ws::encode_frame(text, ws::Opcode::text, mask));
  } else {
    send_all(fd_, text + "\n");
  }
}

bool WireClient::fill(std::chrono::milliseconds timeout) {
  if (fd_ < 0) return false;
  pollfd p{fd_, POLLIN, 0};
  if (::poll(&p, 1, static_cast<int>(timeout.count())) <= 0) return false;
  char chunk[65536];
  const auto n = ::recv(fd_, chunk, sizeof chunk, 0);
  if (n <= 0) return false;
  buf_.append(chunk, static_cast<std::size_t>(n));
  return true;
}

std::optional<Json> WireClient::next(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (ws_) {
      while (auto frame = ws::decode_frame(buf_)) {
        if (frame->op == ws::Opcode::text) return Json::parse(frame->payload);
        if (frame->op == ws::Opcode::close) return std::nullopt;
      }
    } else if (const auto nl = buf_.find('\n'); nl != std::string::npos) {
      const auto line = buf_.substr(0, nl);
      buf_.erase(0, nl + 1);
      return Json::parse(line);
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || !fill(left)) return std::nullopt;
  }
}

Json WireClient::wait_for(const std::function<bool(const Json&)>& pred, std::chrono::milliseconds timeout,
                          std::vector<Json>* seen) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw std::runtime_error("timed out waiting for a message");
    auto msg = next(left);
    if (!msg) throw std::runtime_error("connection closed or timed out while waiting");
    if (seen) seen->push_back(*msg);
    if (pred(*msg)) return *msg;
  }
}

Json WireClient::wait_type(const std::string& type, std::chrono::milliseconds timeout, std::vector<Json>* seen) {
  return wait_for([&](const Json& m) { return m.value("type", "") == type; }, timeout, seen);
}

std::vector<Json> label_messages(const std::vector<loadcycle::core::LabeledSequence>& cycles, double t0) {
  using loadcycle::core::kSamplePeriod;
  std::vector<Json> out;
  double base = t0;
  for (const auto& c : cycles) {
    std::size_t i = 0;
    while (i < c.size()) {
      std::size_t j = i;
      while (j < c.size() && c.labels[j] == c.labels[i]) ++j;
      out.push_back({{"type", "label"},
                     {"t_start", base + static_cast<double>(i) * kSamplePeriod},
                     {"t_end", base + static_cast<double>(j) * kSamplePeriod},
                     {"state", loadcycle::core::to_index(c.labels[i])}});
      i = j;
    }
    base += static_cast<double>(c.size()) * kSamplePeriod;
  }
  return out;
}

}  // namespace testing_support
