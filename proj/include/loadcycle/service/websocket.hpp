#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loadcycle::service::ws {

enum class Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

// base64(SHA-1(key + the RFC 6455 GUID)).
std::string accept_key(std::string_view client_key);

// Finds a header value (case-insensitive name) in a raw HTTP request head.
std::optional<std::string> header_value(std::string_view request_head, std::string_view name);

// Full 101 response for an upgrade request; nullopt when it is not one.
std::optional<std::string> handshake_response(std::string_view request_head);

// Server frames are unmasked; clients must pass a masking key.
std::string encode_frame(std::string_view payload, Opcode op = Opcode::text,
                         const std::optional<std::array<std::uint8_t, 4>>& mask = std::nullopt);

struct Frame {
  bool fin = true;
  Opcode op = Opcode::text;
  std::string payload;  // unmasked
};

// Decodes one frame from the front of buf and erases it. Returns nullopt
// while the frame is incomplete; throws bad_message on a malformed header.
std::optional<Frame> decode_frame(std::string& buf, std::size_t max_payload = 1 << 24);

}  // namespace loadcycle::service::ws
