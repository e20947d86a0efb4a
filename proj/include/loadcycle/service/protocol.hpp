#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "loadcycle/core/types.hpp"
#include "loadcycle/error.hpp"
#include "loadcycle/train/evaluate.hpp"

namespace loadcycle::service {

using Json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

// One message per line: a JSON object with a "type" field. Throws
// bad_message when the line is not such an object.
Json parse_message(std::string_view line);

// Typed field access; a missing or mistyped field is a bad_message.
double get_number(const Json& msg, const char* field);
std::string get_string(const Json& msg, const char* field);
int get_int(const Json& msg, const char* field);

Json telemetry_msg(const core::TelemetryFrame& f);
Json ack_msg(std::string_view ref);
Json error_msg(ErrorCode code, std::string_view what);
Json error_msg(std::string_view code, std::string_view what);
Json progress_msg(std::string_view job_id, int epoch, double train_cost, double val_cost);
Json confusion_json(const core::ConfusionMatrix& cm);

std::string encode(const Json& msg);  // compact, no trailing newline

}  // namespace loadcycle::service
