#include "loadcycle/service/protocol.hpp"

namespace loadcycle::service {

Json parse_message(std::string_view line) {
  Json msg = Json::parse(line.begin(), line.end(), nullptr, false);
  if (msg.is_discarded() || !msg.is_object()) fail(ErrorCode::bad_message, "message is not a JSON object");
  if (!msg.contains("type") || !msg["type"].is_string()) fail(ErrorCode::bad_message, "message has no type");
  return msg;
}

double get_number(const Json& msg, const char* field) {
  if (!msg.contains(field) || !msg[field].is_number())
    fail(ErrorCode::bad_message, std::string("field '") + field + "' must be a number");
  return msg[field].get<double>();
}

std::string get_string(const Json& msg, const char* field) {
  if (!msg.contains(field) || !msg[field].is_string())
    fail(ErrorCode::bad_message, std::string("field '") + field + "' must be a string");
  return msg[field].get<std::string>();
}

int get_int(const Json& msg, const char* field) {
  if (!msg.contains(field) || !msg[field].is_number_integer())
    fail(ErrorCode::bad_message, std::string("field '") + field + "' must be an integer");
  return msg[field].get<int>();
}

Json telemetry_msg(const core::TelemetryFrame& f) {
  return {{"type", "telemetry"}, {"t", f.t},       {"p_bu", f.p_bu}, {"v_veh", f.v_veh},
          {"u_js", f.u_js},      {"p_cc", f.p_cc}, {"p_bo", f.p_bo}};
}

Json ack_msg(std::string_view ref) { return {{"type", "ack"}, {"ref", ref}}; }

Json error_msg(ErrorCode code, std::string_view what) { return error_msg(to_string(code), what); }

Json error_msg(std::string_view code, std::string_view what) {
  return {{"type", "error"}, {"code", code}, {"msg", what}};
}

Json progress_msg(std::string_view job_id, int epoch, double train_cost, double val_cost) {
  return {{"type", "progress"}, {"job_id", job_id}, {"epoch", epoch}, {"train_cost", train_cost},
          {"val_cost", val_cost}};
}

Json confusion_json(const core::ConfusionMatrix& cm) {
  Json rows = Json::array();
  for (const auto& r : cm.counts) rows.push_back(Json(r));
  return rows;
}

std::string encode(const Json& msg) { return msg.dump(-1, ' ', false, Json::error_handler_t::replace); }

}  // namespace loadcycle::service
