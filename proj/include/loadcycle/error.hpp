#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loadcycle {

enum class ErrorCode {
  sequence_too_short,
  even_window,
  bad_tail,
  empty_dataset,
  length_mismatch,
  empty_matrix,
  bad_format,
  unsupported_spec,
  shape_mismatch,
  non_positive_weight,
  corrupt_file,
  version_mismatch,
  no_validation_cycles,
  missing_base_model,
  invalid_config,
  out_of_range,
  invalid_interval,
  insufficient_data,
  job_already_running,
  unknown_version,
  unknown_job,
  bind_failure,
  io_failure,
  bad_message,
};

// Stable snake_case name, also used as the wire error code.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace loadcycle
