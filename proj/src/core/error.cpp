#include "loadcycle/error.hpp"

namespace loadcycle {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::sequence_too_short: return "sequence_too_short";
    case ErrorCode::even_window: return "even_window";
    case ErrorCode::bad_tail: return "bad_tail";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::empty_matrix: return "empty_matrix";
    case ErrorCode::bad_format: return "bad_format";
    case ErrorCode::unsupported_spec: return "unsupported_spec";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::non_positive_weight: return "non_positive_weight";
    case ErrorCode::corrupt_file: return "corrupt_file";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::no_validation_cycles: return "no_validation_cycles";
    case ErrorCode::missing_base_model: return "missing_base_model";
    case ErrorCode::invalid_config: return "invalid_config";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::invalid_interval: return "invalid_interval";
    case ErrorCode::insufficient_data: return "insufficient_data";
    case ErrorCode::job_already_running: return "job_already_running";
    case ErrorCode::unknown_version: return "unknown_version";
    case ErrorCode::unknown_job: return "unknown_job";
    case ErrorCode::bind_failure: return "bind_failure";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::bad_message: return "bad_message";
  }
  return "unknown";
}

}  // namespace loadcycle
