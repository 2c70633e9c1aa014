#pragma once

#include <stdexcept>
#include <string>

namespace sfminv {

// Error category. Codes below `runtime_marker` indicate bad input
// (CLI exit code 1), the rest internal/runtime failures (exit code 2).
enum class errc {
  // input / parsing
  missing_file,
  malformed_record,
  dangling_reference,
  unsupported_camera_model,
  truncated_record,
  duplicate_point_id,
  unknown_image_id,
  empty_keypoint_set,
  invalid_config,
  stage_order_violation,
  runtime_marker,
  // runtime
  io_failure,
  missing_attribute,
  shape_mismatch,
  dimension_mismatch,
  bad_dimensions,
  degenerate_batch,
  diverged_loss,
  occupancy_mismatch,
  too_small,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_file: return "MissingFile";
    case errc::malformed_record: return "MalformedRecord";
    case errc::dangling_reference: return "DanglingReference";
    case errc::unsupported_camera_model: return "UnsupportedCameraModel";
    case errc::truncated_record: return "TruncatedRecord";
    case errc::duplicate_point_id: return "DuplicatePointId";
    case errc::unknown_image_id: return "UnknownImageId";
    case errc::empty_keypoint_set: return "EmptyKeypointSet";
    case errc::invalid_config: return "InvalidConfig";
    case errc::stage_order_violation: return "StageOrderViolation";
    case errc::io_failure: return "IoFailure";
    case errc::missing_attribute: return "MissingAttribute";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::bad_dimensions: return "BadDimensions";
    case errc::degenerate_batch: return "DegenerateBatch";
    case errc::diverged_loss: return "DivergedLoss";
    case errc::occupancy_mismatch: return "OccupancyMismatch";
    case errc::too_small: return "TooSmall";
    default: return "Error";
  }
}

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }
  bool is_input_error() const noexcept { return code_ < errc::runtime_marker; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace sfminv
