#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ptlab {

enum class ErrorCode {
  invalid_geometry,
  invalid_argument,
  numerical_singularity,
  contour_failure,
  capacity_exceeded,
  continuation_stall,
  no_exceptional_point,
  precondition_failed,
  internal_inconsistency,
  resolution,
  tangency,
  seed_not_found,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ptlab
