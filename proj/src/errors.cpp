#include "ptlab/errors.hpp"

namespace ptlab {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_geometry: return "invalid-geometry";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::numerical_singularity: return "numerical-singularity";
    case ErrorCode::contour_failure: return "contour-failure";
    case ErrorCode::capacity_exceeded: return "capacity-exceeded";
    case ErrorCode::continuation_stall: return "continuation-stall";
    case ErrorCode::no_exceptional_point: return "no-exceptional-point";
    case ErrorCode::precondition_failed: return "precondition-failed";
    case ErrorCode::internal_inconsistency: return "internal-inconsistency";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::tangency: return "tangency";
    case ErrorCode::seed_not_found: return "seed-not-found";
  }
  return "unknown";
}

}  // namespace ptlab
