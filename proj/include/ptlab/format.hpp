#pragma once

#include <string>

namespace ptlab {

/// Round-trip-safe decimal rendering used by every CSV writer ("%.17g").
std::string fmt17(double x);

}  // namespace ptlab
