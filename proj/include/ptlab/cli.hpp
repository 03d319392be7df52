#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "ptlab/config.hpp"

namespace ptlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitNumerical = 2;

struct RunResult {
  int exit_code = kExitOk;
  nlohmann::ordered_json manifest;
};

/// Runs one validated config, writing its CSV/JSON outputs and manifest.json
/// into `out_dir` (created if needed). Library errors become exit 2 with the
/// failure recorded in the manifest; whatever was written before the failure
/// stays on disk. Benign outcomes (all-pass, truncated curves) exit 0.
RunResult execute(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Throws ConfigError when `dir` cannot be created or written to.
void check_writable(const std::filesystem::path& dir);

std::string version();

}  // namespace ptlab
