#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "ptlab/potential.hpp"
#include "ptlab/spectrum.hpp"
#include "ptlab/tolerances.hpp"

namespace ptlab {

struct Diagnostic {
  std::string where;  // "line 3, column 7" or a field path such as potential.eps[1]
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diags);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

enum class Command { transmission, spectrum, pte_scan, track, ep_locate, inverse };
std::string_view to_string(Command c) noexcept;
std::optional<Command> parse_command(std::string_view name) noexcept;

// Potential as written in the document. For steps, eps entries may be null:
// that band takes whatever width is left over from a.
struct PotentialInput {
  std::string type;  // square_well | steps
  double a = 0.0;
  double depth = 0.0;
  std::vector<std::optional<double>> eps;
  std::vector<double> beta;
};

// Which number of the potential document the family parameter theta
// replaces: beta[i], eps[i], depth, or a constant shift of the whole profile.
struct VarySpec {
  std::string field;
  int index = 0;
};

PotentialSpec build_potential(const PotentialInput& in);
PotentialFamily build_family(const PotentialInput& in, const VarySpec& vary);

struct UniformGrid {
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

struct TransmissionParams {
  std::vector<double> k2;
};

struct SpectrumParams {
  UniformGrid alpha;
  double re_lo = 0.0;
  double re_cap = 0.0;
  double im_half = 500.0;
  int max_count = 64;
};

struct PteScanParams {
  double k_lo = 0.0;
  double k_hi = 0.0;
  double scan_step = 0.01;
};

struct TrackParams {
  VarySpec vary;
  std::vector<double> theta;
  double k_lo = 0.0;
  double k_hi = 0.0;
  double scan_step = 0.01;
};

struct EpParams {
  VarySpec vary;
  AlphaCoupling coupling = DispersionCoupled{};
  std::optional<std::pair<double, double>> bracket;
  double mu_guess = 0.0;
  std::optional<std::pair<double, double>> start;  // (theta, mu) for a direct 2D Newton
  EpSearchOptions options;
};

struct DirectBranch {
  double alpha0 = 0.0;
  double mu0 = 0.0;
  double step = 0.05;
};

struct InverseParams {
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  std::vector<double> v0;
  std::vector<double> alpha;
  double k_hi = 0.0;
  double scan_step = 0.01;
  double refine_tolerance = 0.0;
  std::optional<DirectBranch> direct;
};

struct RunConfig {
  Command command = Command::transmission;
  nlohmann::ordered_json echo;  // the document as read
  PotentialInput potential_input;
  PotentialSpec potential = make_free(1.0);
  Tolerances tol;
  std::optional<std::string> out;

  TransmissionParams transmission;
  SpectrumParams spectrum;
  PteScanParams pte_scan;
  TrackParams track;
  EpParams ep;
  InverseParams inverse;
};

/// Strict parse: unknown fields, missing fields, bad grids and non-positive
/// tolerances all end up in one ConfigError with every diagnostic found.
/// `command` (from the command line) must agree with a "command" field if
/// the document has one. Without either, a lone command section decides.
RunConfig parse_config(const std::string& text, std::optional<Command> command = std::nullopt);

}  // namespace ptlab
