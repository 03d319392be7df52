#pragma once

#include <span>
#include <vector>

namespace ptlab {

// Natural units throughout: m = 1/2 and hbar = 1, so the stationary equation
// reads -psi'' + v psi = k^2 psi and energies are squared wavenumbers.

struct Segment {
  double x_lo;
  double x_hi;
  double value;

  double width() const noexcept { return x_hi - x_lo; }
  bool operator==(const Segment&) const = default;
};

/// Real piecewise-constant potential supported on [-a, a].
///
/// The segments partition [-a, a] exactly (first x_lo == -a, last x_hi == a,
/// consecutive segments abut bit-for-bit). Outside the interval the potential
/// is zero. Instances are immutable once built.
class PotentialSpec {
 public:
  /// Validates the partition and computes the evenness flag.
  /// Throws Error{invalid_geometry} on gaps, overlaps, or empty segments.
  static PotentialSpec from_segments(std::vector<Segment> segments);

  double half_width() const noexcept { return half_width_; }
  std::span<const Segment> segments() const noexcept { return segments_; }
  bool is_even() const noexcept { return even_; }

  double min_value() const noexcept;
  double max_value() const noexcept;

  bool operator==(const PotentialSpec&) const = default;

 private:
  PotentialSpec() = default;

  double half_width_ = 0.0;
  std::vector<Segment> segments_;
  bool even_ = false;
};

/// Integrated-strength description of an even step profile. Band j occupies
/// x_{j-1} <= |x| <= x_j with x_0 = 0 and x_j = x_{j-1} + widths[j], and its
/// height is strengths[j] / widths[j].
struct StepFamilySpec {
  double half_width = 0.0;
  std::vector<double> widths;
  std::vector<double> strengths;
};

// Mirror-symmetric data is compared with exact equality.
bool recompute_evenness(std::span<const Segment> segments) noexcept;

PotentialSpec make_square_well(double a, double depth);
PotentialSpec make_free(double a);
PotentialSpec make_steps(const StepFamilySpec& spec);

/// Even profile from explicit band widths and heights, innermost band first.
/// Any remainder up to `a` becomes a zero-valued band.
PotentialSpec make_even_bands(double a, std::span<const double> widths,
                              std::span<const double> heights);

PotentialSpec add_constant(const PotentialSpec& p, double v0);

/// Reflection x -> -x.
PotentialSpec mirrored(const PotentialSpec& p);

/// Segments are closed on the left; x == a maps to the last segment and
/// |x| > a gives 0.
double value_at(const PotentialSpec& p, double x) noexcept;

}  // namespace ptlab
