#pragma once

#include <span>
#include <vector>

namespace ptlab {

/// Piecewise cubic Hermite interpolant of strictly monotone data. Node slopes
/// come from a local 5-point (4 at the ends) polynomial fit, clipped by the
/// Hyman filter so the interpolant stays monotone on every interval.
class MonotoneCubic {
 public:
  /// Throws Error{precondition_failed} unless x is strictly increasing and y
  /// strictly monotone (either direction), with at least two nodes.
  MonotoneCubic(std::span<const double> x, std::span<const double> y);

  double value(double x) const;
  double derivative(double x) const;

  /// x with value(x) == y; y must lie within [min y, max y].
  double inverse(double y) const;

  double y_min() const noexcept;
  double y_max() const noexcept;
  bool increasing() const noexcept { return increasing_; }

 private:
  std::size_t interval(double x) const;

  std::vector<double> x_, y_, d_;
  bool increasing_ = true;
};

}  // namespace ptlab
