#include "ptlab/monotone_cubic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ptlab/errors.hpp"

namespace ptlab {
namespace {

// Derivative at x[i] of the interpolating polynomial through nodes [lo, hi).
double lagrange_slope(const std::vector<double>& x, const std::vector<double>& y, std::size_t lo,
                      std::size_t hi, std::size_t i) {
  double d = 0.0;
  for (std::size_t j = lo; j < hi; ++j) {
    // l_j'(x_i)
    double lj = 0.0;
    if (j == i) {
      for (std::size_t m = lo; m < hi; ++m)
        if (m != i) lj += 1.0 / (x[i] - x[m]);
    } else {
      lj = 1.0 / (x[j] - x[i]);
      for (std::size_t m = lo; m < hi; ++m)
        if (m != i && m != j) lj *= (x[i] - x[m]) / (x[j] - x[m]);
    }
    d += y[j] * lj;
  }
  return d;
}

}  // namespace

MonotoneCubic::MonotoneCubic(std::span<const double> x, std::span<const double> y)
    : x_(x.begin(), x.end()), y_(y.begin(), y.end()) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n)
    throw Error(ErrorCode::precondition_failed, "monotone interpolation needs at least two nodes");
  increasing_ = y_[1] > y_[0];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(x_[i + 1] > x_[i])) throw Error(ErrorCode::precondition_failed, "nodes must be strictly increasing");
    if ((y_[i + 1] > y_[i]) != increasing_ || y_[i + 1] == y_[i])
      throw Error(ErrorCode::precondition_failed, "data are not strictly monotone");
  }

  std::vector<double> s(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) s[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);

  d_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo, hi;
    if (n <= 4) {
      lo = 0;
      hi = n;
    } else if (i < 2) {
      lo = 0;
      hi = 4;
    } else if (i + 2 >= n) {
      lo = n - 4;
      hi = n;
    } else {
      lo = i - 2;
      hi = i + 3;
    }
    d_[i] = lagrange_slope(x_, y_, lo, hi, i);

    // Hyman: same sign as the data, at most 3x the smaller adjacent secant.
    const double sign = increasing_ ? 1.0 : -1.0;
    double bound = std::numeric_limits<double>::infinity();
    if (i > 0) bound = std::min(bound, 3.0 * std::abs(s[i - 1]));
    if (i + 1 < n) bound = std::min(bound, 3.0 * std::abs(s[i]));
    d_[i] = sign * std::clamp(sign * d_[i], 0.0, bound);
  }
}

std::size_t MonotoneCubic::interval(double x) const {
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const auto idx = static_cast<std::size_t>(std::distance(x_.begin(), it));
  return std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, x_.size() - 2);
}

double MonotoneCubic::value(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] + (-2 * t3 + 3 * t2) * y_[i + 1] +
         (t3 - t2) * h * d_[i + 1];
}

double MonotoneCubic::derivative(double x) const {
  const std::size_t i = interval(x);
  const double h = x_[i + 1] - x_[i];
  const double t = (x - x_[i]) / h;
  const double t2 = t * t;
  return (6 * t2 - 6 * t) / h * y_[i] + (3 * t2 - 4 * t + 1) * d_[i] + (-6 * t2 + 6 * t) / h * y_[i + 1] +
         (3 * t2 - 2 * t) * d_[i + 1];
}

double MonotoneCubic::y_min() const noexcept { return increasing_ ? y_.front() : y_.back(); }
double MonotoneCubic::y_max() const noexcept { return increasing_ ? y_.back() : y_.front(); }

double MonotoneCubic::inverse(double y) const {
  if (!(y >= y_min() && y <= y_max())) throw Error(ErrorCode::invalid_argument, "value outside interpolated range");
  // Interval holding y.
  std::size_t lo = 0, hi = x_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if ((y_[mid] <= y) == increasing_) lo = mid; else hi = mid;
  }
  if (y == y_[lo]) return x_[lo];
  if (y == y_[hi]) return x_[hi];
  double a = x_[lo], b = x_[hi];
  double x = a + (y - y_[lo]) / (y_[hi] - y_[lo]) * (b - a);
  const double sign = increasing_ ? 1.0 : -1.0;
  for (int it = 0; it < 200; ++it) {
    const double r = value(x) - y;
    if (r == 0.0) return x;
    if (sign * r < 0.0) a = x; else b = x;
    if (b - a <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b))) break;
    const double d = derivative(x);
    double next = d != 0.0 ? x - r / d : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    const bool settled = std::abs(next - x) <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x);
    x = next;
    if (settled) break;
  }
  return x;
}

}  // namespace ptlab
