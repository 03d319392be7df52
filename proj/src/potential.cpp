#include "ptlab/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ptlab/errors.hpp"

namespace ptlab {
namespace {

// Widths summing to a within this relative slack are snapped onto a.
constexpr double kSumSlack = 1e-12;

[[noreturn]] void geometry_error(const std::string& msg) {
  throw Error(ErrorCode::invalid_geometry, msg);
}

}  // namespace

PotentialSpec PotentialSpec::from_segments(std::vector<Segment> segments) {
  if (segments.empty()) geometry_error("potential needs at least one segment");
  const double a = segments.back().x_hi;
  if (!(a > 0.0) || !std::isfinite(a)) geometry_error("half-width must be positive and finite");
  if (segments.front().x_lo != -a) {
    std::ostringstream os;
    os << "segments must start at -a (" << -a << "), got " << segments.front().x_lo;
    geometry_error(os.str());
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (!(s.x_hi > s.x_lo)) {
      std::ostringstream os;
      os << "segment " << i << " has non-positive width";
      geometry_error(os.str());
    }
    if (!std::isfinite(s.value)) geometry_error("segment value must be finite");
    if (i + 1 < segments.size() && segments[i + 1].x_lo != s.x_hi) {
      std::ostringstream os;
      os << "segments " << i << " and " << i + 1 << " do not abut";
      geometry_error(os.str());
    }
  }
  PotentialSpec p;
  p.half_width_ = a;
  p.even_ = recompute_evenness(segments);
  p.segments_ = std::move(segments);
  return p;
}

double PotentialSpec::min_value() const noexcept {
  double m = 0.0;
  for (const auto& s : segments_) m = std::min(m, s.value);
  return m;
}

double PotentialSpec::max_value() const noexcept {
  double m = 0.0;
  for (const auto& s : segments_) m = std::max(m, s.value);
  return m;
}

bool recompute_evenness(std::span<const Segment> segments) noexcept {
  const std::size_t n = segments.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Segment& s = segments[i];
    const Segment& m = segments[n - 1 - i];
    if (s.x_lo != -m.x_hi || s.x_hi != -m.x_lo || s.value != m.value) return false;
  }
  return true;
}

PotentialSpec make_square_well(double a, double depth) {
  if (!(a > 0.0)) geometry_error("square well half-width must be positive");
  return PotentialSpec::from_segments({{-a, a, -depth}});
}

PotentialSpec make_free(double a) { return make_square_well(a, 0.0); }

PotentialSpec make_even_bands(double a, std::span<const double> widths,
                              std::span<const double> heights) {
  if (!(a > 0.0)) geometry_error("half-width must be positive");
  if (widths.empty() || widths.size() != heights.size())
    geometry_error("band widths and heights must be non-empty and of equal length");

  // Outer edges of each band on the positive half-axis.
  std::vector<double> edges;
  std::vector<double> values(heights.begin(), heights.end());
  double x = 0.0;
  for (double w : widths) {
    if (!(w > 0.0)) geometry_error("band widths must be positive");
    x += w;
    edges.push_back(x);
  }
  if (x > a * (1.0 + kSumSlack)) {
    std::ostringstream os;
    os << "band widths sum to " << x << ", exceeding half-width " << a;
    geometry_error(os.str());
  }
  if (x >= a * (1.0 - kSumSlack)) {
    edges.back() = a;
  } else {
    edges.push_back(a);
    values.push_back(0.0);
  }

  // Left half is built as exact negatives of the right half so that the
  // evenness check can use bitwise equality.
  std::vector<Segment> segs;
  const std::size_t nb = edges.size();
  for (std::size_t j = nb; j-- > 1;) segs.push_back({-edges[j], -edges[j - 1], values[j]});
  segs.push_back({-edges[0], edges[0], values[0]});
  for (std::size_t j = 1; j < nb; ++j) segs.push_back({edges[j - 1], edges[j], values[j]});
  return PotentialSpec::from_segments(std::move(segs));
}

PotentialSpec make_steps(const StepFamilySpec& spec) {
  if (spec.widths.size() != spec.strengths.size())
    geometry_error("widths and strengths must have equal length");
  std::vector<double> heights(spec.widths.size());
  for (std::size_t j = 0; j < spec.widths.size(); ++j) {
    if (spec.widths[j] == 0.0) geometry_error("zero band width (height = strength / width)");
    heights[j] = spec.strengths[j] / spec.widths[j];
  }
  return make_even_bands(spec.half_width, spec.widths, heights);
}

PotentialSpec add_constant(const PotentialSpec& p, double v0) {
  std::vector<Segment> segs(p.segments().begin(), p.segments().end());
  for (auto& s : segs) s.value += v0;
  return PotentialSpec::from_segments(std::move(segs));
}

PotentialSpec mirrored(const PotentialSpec& p) {
  std::vector<Segment> segs;
  const auto src = p.segments();
  segs.reserve(src.size());
  for (auto it = src.rbegin(); it != src.rend(); ++it) segs.push_back({-it->x_hi, -it->x_lo, it->value});
  return PotentialSpec::from_segments(std::move(segs));
}

double value_at(const PotentialSpec& p, double x) noexcept {
  const double a = p.half_width();
  if (x < -a || x > a) return 0.0;
  const auto segs = p.segments();
  auto it = std::upper_bound(segs.begin(), segs.end(), x,
                             [](double v, const Segment& s) { return v < s.x_lo; });
  // it points past the last segment with x_lo <= x.
  if (it == segs.begin()) return segs.front().value;
  return std::prev(it)->value;
}

}  // namespace ptlab
