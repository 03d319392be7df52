#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "ptlab/errors.hpp"
#include "ptlab/potential.hpp"

using namespace ptlab;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::internal_inconsistency;
}

}  // namespace

TEST_CASE("partition validation") {
  CHECK_NOTHROW(PotentialSpec::from_segments({{-1, 0, 2}, {0, 1, 3}}));
  CHECK(code_of([] { PotentialSpec::from_segments({}); }) == ErrorCode::invalid_geometry);
  CHECK(code_of([] { PotentialSpec::from_segments({{-1, 0, 2}, {0.1, 1, 3}}); }) ==
        ErrorCode::invalid_geometry);
  CHECK(code_of([] { PotentialSpec::from_segments({{-1, 0.2, 2}, {0.1, 1, 3}}); }) ==
        ErrorCode::invalid_geometry);
  CHECK(code_of([] { PotentialSpec::from_segments({{-0.5, 1, 0}}); }) == ErrorCode::invalid_geometry);
  CHECK(code_of([] { PotentialSpec::from_segments({{-1, 1, NAN}}); }) == ErrorCode::invalid_geometry);
  CHECK(code_of([] { make_square_well(0.0, 1.0); }) == ErrorCode::invalid_geometry);
}

TEST_CASE("square well and free") {
  const auto w = make_square_well(2.0, 1.0);
  CHECK(w.half_width() == 2.0);
  REQUIRE(w.segments().size() == 1);
  CHECK(w.segments()[0].value == -1.0);
  CHECK(w.is_even());
  CHECK(w.min_value() == -1.0);
  CHECK(w.max_value() == 0.0);
  CHECK(make_free(1.0).segments()[0].value == 0.0);
}

TEST_CASE("step heights are strength over width") {
  const double a = std::numbers::pi / 4;
  StepFamilySpec s{a, {0.2, a - 0.7, 0.5}, {-90.0, 0.0, -100.0}};
  const auto p = make_steps(s);
  CHECK(p.is_even());
  REQUIRE(p.segments().size() == 5);
  CHECK(p.segments()[2].value == doctest::Approx(-450.0).epsilon(1e-14));
  CHECK(p.segments()[1].value == 0.0);
  CHECK(p.segments()[0].value == doctest::Approx(-200.0).epsilon(1e-14));
  CHECK(p.segments().front().x_lo == -a);
  CHECK(p.segments().back().x_hi == a);

  CHECK(code_of([&] { make_steps({a, {0.2, 0.0}, {1.0, 1.0}}); }) == ErrorCode::invalid_geometry);
  CHECK(code_of([&] { make_steps({a, {0.2, 0.3}, {1.0}}); }) == ErrorCode::invalid_geometry);
  CHECK(code_of([&] { make_steps({a, {0.5, 0.5}, {1.0, 1.0}}); }) == ErrorCode::invalid_geometry);
}

TEST_CASE("even bands pad with a zero band") {
  const std::vector<double> w{0.5}, h{-3.0};
  const auto p = make_even_bands(2.0, w, h);
  REQUIRE(p.segments().size() == 3);
  CHECK(value_at(p, 0.0) == -3.0);
  CHECK(value_at(p, 1.0) == 0.0);
  CHECK(value_at(p, -1.0) == 0.0);
  CHECK(p.is_even());
}

TEST_CASE("value_at conventions") {
  const auto p = PotentialSpec::from_segments({{-1, 0, 2}, {0, 1, 3}});
  CHECK(value_at(p, -1.0) == 2.0);
  CHECK(value_at(p, 0.0) == 3.0);  // left-closed
  CHECK(value_at(p, 1.0) == 3.0);
  CHECK(value_at(p, 1.5) == 0.0);
  CHECK(value_at(p, -1.5) == 0.0);
  CHECK_FALSE(p.is_even());
}

TEST_CASE("shift and mirror") {
  const auto p = PotentialSpec::from_segments({{-1, 0.25, 2}, {0.25, 1, -3}});
  const auto q = add_constant(p, 1.5);
  CHECK(value_at(q, 0.0) == 3.5);
  CHECK(value_at(q, 0.5) == -1.5);
  const auto m = mirrored(p);
  CHECK(value_at(m, -0.5) == -3.0);
  CHECK(value_at(m, 0.5) == 2.0);
  CHECK(mirrored(m) == p);
  const auto e = make_square_well(1.0, 2.0);
  CHECK(mirrored(e) == e);
}
