#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "ptlab/spectrum.hpp"

using namespace ptlab;
using std::numbers::pi;

namespace {

PotentialSpec steps90(double beta1 = -90.0) {
  const double a = pi / 4;
  return make_steps({a, {0.2, a - 0.7, 0.5}, {beta1, 0.0, -100.0}});
}

// Greedy conjugate matching: worst distance from z to conj of its partner.
double pairing_gap(std::vector<Complex> a, std::vector<Complex> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  for (Complex z : a) {
    auto it = std::min_element(b.begin(), b.end(), [&](Complex x, Complex y) {
      return std::abs(std::conj(x) - z) < std::abs(std::conj(y) - z);
    });
    worst = std::max(worst, std::abs(std::conj(*it) - z));
    b.erase(it);
  }
  return worst;
}

}  // namespace

TEST_CASE("secular function against closed forms") {
  const double a = 1.3;
  for (Complex mu : {Complex(2.0), Complex(-1.0, 0.7), Complex(30.0, -4.0)}) {
    for (double alpha : {0.0, 0.8, -2.0}) {
      const Complex f = secular(make_free(a), {alpha}, mu);
      const Complex ref = oracle::square_well_secular(a, 0.0, alpha, mu);
      CHECK(std::abs(f - ref) < 1e-11 * (1 + std::abs(ref)));
      const Complex fw = secular(make_square_well(a, 3.0), {alpha}, mu);
      CHECK(std::abs(fw - oracle::square_well_secular(a, 3.0, alpha, mu)) < 1e-11 * (1 + std::abs(fw)));
    }
  }
  const auto w = make_square_well(2.0, 1.0);
  CHECK(std::abs(secular(w, {0.5}, -0.75)) < 1e-14);
  CHECK(std::abs(secular(w, {0.5}, pi * pi / 16 - 1)) < 1e-14);
}

TEST_CASE("secular derivatives") {
  const auto p = steps90();
  const double alpha = 7.0, h = 1e-6;
  const Complex mu(120.0, 3.0);
  const auto sv = secular_jet(p, alpha, mu);
  const Complex fd_mu = (secular(p, {alpha}, mu + h) - secular(p, {alpha}, mu - h)) / (2 * h);
  const Complex fd_a = (secular(p, {alpha + h}, mu) - secular(p, {alpha - h}, mu)) / (2 * h);
  CHECK(std::abs(sv.physical_dmu() - fd_mu) < 1e-6 * std::abs(fd_mu));
  CHECK(std::abs(sv.physical_dalpha() - fd_a) < 1e-6 * std::abs(fd_a));
}

TEST_CASE("square well spectrum by contour") {
  const auto w = make_square_well(2.0, 1.0);
  // Re up to 16 so that the n = 4, 5 levels (8.87, 14.42) are inside.
  const auto roots = find_eigenvalues(w, {0.5}, {-2, 16, -1, 1}, 20);
  const std::vector<double> expect{-0.75, pi * pi / 16 - 1, pi * pi / 4 - 1, 9 * pi * pi / 16 - 1,
                                   pi * pi - 1, 25 * pi * pi / 16 - 1};
  REQUIRE(roots.size() == expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(roots[i] - expect[i]) < 1e-10);

  const auto sw = square_well_eigenvalues(2.0, 1.0, {0.5}, 2);
  REQUIRE(sw.size() == 3);
  CHECK(sw[1].real() == doctest::Approx(-0.38314972).epsilon(1e-7));
  CHECK(sw[2].real() == doctest::Approx(1.4674011).epsilon(1e-7));
  CHECK(square_well_eigenvalues(1.0, 2.0, {3.0}, 0).size() == 1);
}

TEST_CASE("free potential, Neumann limit") {
  const auto roots = find_eigenvalues(make_free(2.0), {0.0}, {-0.5, 3.0, -0.5, 0.5}, 10);
  REQUIRE(roots.size() == 3);
  CHECK(std::abs(roots[0]) < 1e-10);
  CHECK(std::abs(roots[1] - pi * pi / 16) < 1e-10);
  CHECK(std::abs(roots[2] - pi * pi / 4) < 1e-10);
}

TEST_CASE("degenerate double root is counted twice") {
  // alpha^2 = (pi/2a)^2 makes the n = 0 and n = 1 levels coincide.
  const double a = 2.0;
  const auto roots = find_eigenvalues(make_free(a), {pi / (2 * a)}, {0.3, 1.0, -0.3, 0.3}, 5);
  REQUIRE(roots.size() == 2);
  CHECK(std::abs(roots[0] - pi * pi / 16) < 1e-6);
  CHECK(std::abs(roots[1] - pi * pi / 16) < 1e-6);
}

TEST_CASE("capacity and argument errors") {
  const auto w = make_square_well(2.0, 1.0);
  CHECK_THROWS_AS(find_eigenvalues(w, {0.5}, {-2, 6, -1, 1}, 3), Error);
  try {
    find_eigenvalues(w, {0.5}, {-2, 6, -1, 1}, 3);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::capacity_exceeded);
  }
  CHECK_THROWS_AS(find_eigenvalues(w, {0.5}, {1, 1, -1, 1}, 3), Error);
  CHECK_THROWS_AS(find_eigenvalues(w, {0.5}, {-2, 6, -1, 1}, 0), Error);
}

TEST_CASE("step potential has complex pairs, closed under conjugation") {
  const auto p = steps90();
  bool found_pair = false;
  for (double alpha : {5.0, 10.0, 15.0}) {
    const auto r = find_eigenvalues(p, {alpha}, {-460, 700, -200, 200}, 200);
    std::vector<Complex> c;
    for (Complex z : r) c.push_back(std::conj(z));
    CHECK(pairing_gap(r, c) < 1e-8);
    for (Complex z : r) found_pair = found_pair || std::abs(z.imag()) > 1e-3;
    const auto rm = find_eigenvalues(p, {-alpha}, {-460, 700, -200, 200}, 200);
    CHECK(pairing_gap(r, rm) < 1e-8);
  }
  CHECK(found_pair);
}

TEST_CASE("alpha -> -alpha conjugation holds without evenness") {
  const auto p = PotentialSpec::from_segments({{-1, 0.3, -30.0}, {0.3, 1, 10.0}});
  CHECK_FALSE(p.is_even());
  const ComplexBox box{-40, 80, -30, 30};
  const auto r = find_eigenvalues(p, {2.5}, box, 100);
  const auto rm = find_eigenvalues(p, {-2.5}, box, 100);
  CHECK(pairing_gap(r, rm) < 1e-8);
}

TEST_CASE("winding count equals returned roots on random boxes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto p = steps90();
  for (int t = 0; t < 10; ++t) {
    const double x0 = -450 + 900 * u(rng), y0 = -100 + 200 * u(rng);
    const ComplexBox b{x0, x0 + 20 + 150 * u(rng), y0, y0 + 10 + 80 * u(rng)};
    const double alpha = 20 * u(rng);
    const int n = winding_count(p, {alpha}, b);
    const auto r = find_eigenvalues(p, {alpha}, b, 100);
    CHECK(static_cast<int>(r.size()) == n);
    for (Complex z : r) CHECK(b.contains(z));
  }
}

TEST_CASE("continuation on square well branches") {
  const auto w = make_square_well(2.0, 1.0);
  const auto b0 = continue_branch(w, 0.0, -1.0, 0.0, 3.0, 0.05);
  CHECK(b0.end == BranchEnd::range_end);
  CHECK(b0.samples.front().alpha == 0.0);
  CHECK(b0.samples.back().alpha == 3.0);
  for (const auto& s : b0.samples) CHECK(std::abs(s.mu - (s.alpha * s.alpha - 1.0)) < 1e-10);

  const double c = pi * pi / 16 - 1;
  const auto b1 = continue_branch(w, 1.0, c, 0.0, 2.0, 0.1, {}, 1);
  for (const auto& s : b1.samples) CHECK(std::abs(s.mu - c) < 1e-10);
  for (std::size_t i = 1; i < b1.samples.size(); ++i) CHECK(b1.samples[i].alpha > b1.samples[i - 1].alpha);

  CHECK_THROWS_AS(continue_branch(w, 0.0, -0.5, 0.0, 1.0, 0.1), Error);
}

TEST_CASE("step potential branch: residuals and analyticity probe") {
  const auto p = steps90();
  const auto seeds = reference_seeds(p, {-460, 60, -1, 1}, 50);
  REQUIRE(!seeds.empty());
  const auto b = continue_branch(p, 0.0, seeds[0].second, 0.0, 25.0, 0.05);
  for (const auto& s : b.samples) CHECK(std::abs(secular_jet(p, s.alpha, s.mu).f) < 1e-10);
  for (std::size_t i = 1; i + 1 < b.samples.size(); i += 17) {
    const auto& l = b.samples[i - 1];
    const auto& r = b.samples[i + 1];
    if (std::abs(b.samples[i].mu.imag()) > 0 || r.alpha - l.alpha > 0.2) continue;
    const Complex dd = (r.mu - l.mu) / (r.alpha - l.alpha);
    const Complex ift = branch_slope(p, b.samples[i].alpha, b.samples[i].mu);
    CHECK(std::abs(dd - ift) < 1e-2 * (1 + std::abs(ift)));
  }
  std::ostringstream os;
  write_branch_csv(os, b);
  CHECK(os.str().rfind("alpha,re_mu,im_mu,residual\n", 0) == 0);
}

TEST_CASE("square-well depth family has no exceptional point") {
  const double a = 2.0, alpha = 0.3;
  const PotentialFamily fam = [a](double v0) { return make_square_well(a, v0); };
  // Levels only translate with depth: any change in the window count comes
  // from roots crossing the window edge, never from a collision.
  CHECK_THROWS_AS(locate_exceptional_point(fam, FixedAlpha{alpha}, 0.5, 3.0, 0.0, {.window = 2.0}),
                  NoExceptionalPoint);
  try {
    locate_exceptional_point(fam, FixedAlpha{alpha}, 0.5, 0.6, 0.0, {.window = 2.0});
    FAIL("expected precondition failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::precondition_failed);
  }
  CHECK_THROWS_AS(refine_exceptional_point(fam, FixedAlpha{alpha}, 1.0, alpha * alpha - 1.0), NoExceptionalPoint);
}

TEST_CASE("exceptional point json") {
  ExceptionalPoint ep{-140.0, Complex(190.0, 0.0), 2, 3, 1e-12, 1e-10};
  const std::string s = to_json(ep);
  CHECK(s.find("\"theta\"") != std::string::npos);
  CHECK(s.find("\"residual_dF\"") != std::string::npos);
}
