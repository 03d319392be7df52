#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/transfer.hpp"

using namespace ptlab;

namespace {

double max_diff(const TransferMatrix& m, const oracle::Mat& o) {
  const TransferMatrix u = m.unscaled();
  return std::max({std::abs(u.m11 - o[0]), std::abs(u.m12 - o[1]), std::abs(u.m21 - o[2]),
                   std::abs(u.m22 - o[3])});
}

}  // namespace

TEST_CASE("matches RK4 integration, real and complex mu") {
  const double a = std::numbers::pi / 4;
  const auto p = make_steps({a, {0.2, a - 0.7, 0.5}, {-90.0, 0.0, -100.0}});
  for (Complex mu : {Complex(150.0), Complex(-300.0, 0.0), Complex(37.0, 12.0), Complex(1e-9)}) {
    const auto o = oracle::rk4_transfer(p, mu);
    double scale = 0.0;
    for (auto v : o) scale = std::max(scale, std::abs(v));
    CHECK(max_diff(total_transfer(p, mu), o) < 1e-8 * scale);
  }
}

TEST_CASE("free segment closed form") {
  const double L = 1.3;
  for (Complex mu : {Complex(4.0), Complex(-4.0), Complex(2.0, 1.0)}) {
    const Complex q = std::sqrt(mu);
    const auto m = segment_propagator(0.0, L, mu).unscaled();
    CHECK(std::abs(m.m11 - std::cos(q * L)) < 1e-13);
    CHECK(std::abs(m.m12 - std::sin(q * L) / q) < 1e-13);
    CHECK(std::abs(m.m21 + q * std::sin(q * L)) < 1e-12);
  }
}

TEST_CASE("series and direct forms join continuously") {
  const double L = 1.0;
  // |q^2 L^2| straddles the 1e-2 switch.
  for (double r : {0.99e-2, 1.01e-2}) {
    for (double ph : {0.0, 1.0, 2.5, std::numbers::pi}) {
      const Complex mu = std::polar(r, ph);
      const auto m = segment_jet(0.0, L, mu);
      const Complex q = std::sqrt(mu);
      CHECK(std::abs(m.value.m11 - std::cos(q)) < 1e-15);
      CHECK(std::abs(m.value.m12 - std::sin(q) / q) < 1e-15);
      CHECK(std::abs(m.value.m21 + q * std::sin(q)) < 1e-15);
      CHECK(std::abs(m.d11 + 0.5 * std::sin(q) / q) < 1e-14);
    }
  }
  const auto z = segment_propagator(0.0, L, 0.0);
  CHECK(z.m12 == Complex(1.0));
  CHECK(z.m21 == Complex(0.0));
}

TEST_CASE("mu-derivative against finite differences") {
  const double a = 1.0;
  const auto p = PotentialSpec::from_segments({{-a, -0.3, 5.0}, {-0.3, 0.4, -20.0}, {0.4, a, 40.0}});
  for (Complex mu : {Complex(3.0), Complex(-10.0, 2.0), Complex(60.0, -5.0)}) {
    const auto j = total_transfer_jet(p, mu);
    const double h = 1e-5;
    const auto fp = total_transfer(p, mu + h).unscaled();
    const auto fm = total_transfer(p, mu - h).unscaled();
    const double s = std::exp(j.value.log_scale);
    CHECK(std::abs(j.d12 * s - (fp.m12 - fm.m12) / (2 * h)) < 1e-6 * (1 + std::abs(j.d12 * s)));
    CHECK(std::abs(j.d21 * s - (fp.m21 - fm.m21) / (2 * h)) < 1e-6 * (1 + std::abs(j.d21 * s)));
  }
}

TEST_CASE("scaled form survives deep tunnelling") {
  const double a = 5.0, v = 400.0;
  const auto p = make_square_well(a, -v);
  const auto m = total_transfer(p, 1.0);
  CHECK(m.log_scale > 100.0);
  CHECK(std::isfinite(std::abs(m.m11)));
  const auto amp = scattering_amplitudes(p, 1.0);
  const auto ref = oracle::square_transmission(a, v, 1.0);
  CHECK(std::abs(std::log(std::abs(amp.T)) - std::log(std::abs(ref))) < 1e-9);
  CHECK(std::abs(std::abs(amp.R) - 1.0) < 1e-12);
}

TEST_CASE("free potential is transparent") {
  const auto amp = scattering_amplitudes(make_free(1.7), 2.3);
  CHECK(std::abs(amp.T - 1.0) < 1e-14);
  CHECK(std::abs(amp.R) < 1e-14);
}

TEST_CASE("square barrier transmission amplitude") {
  for (double k : {0.3, 1.0, 2.0, 5.0}) {
    const auto amp = scattering_amplitudes(make_square_well(0.8, -3.0), k);
    CHECK(std::abs(amp.T - oracle::square_transmission(0.8, 3.0, k)) < 1e-12);
  }
}

TEST_CASE("unimodularity and flux on random potentials") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto p = oracle::random_potential(rng, 1 + t % 6, 1.0, 30.0);
    for (double k : {0.5, 3.0, 9.0}) {
      // Cancellation in m11 m22 - m12 m21 costs eps * |M|^2 whatever the
      // method, so the bound grows with the evanescent amplification.
      const auto m = total_transfer(p, k * k).unscaled();
      const double norm = std::max({std::abs(m.m11), std::abs(m.m12), std::abs(m.m21), std::abs(m.m22)});
      CHECK(std::abs(m.det() - 1.0) < 1e-12 + 16 * 2.2e-16 * norm * norm);
      const auto amp = scattering_amplitudes(p, k);
      CHECK(std::abs(std::norm(amp.R) + std::norm(amp.T) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("unimodular on the step potential at real energies") {
  const double a = std::numbers::pi / 4;
  const auto p = make_steps({a, {0.2, a - 0.7, 0.5}, {-90.0, 0.0, -100.0}});
  for (double mu : {1.0, 50.0, 150.0, 300.0, 460.0, 900.0})
    CHECK(std::abs(total_transfer(p, mu).det() - 1.0) < 1e-12);
}

TEST_CASE("interval transfer composes") {
  const auto p = PotentialSpec::from_segments({{-1, 0.2, 5.0}, {0.2, 1, -7.0}});
  const Complex mu(2.0, 0.5);
  const auto whole = total_transfer(p, mu).unscaled();
  const auto parts = (interval_transfer(p, -0.1, 1.0, mu) * interval_transfer(p, -1.0, -0.1, mu)).unscaled();
  CHECK(std::abs(whole.m12 - parts.m12) < 1e-12);
  CHECK(std::abs(whole.m21 - parts.m21) < 1e-11);
  // Outside the support only free propagation happens.
  const auto out = interval_transfer(p, 1.0, 2.0, mu).unscaled();
  CHECK(std::abs(out.m11 - std::cos(std::sqrt(mu))) < 1e-14);
  const BoundaryState s = apply(total_transfer(p, mu).unscaled(), {1.0, 0.0});
  CHECK(std::abs(s.psi - whole.m11) < 1e-15);
}

TEST_CASE("argument errors") {
  CHECK_THROWS_AS(scattering_amplitudes(make_free(1.0), 0.0), Error);
  CHECK_THROWS_AS(scattering_amplitudes(make_free(1.0), -1.0), Error);
  const std::vector<double> bad{1.0, -1.0};
  CHECK_THROWS_AS(transmission_curve(make_free(1.0), bad), Error);
  CHECK_THROWS_AS(segment_propagator(0.0, -1.0, 1.0), Error);
}

TEST_CASE("transmission csv") {
  const std::vector<double> g{1.0, 2.0};
  const auto pts = transmission_curve(make_square_well(1.0, 2.0), g);
  std::ostringstream os;
  write_transmission_csv(os, pts);
  const std::string s = os.str();
  CHECK(s.rfind("k2,T2,R2,argT\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 3);
  CHECK(std::abs(pts[0].T2 + pts[0].R2 - 1.0) < 1e-12);
}
