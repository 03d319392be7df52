#pragma once

// Independent reference computations. Nothing here calls the transfer-matrix
// code under test.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "ptlab/potential.hpp"

namespace oracle {

using C = std::complex<double>;
using Mat = std::array<C, 4>;  // row-major m11 m12 m21 m22

// RK4 on psi'' = (v - mu) psi for the two unit initial states.
inline Mat rk4_transfer(const ptlab::PotentialSpec& p, C mu, int steps_per_segment = 4000) {
  C y[2][2] = {{1.0, 0.0}, {0.0, 1.0}};  // columns: (psi, psi') per start state
  for (const auto& s : p.segments()) {
    const double h = s.width() / steps_per_segment;
    const C w = s.value - mu;
    for (int n = 0; n < steps_per_segment; ++n) {
      for (auto& st : y) {
        auto f = [&](C a, C b) { return std::array<C, 2>{b, w * a}; };
        auto k1 = f(st[0], st[1]);
        auto k2 = f(st[0] + 0.5 * h * k1[0], st[1] + 0.5 * h * k1[1]);
        auto k3 = f(st[0] + 0.5 * h * k2[0], st[1] + 0.5 * h * k2[1]);
        auto k4 = f(st[0] + h * k3[0], st[1] + h * k3[1]);
        st[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        st[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
      }
    }
  }
  return {y[0][0], y[1][0], y[0][1], y[1][1]};
}

// Secular function of a square well of depth v0 on [-a, a], from the
// closed-form free propagation with q^2 = mu + v0.
inline C square_well_secular(double a, double v0, double alpha, C mu) {
  const C q = std::sqrt(mu + v0);
  if (std::abs(q) < 1e-8) return (alpha * alpha - (mu + v0)) * 2.0 * a;
  return (alpha * alpha - q * q) * std::sin(2.0 * a * q) / q;
}

// Square barrier/well transmission amplitude by plane-wave matching.
inline C square_transmission(double a, double v, double k) {
  const C q = std::sqrt(C(k * k - v));
  const double L = 2.0 * a;
  const C denom = std::cos(q * L) - C(0, 1) * (k * k + q * q) / (2.0 * k * q) * std::sin(q * L);
  return std::exp(C(0, -1) * k * L) / denom;
}

// Random piecewise potential on [-a, a] with n bands.
inline ptlab::PotentialSpec random_potential(std::mt19937_64& rng, int n, double a, double vmax) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> cuts{-a, a};
  for (int i = 1; i < n; ++i) cuts.push_back(-a + 2.0 * a * (0.05 + 0.9 * u(rng)));
  std::sort(cuts.begin(), cuts.end());
  std::vector<ptlab::Segment> segs;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    if (cuts[i + 1] > cuts[i]) segs.push_back({cuts[i], cuts[i + 1], vmax * (2.0 * u(rng) - 1.0)});
  segs.front().x_lo = -a;
  segs.back().x_hi = a;
  return ptlab::PotentialSpec::from_segments(segs);
}

}  // namespace oracle
