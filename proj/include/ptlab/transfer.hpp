#pragma once

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

#include "ptlab/potential.hpp"

namespace ptlab {

using Complex = std::complex<double>;

/// 2x2 complex matrix mapping (psi, psi') at x_lo to (psi, psi') at x_hi.
///
/// Entries are stored in scaled form: the physical matrix is
/// exp(log_scale) * [[m11, m12], [m21, m22]]. Scaling is only introduced for
/// evanescent segments with |Im(q L)| > 1, so the stored entries stay O(|q|)
/// even when the physical ones would overflow.
struct TransferMatrix {
  Complex m11{1.0}, m12{0.0}, m21{0.0}, m22{1.0};
  double log_scale = 0.0;

  static TransferMatrix identity() noexcept { return {}; }

  /// Physical entries (may overflow for extreme tunnelling).
  TransferMatrix unscaled() const;
  Complex det() const;
};

/// this * rhs: apply rhs first.
TransferMatrix operator*(const TransferMatrix& lhs, const TransferMatrix& rhs) noexcept;

/// Transfer matrix and its derivative in mu, sharing one scale factor.
struct TransferJet {
  TransferMatrix value;
  Complex d11{0.0}, d12{0.0}, d21{0.0}, d22{0.0};
};

struct BoundaryState {
  Complex psi;
  Complex dpsi;
};

struct ScatteringAmplitudes {
  Complex R;
  Complex T;
  double k = 0.0;
};

struct TransmissionPoint {
  double k2;
  double T2;
  double R2;
  double argT;
};

/// Propagator across a constant band: with q^2 = mu - value,
/// [[cos qL, sin(qL)/q], [-q sin qL, cos qL]]. Only the even functions of q
/// are ever formed, so the result is entire in mu and independent of the
/// square-root branch; a Taylor series takes over for small |q^2 L^2|.
TransferMatrix segment_propagator(double value, double width, Complex mu);
TransferJet segment_jet(double value, double width, Complex mu);

TransferMatrix total_transfer(const PotentialSpec& p, Complex mu);
TransferJet total_transfer_jet(const PotentialSpec& p, Complex mu);

/// Propagation across [x_from, x_to] (x_from <= x_to), clipping segments and
/// using the free propagator outside [-a, a].
TransferMatrix interval_transfer(const PotentialSpec& p, double x_from, double x_to, Complex mu);

BoundaryState apply(const TransferMatrix& m, const BoundaryState& s);

/// Unit incident wave from the left: psi = e^{ikx} + R e^{-ikx} for x <= -a,
/// psi = T e^{ikx} for x >= a.
ScatteringAmplitudes scattering_amplitudes(const PotentialSpec& p, double k);

/// Tabulates |T|^2, |R|^2 and arg T over a grid of k^2 > 0, in grid order.
std::vector<TransmissionPoint> transmission_curve(const PotentialSpec& p,
                                                  std::span<const double> k2_grid);

/// CSV with header `k2,T2,R2,argT`, 17 significant digits.
void write_transmission_csv(std::ostream& os, std::span<const TransmissionPoint> points);

}  // namespace ptlab
