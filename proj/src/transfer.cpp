#include "ptlab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "ptlab/errors.hpp"
#include "ptlab/format.hpp"

namespace ptlab {
namespace {

// Below this |q^2 L^2| the Taylor series of the entire functions is used.
constexpr double kSeriesThreshold = 1e-2;

struct EvenParts {
  Complex c;      // cos(qL)
  Complex s;      // sin(qL)/q
  Complex t;      // q sin(qL)
  Complex ds;     // d/dmu of sin(qL)/q
  double log_scale;
};

// cos(sqrt(z)) = sum (-z)^n/(2n)!, sin(sqrt(z))/sqrt(z) = sum (-z)^n/(2n+1)!
// and the mu-derivative of the latter, all with z = q^2 L^2.
EvenParts series_parts(Complex q2, double L) {
  const Complex z = q2 * L * L;
  Complex c{0.0}, s{0.0}, ds{0.0};
  Complex pw{1.0};       // (-z)^n
  Complex pw_prev{0.0};  // (-z)^(n-1)
  double fact_even = 1.0;  // (2n)!
  double fact_odd = 1.0;   // (2n+1)!
  for (int n = 0; n < 12; ++n) {
    c += pw / fact_even;
    s += pw / fact_odd;
    if (n >= 1) ds -= static_cast<double>(n) * pw_prev / fact_odd;
    pw_prev = pw;
    pw *= -z;
    fact_even *= (2.0 * n + 1.0) * (2.0 * n + 2.0);
    fact_odd *= (2.0 * n + 2.0) * (2.0 * n + 3.0);
  }
  return {c, L * s, q2 * L * s, L * L * L * ds, 0.0};
}

EvenParts direct_parts(Complex q2, double L) {
  // Any square root works: all outputs are even in q. Take Im(qL) >= 0 so
  // that e^{iqL} is the decaying exponential.
  Complex q = std::sqrt(q2);
  if (q.imag() < 0.0) q = -q;
  const Complex w = q * L;
  const double t = w.imag();
  const Complex I{0.0, 1.0};
  EvenParts out{};
  if (t > 1.0) {
    // Factor out e^{t}: e^{-iw} e^{-t} has unit modulus.
    const Complex ep = std::exp(I * w - t);   // |.| = e^{-2t}
    const Complex em = std::exp(-I * w - t);  // |.| = 1
    out.c = 0.5 * (ep + em);
    const Complex sinw = (ep - em) / (2.0 * I);
    out.s = sinw / q;
    out.t = q * sinw;
    out.log_scale = t;
  } else {
    out.c = std::cos(w);
    const Complex sinw = std::sin(w);
    out.s = sinw / q;
    out.t = q * sinw;
    out.log_scale = 0.0;
  }
  out.ds = (L * out.c - out.s) / (2.0 * q2);
  return out;
}

EvenParts even_parts(Complex q2, double L) {
  if (std::abs(q2) * L * L < kSeriesThreshold) return series_parts(q2, L);
  return direct_parts(q2, L);
}

}  // namespace

TransferMatrix TransferMatrix::unscaled() const {
  const double f = std::exp(log_scale);
  return {m11 * f, m12 * f, m21 * f, m22 * f, 0.0};
}

Complex TransferMatrix::det() const {
  return (m11 * m22 - m12 * m21) * std::exp(2.0 * log_scale);
}

TransferMatrix operator*(const TransferMatrix& l, const TransferMatrix& r) noexcept {
  return {l.m11 * r.m11 + l.m12 * r.m21, l.m11 * r.m12 + l.m12 * r.m22,
          l.m21 * r.m11 + l.m22 * r.m21, l.m21 * r.m12 + l.m22 * r.m22,
          l.log_scale + r.log_scale};
}

TransferJet segment_jet(double value, double width, Complex mu) {
  if (!(width >= 0.0)) throw Error(ErrorCode::invalid_argument, "segment width must be non-negative");
  TransferJet jet;
  if (width == 0.0) return jet;
  const Complex q2 = mu - value;
  const EvenParts e = even_parts(q2, width);
  jet.value = {e.c, e.s, -e.t, e.c, e.log_scale};
  // dc/dmu = -L s/2, dt/dmu = (s + L c)/2. Derivatives carry the same
  // e^{-log_scale} factor as the value.
  jet.d11 = -0.5 * width * e.s;
  jet.d12 = e.ds;
  jet.d21 = -0.5 * (e.s + width * e.c);
  jet.d22 = jet.d11;
  return jet;
}

TransferMatrix segment_propagator(double value, double width, Complex mu) {
  return segment_jet(value, width, mu).value;
}

TransferMatrix total_transfer(const PotentialSpec& p, Complex mu) {
  TransferMatrix m;
  for (const auto& s : p.segments()) m = segment_propagator(s.value, s.width(), mu) * m;
  return m;
}

TransferJet total_transfer_jet(const PotentialSpec& p, Complex mu) {
  TransferJet acc;
  for (const auto& s : p.segments()) {
    const TransferJet seg = segment_jet(s.value, s.width(), mu);
    const TransferMatrix& A = seg.value;
    const TransferMatrix& P = acc.value;
    // d(A P) = dA P + A dP
    TransferJet next;
    next.value = A * P;
    next.d11 = seg.d11 * P.m11 + seg.d12 * P.m21 + A.m11 * acc.d11 + A.m12 * acc.d21;
    next.d12 = seg.d11 * P.m12 + seg.d12 * P.m22 + A.m11 * acc.d12 + A.m12 * acc.d22;
    next.d21 = seg.d21 * P.m11 + seg.d22 * P.m21 + A.m21 * acc.d11 + A.m22 * acc.d21;
    next.d22 = seg.d21 * P.m12 + seg.d22 * P.m22 + A.m21 * acc.d12 + A.m22 * acc.d22;
    acc = next;
  }
  return acc;
}

TransferMatrix interval_transfer(const PotentialSpec& p, double x_from, double x_to, Complex mu) {
  if (!(x_to >= x_from)) throw Error(ErrorCode::invalid_argument, "interval must be ordered");
  const double a = p.half_width();
  TransferMatrix m;
  auto step = [&](double lo, double hi, double v) {
    if (hi > lo) m = segment_propagator(v, hi - lo, mu) * m;
  };
  step(x_from, std::min(x_to, -a), 0.0);
  for (const auto& s : p.segments()) step(std::max(x_from, s.x_lo), std::min(x_to, s.x_hi), s.value);
  step(std::max(x_from, a), x_to, 0.0);
  return m;
}

BoundaryState apply(const TransferMatrix& m, const BoundaryState& s) {
  const double f = std::exp(m.log_scale);
  return {(m.m11 * s.psi + m.m12 * s.dpsi) * f, (m.m21 * s.psi + m.m22 * s.dpsi) * f};
}

ScatteringAmplitudes scattering_amplitudes(const PotentialSpec& p, double k) {
  if (!(k > 0.0) || !std::isfinite(k))
    throw Error(ErrorCode::invalid_argument, "wavenumber must be positive");
  const TransferMatrix m = total_transfer(p, Complex{k * k, 0.0});
  const double a = p.half_width();
  const Complex I{0.0, 1.0};
  // Decompose the propagated plane waves on the right edge into e^{+-ikx}
  // components; B is the e^{-ikx} part of the image of e^{ikx}, D that of
  // e^{-ikx}. Continuity gives R = -B/D, and det M = 1 gives T = 1/D.
  const Complex B = 0.5 * (m.m11 - m.m22 + I * k * m.m12 + (I / k) * m.m21);
  const Complex D = 0.5 * std::exp(2.0 * I * k * a) *
                    (m.m11 + m.m22 - I * k * m.m12 + (I / k) * m.m21);
  if (std::abs(D) == 0.0 || !std::isfinite(std::abs(D)))
    throw Error(ErrorCode::numerical_singularity, "scattering system is singular");
  ScatteringAmplitudes out;
  out.k = k;
  out.R = -B / D;
  out.T = std::exp(-m.log_scale) / D;
  return out;
}

std::vector<TransmissionPoint> transmission_curve(const PotentialSpec& p,
                                                  std::span<const double> k2_grid) {
  std::vector<TransmissionPoint> out;
  out.reserve(k2_grid.size());
  for (double k2 : k2_grid) {
    if (!(k2 > 0.0)) throw Error(ErrorCode::invalid_argument, "transmission grid must be positive");
    const auto amp = scattering_amplitudes(p, std::sqrt(k2));
    out.push_back({k2, std::norm(amp.T), std::norm(amp.R), std::arg(amp.T)});
  }
  return out;
}

void write_transmission_csv(std::ostream& os, std::span<const TransmissionPoint> points) {
  os << "k2,T2,R2,argT\n";
  for (const auto& pt : points)
    os << fmt17(pt.k2) << ',' << fmt17(pt.T2) << ',' << fmt17(pt.R2) << ',' << fmt17(pt.argT) << '\n';
}

}  // namespace ptlab
