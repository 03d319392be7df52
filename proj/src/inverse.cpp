#include "ptlab/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "ptlab/errors.hpp"
#include "ptlab/format.hpp"
#include "ptlab/monotone_cubic.hpp"
#include "ptlab/parallel.hpp"
#include "ptlab/pte.hpp"

namespace ptlab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

bool is_real(Complex z) { return std::abs(z.imag()) <= 1e-9 * (1.0 + std::abs(z)); }

void certify(MeasurementCurve& c) {
  c.monotone = c.samples.size() >= 2;
  c.min_slope = std::numeric_limits<double>::infinity();
  int sign = 0;
  for (std::size_t i = 0; i + 1 < c.samples.size(); ++i) {
    const double s = (c.samples[i + 1].kappa - c.samples[i].kappa) / (c.samples[i + 1].v0 - c.samples[i].v0);
    const int si = (s > 0.0) - (s < 0.0);
    if (si == 0 || (sign != 0 && si != sign)) c.monotone = false;
    sign = si;
    c.min_slope = std::min(c.min_slope, std::abs(s));
  }
  if (c.samples.size() < 2) c.min_slope = 0.0;
}

// Nearest PTE to `predicted` within `gate`, or nullopt.
std::optional<PteRecord> nearest(const std::vector<PteRecord>& recs, double predicted, double gate) {
  std::optional<PteRecord> best;
  for (const auto& r : recs) {
    const double d = std::abs(r.mu_star - predicted);
    if (d <= gate && (!best || d < std::abs(best->mu_star - predicted))) best = r;
  }
  return best;
}

}  // namespace

MeasurementCurve simulate_kappa(const PotentialSpec& p, const KappaSelector& sel,
                                const std::vector<double>& v0_grid, const Tolerances& tol) {
  if (v0_grid.empty()) throw Error(ErrorCode::invalid_argument, "v0 grid is empty");
  for (std::size_t i = 1; i < v0_grid.size(); ++i)
    if (!(v0_grid[i] > v0_grid[i - 1])) throw Error(ErrorCode::invalid_argument, "v0 grid must be strictly increasing");
  if (!(sel.mu_hi > sel.mu_lo)) throw Error(ErrorCode::invalid_argument, "seed window must have mu_hi > mu_lo");

  const double span = v0_grid.back() - v0_grid.front();
  const double k_hi = sel.k_hi > 0.0 ? sel.k_hi : std::sqrt(std::max(sel.mu_hi, 0.0) + 4.0 * span + 100.0);

  std::vector<PteScan> scans(v0_grid.size());
  parallel_for(v0_grid.size(),
               [&](std::size_t i) { scans[i] = find_ptes(add_constant(p, v0_grid[i]), 0.0, k_hi, sel.scan_step, tol); },
               sel.threads);

  MeasurementCurve curve;
  curve.branch = sel.branch;
  for (std::size_t i = 0; i < v0_grid.size(); ++i)
    if (scans[i].all_pass) curve.all_pass_v0.push_back(v0_grid[i]);

  std::optional<PteRecord> seed;
  for (const auto& r : scans[0].records)
    if (r.mu_star >= sel.mu_lo && r.mu_star <= sel.mu_hi) {
      seed = r;
      break;
    }
  if (!seed) {
    std::ostringstream os;
    os << "no PTE with mu* in [" << sel.mu_lo << ", " << sel.mu_hi << "] at v0 = " << v0_grid[0];
    throw Error(ErrorCode::seed_not_found, os.str());
  }
  curve.samples.push_back({v0_grid[0], seed->mu_star});

  auto predict = [&](double v0) {
    const auto& s = curve.samples;
    if (s.size() < 2) return s.back().kappa + (v0 - s.back().v0);
    const auto& a = s[s.size() - 2];
    const auto& b = s.back();
    return b.kappa + (b.kappa - a.kappa) / (b.v0 - a.v0) * (v0 - b.v0);
  };
  auto gate_for = [&](double dv) {
    double slope = 1.0;
    const auto& s = curve.samples;
    if (s.size() >= 2) slope = std::abs((s.back().kappa - s[s.size() - 2].kappa) / (s.back().v0 - s[s.size() - 2].v0));
    return std::max(tol.track_gate_slope * std::abs(dv) * std::max(1.0, slope), tol.track_gate_floor);
  };
  auto note_crossing = [&](const std::vector<PteRecord>& recs, double kappa, double v0) {
    for (const auto& r : recs)
      if (r.mu_star != kappa && std::abs(r.mu_star - kappa) <= tol.collision_distance) {
        curve.crossing_v0.push_back(v0);
        return;
      }
  };
  note_crossing(scans[0].records, seed->mu_star, v0_grid[0]);

  for (std::size_t i = 1; i < v0_grid.size(); ++i) {
    const double v0 = v0_grid[i];
    const double predicted = predict(v0);
    const double gate = gate_for(v0 - curve.samples.back().v0);
    const auto next = scans[i].all_pass ? std::nullopt : nearest(scans[i].records, predicted, gate);
    if (next) {
      curve.samples.push_back({v0, next->mu_star});
      note_crossing(scans[i].records, next->mu_star, v0);
      continue;
    }
    // Lost: bracket where the selected PTE stops existing.
    double lo = curve.samples.back().v0, hi = v0;
    for (int it = 0; it < 30; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double guess = predict(mid);
      const auto r = guess > 0.0 ? refine_pte(add_constant(p, mid), std::sqrt(guess), tol) : std::nullopt;
      if (r && std::abs(r->mu_star - guess) <= gate_for(mid - curve.samples.back().v0)) lo = mid; else hi = mid;
    }
    curve.truncation = CurveTruncation{lo, hi, curve.samples.back().kappa,
                                       scans[i].all_pass ? "reflectionless potential" : "selected PTE disappeared"};
    break;
  }

  // Midpoint refinement wherever the interpolant is not yet trustworthy.
  if (sel.refine_tolerance > 0.0) {
    std::vector<bool> settled(curve.samples.size() > 0 ? curve.samples.size() - 1 : 0, false);
    for (int depth = 0; depth < sel.max_refine_depth; ++depth) {
      certify(curve);
      if (!curve.monotone) break;
      std::vector<double> xs, ys;
      for (const auto& s : curve.samples) {
        xs.push_back(s.v0);
        ys.push_back(s.kappa);
      }
      const MonotoneCubic interp(xs, ys);
      const std::size_t n = curve.samples.size() - 1;
      std::vector<std::optional<MeasurementSample>> mids(n);
      parallel_for(n, [&](std::size_t i) {
        if (settled[i]) return;
        const double v0 = 0.5 * (xs[i] + xs[i + 1]);
        const double guess = interp.value(v0);
        if (!(guess > 0.0)) return;
        const std::optional<PteRecord> r = refine_pte(add_constant(p, v0), std::sqrt(guess), tol);
        const double lo = std::min(ys[i], ys[i + 1]), hi = std::max(ys[i], ys[i + 1]);
        if (!r || r->mu_star < lo || r->mu_star > hi) return;  // not the same PTE: keep as is
        if (std::abs(r->mu_star - guess) > sel.refine_tolerance) mids[i] = MeasurementSample{v0, r->mu_star};
      }, sel.threads);

      std::vector<MeasurementSample> merged;
      std::vector<bool> next_settled;
      bool any = false;
      for (std::size_t i = 0; i < n; ++i) {
        merged.push_back(curve.samples[i]);
        if (mids[i]) {
          any = true;
          merged.push_back(*mids[i]);
          next_settled.push_back(false);
          next_settled.push_back(false);
        } else {
          next_settled.push_back(true);
        }
      }
      merged.push_back(curve.samples.back());
      curve.samples = std::move(merged);
      settled = std::move(next_settled);
      if (!any) break;
    }
  }
  certify(curve);
  return curve;
}

Reconstruction reconstruct_branch(const MeasurementCurve& curve, const std::vector<double>& alpha_grid) {
  if (!curve.monotone) {
    std::ostringstream os;
    os << "kappa(v0) is not certified monotone, so it cannot be inverted (kappa' = 2 alpha / (2 alpha - mu') "
          "must keep one sign)";
    throw Error(ErrorCode::precondition_failed, os.str());
  }
  for (std::size_t i = 1; i < alpha_grid.size(); ++i)
    if (!(alpha_grid[i] > alpha_grid[i - 1]))
      throw Error(ErrorCode::invalid_argument, "alpha grid must be strictly increasing");

  std::vector<double> xs, ys;
  for (const auto& s : curve.samples) {
    xs.push_back(s.v0);
    ys.push_back(s.kappa);
  }
  const MonotoneCubic kappa(xs, ys);
  // Width of the exclusion zone around reported crossings.
  double spacing = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) spacing = std::max(spacing, xs[i] - xs[i - 1]);

  Reconstruction out;
  out.branch.label = curve.branch;
  out.branch.source = "reconstructed";
  for (double alpha : alpha_grid) {
    const double target = alpha * alpha;
    if (target < kappa.y_min() || target > kappa.y_max()) {
      out.skipped.push_back({alpha, "alpha^2 outside the measured kappa range"});
      continue;
    }
    const double v0 = kappa.inverse(target);
    const bool near_crossing = std::any_of(curve.crossing_v0.begin(), curve.crossing_v0.end(),
                                           [&](double c) { return std::abs(c - v0) <= spacing; });
    if (near_crossing) {
      out.skipped.push_back({alpha, "level crossing nearby"});
      continue;
    }
    out.branch.samples.push_back(
        {alpha, Complex{target - v0, 0.0}, std::numeric_limits<double>::quiet_NaN(), 0.0});
  }
  return out;
}

KappaCheck kappa_derivative_check(const PotentialSpec& p, const EigenBranch& branch, double v0, double h,
                                  const Tolerances& tol) {
  if (!(h > 0.0)) throw Error(ErrorCode::invalid_argument, "difference step must be positive");
  std::vector<const BranchSample*> real;
  for (const auto& s : branch.samples)
    if (s.alpha > 0.0 && is_real(s.mu)) real.push_back(&s);
  if (real.size() < 2) throw Error(ErrorCode::precondition_failed, "branch has no real samples with alpha > 0");

  auto phi = [](const BranchSample& s) { return s.alpha * s.alpha - s.mu.real(); };
  double spread = 0.0, scale = 1.0;
  for (const auto* s : real) {
    spread = std::max(spread, std::abs(phi(*s) - phi(*real.front())));
    scale = std::max(scale, s->alpha * s->alpha);
  }
  if (spread <= 1e-9 * scale)
    throw Error(ErrorCode::tangency,
                "branch runs parallel to the dispersion parabola: either reflectionless or no perfect transmission");

  // First crossing of alpha^2 - mu(alpha) = v0 along the branch.
  std::size_t hit = real.size();
  for (std::size_t i = 0; i + 1 < real.size(); ++i) {
    const double g0 = phi(*real[i]) - v0, g1 = phi(*real[i + 1]) - v0;
    if (g0 == 0.0 || (g0 < 0.0) != (g1 < 0.0)) {
      hit = i;
      break;
    }
  }
  if (hit == real.size()) {
    std::ostringstream os;
    os << "the branch meets no shifted dispersion parabola at v0 = " << v0;
    throw Error(ErrorCode::precondition_failed, os.str());
  }
  const BranchSample& s0 = *real[hit];
  const BranchSample& s1 = *real[hit + 1];
  auto mu_at = [&](double a) {
    const double t = (a - s0.alpha) / (s1.alpha - s0.alpha);
    const auto mu = refine_eigenvalue(p, a, s0.mu + t * (s1.mu - s0.mu), tol);
    if (!mu) throw Error(ErrorCode::resolution, "eigenvalue refinement failed between branch samples");
    return *mu;
  };
  double a = s0.alpha, b = s1.alpha;
  double ga = a * a - mu_at(a).real() - v0, gb = b * b - mu_at(b).real() - v0;
  double x = a;
  int side = 0;
  for (int it = 0; it < 200 && b - a > 4.0 * kEps * b; ++it) {
    x = (ga != gb) ? (a * gb - b * ga) / (gb - ga) : 0.5 * (a + b);
    if (!(x > a && x < b)) x = 0.5 * (a + b);
    const double gx = x * x - mu_at(x).real() - v0;
    if (gx == 0.0) break;
    if ((gx < 0.0) == (ga < 0.0)) {
      a = x;
      ga = gx;
      if (side == -1) gb *= 0.5;
      side = -1;
    } else {
      b = x;
      gb = gx;
      if (side == 1) ga *= 0.5;
      side = 1;
    }
  }
  const double alpha = x;
  const Complex mu = mu_at(alpha);
  const double dmu = branch_slope(p, alpha, mu).real();
  const double denom = 2.0 * alpha - dmu;
  if (std::abs(denom) <= 1e-8 * (1.0 + 2.0 * std::abs(alpha) + std::abs(dmu)))
    throw Error(ErrorCode::tangency,
                "2 alpha - mu'(alpha) vanishes: either reflectionless or no perfect transmission");

  KappaCheck out;
  out.alpha = alpha;
  out.rhs = 2.0 * alpha / denom;
  double kappa[2];
  for (int s = 0; s < 2; ++s) {
    const double dv = s == 0 ? -h : h;
    const double guess = alpha + dv / denom;
    const auto r = refine_pte(add_constant(p, v0 + dv), guess, tol);
    if (!r || std::abs(r->k_star - guess) > 1e-3 * (1.0 + alpha) + 10.0 * h / std::abs(denom))
      throw Error(ErrorCode::resolution, "shifted PTE could not be followed for the difference quotient");
    kappa[s] = r->mu_star;
  }
  out.lhs = (kappa[1] - kappa[0]) / (2.0 * h);
  out.gap = std::abs(out.lhs - out.rhs);
  return out;
}

void write_curve_csv(std::ostream& os, const MeasurementCurve& curve) {
  os << "v0,kappa\n";
  for (const auto& s : curve.samples) os << fmt17(s.v0) << ',' << fmt17(s.kappa) << '\n';
}

void write_reconstruction_csv(std::ostream& os, const std::vector<const EigenBranch*>& branches) {
  os << "alpha,re_mu,im_mu,source\n";
  for (const auto* b : branches)
    for (const auto& s : b->samples)
      os << fmt17(s.alpha) << ',' << fmt17(s.mu.real()) << ',' << fmt17(s.mu.imag()) << ',' << b->source << '\n';
}

}  // namespace ptlab
