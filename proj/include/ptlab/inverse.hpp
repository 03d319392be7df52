#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ptlab/potential.hpp"
#include "ptlab/spectrum.hpp"
#include "ptlab/tolerances.hpp"

namespace ptlab {

// Shifting the potential by v0 on [-a, a] moves every Robin eigenvalue by
// v0, so a PTE of the shifted system sits where alpha^2 - mu(alpha) = v0.
// kappa(v0) = alpha*^2 is the measured PTE energy; inverting it gives back
// mu(alpha) = alpha^2 - kappa^{-1}(alpha^2).

struct MeasurementSample {
  double v0;
  double kappa;
};

struct CurveTruncation {
  double v0_last;     // last v0 with the selected PTE present
  double v0_missing;  // first v0 without it (bisection-refined)
  double kappa_last;
  std::string reason;
};

struct MeasurementCurve {
  int branch = -1;
  std::vector<MeasurementSample> samples;  // strictly increasing v0
  bool monotone = false;
  double min_slope = 0.0;  // smallest |secant| over the samples
  std::optional<CurveTruncation> truncation;
  // Grid points whose shifted potential is reflectionless (no discrete PTEs).
  std::vector<double> all_pass_v0;
  // Samples where another PTE came within the collision distance.
  std::vector<double> crossing_v0;
};

struct KappaSelector {
  // The PTE to follow is the lowest one with mu* in [mu_lo, mu_hi] at the
  // first grid point; later points continue to the nearest one.
  double mu_lo = 0.0;
  double mu_hi = 0.0;
  // Scan range per grid point; k_hi = 0 picks sqrt(mu_hi + max|v0 - v0_first| + slack).
  double k_hi = 0.0;
  double scan_step = 0.01;
  int branch = -1;
  // Midpoints are inserted while the interpolant mispredicts a new sample by
  // more than this (energy units); 0 disables refinement.
  double refine_tolerance = 0.0;
  int max_refine_depth = 10;
  unsigned threads = 1;
};

MeasurementCurve simulate_kappa(const PotentialSpec& p, const KappaSelector& sel,
                                const std::vector<double>& v0_grid, const Tolerances& tol = {});

struct SkippedSample {
  double alpha;
  std::string reason;
};

struct Reconstruction {
  EigenBranch branch;  // source "reconstructed", residual NaN
  std::vector<SkippedSample> skipped;
};

Reconstruction reconstruct_branch(const MeasurementCurve& curve, const std::vector<double>& alpha_grid);

struct KappaCheck {
  double alpha;  // sqrt(kappa(v0))
  double lhs;    // central difference of kappa
  double rhs;    // 2 alpha / (2 alpha - mu'(alpha))
  double gap;
};

KappaCheck kappa_derivative_check(const PotentialSpec& p, const EigenBranch& branch, double v0,
                                  double h = 1e-3, const Tolerances& tol = {});

void write_curve_csv(std::ostream& os, const MeasurementCurve& curve);
/// `alpha,re_mu,im_mu,source` for any number of branches, in the given order.
void write_reconstruction_csv(std::ostream& os, const std::vector<const EigenBranch*>& branches);

}  // namespace ptlab
