#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ptlab/potential.hpp"
#include "ptlab/spectrum.hpp"
#include "ptlab/tolerances.hpp"

namespace ptlab {

// A perfect-transmission energy is a real k > 0 with R(k) = 0. With the
// Robin parameter tied to the wavenumber, R = 0 is exactly
// h(k) = F(k^2; alpha = k) = 0, i.e. an eigenvalue branch mu_n(alpha)
// meeting the dispersion parabola mu = alpha^2.

struct PteRecord {
  double k_star = 0.0;
  double mu_star = 0.0;  // k_star * k_star
  int branch = -1;       // -1: unassigned
  int multiplicity = 1;  // 2 for a tangential (merging) root
  double residual_f = 0.0;  // |h| in the transfer matrix's scaled form
  double residual_r = 0.0;  // |R(k_star)|
};

struct PteScan {
  // Reflectionless over the whole range: roots are not isolated and
  // `records` stays empty.
  bool all_pass = false;
  std::vector<PteRecord> records;  // ascending mu_star
};

struct PteValue {
  Complex h;
  Complex dh;  // dh/dk
  double term_scale;
};
PteValue pte_function(const PotentialSpec& p, double k);

/// Scan of (k_lo, k_hi] on a uniform grid of step `scan_step`, with sign-change
/// bracketing plus probing of every same-sign local minimum of |h| for hidden
/// or tangential pairs. Each root is checked against the scattering solution;
/// |R| above tol.pte_verify throws internal_inconsistency.
PteScan find_ptes(const PotentialSpec& p, double k_lo, double k_hi, double scan_step,
                  const Tolerances& tol = {});

/// Newton polish of a PTE near k_guess; nullopt if it does not converge to a
/// verified root.
std::optional<PteRecord> refine_pte(const PotentialSpec& p, double k_guess,
                                    const Tolerances& tol = {});

/// Intersections of sampled branches with the dispersion parabola, refined
/// on the live secular function. Complex samples are skipped.
PteScan ptes_from_branches(const PotentialSpec& p, const std::vector<EigenBranch>& branches,
                           const Tolerances& tol = {});

enum class PteEventKind { merge, disappear, appear, exit, enter, unmatched };
std::string_view to_string(PteEventKind kind) noexcept;

struct PteEvent {
  double theta;
  double mu_star;
  PteEventKind kind;
  std::vector<int> tracks;
};

struct PteTrackSample {
  double theta;
  std::vector<PteRecord> records;  // ascending mu_star
  std::vector<int> track_ids;      // parallel to records
  bool all_pass = false;
  bool ambiguous = false;  // gating ambiguity survived local refinement
  bool refined = false;    // inserted between grid points
};

struct PteTrack {
  std::string parameter;
  std::vector<PteTrackSample> samples;  // ascending theta order of the grid
  std::vector<PteEvent> events;         // grid order
};

struct TrackOptions {
  double k_lo = 0.0;
  double k_hi = 0.0;
  double scan_step = 0.01;
  std::string parameter = "theta";
  unsigned threads = 1;
};

/// PTEs along a potential family, linked between neighbouring thetas by
/// gated nearest-mu matching. A pair vanishing together gives a merge and a
/// disappear event, a pair born together an appear event; single PTEs
/// crossing the energy window edge are reported as exit/enter.
PteTrack track_ptes(const PotentialFamily& family, const std::vector<double>& theta_grid,
                    const TrackOptions& opt, const Tolerances& tol = {});

/// `theta,mu_star,k_star,branch,event`; one row per record, event rows
/// interleaved at their theta.
void write_track_csv(std::ostream& os, const PteTrack& track);
std::string events_json(const PteTrack& track);

}  // namespace ptlab
