#pragma once

namespace ptlab {

// Numerical knobs shared by the spectral and PTE solvers. Defaults are the
// values the acceptance suite is pinned against; every field is echoed into
// the run manifest by the CLI.
struct Tolerances {
  // |F| below which a Newton iterate counts as a root (F in scaled form).
  double root_residual = 1e-12;
  int newton_max_iter = 50;

  // Base panel count per box edge for the winding-number sum. Panels whose
  // phase increment exceeds contour_max_dphase are bisected adaptively.
  int contour_panels = 512;
  double contour_max_dphase = 0.75;
  int contour_max_depth = 24;
  int contour_retries = 4;

  // Continuation.
  int continuation_max_halvings = 44;
  double collision_distance = 1e-4;

  // PTE scan.
  double pte_scan_step = 0.01;
  double pte_verify = 1e-8;
  double all_pass_relative = 1e-10;

  // Track gating: allowed |d mu*| per unit of theta step, and a floor.
  double track_gate_slope = 5.0;
  double track_gate_floor = 0.5;
  int track_max_refine = 6;
};

}  // namespace ptlab
