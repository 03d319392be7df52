#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ptlab/errors.hpp"
#include "ptlab/potential.hpp"
#include "ptlab/tolerances.hpp"
#include "ptlab/transfer.hpp"

namespace ptlab {

/// Real coefficient of the boundary condition psi'(+-a) = i alpha psi(+-a).
struct RobinParameter {
  double alpha = 0.0;
};

/// Secular function F(mu; alpha) = w2 - i alpha w1, where (w1, w2) is the
/// left boundary state (1, i alpha) carried across [-a, a]. F is entire in
/// mu and vanishes exactly on the Robin eigenvalues.
///
/// Values are kept in the transfer matrix's scaled form; multiply by
/// exp(log_scale) for the physical number.
struct SecularValue {
  Complex f;
  Complex df_dmu;
  Complex df_dalpha;
  double log_scale = 0.0;
  // Sum of the magnitudes of the terms entering f, same scaling; sets the
  // round-off floor for residual tests.
  double term_scale = 0.0;

  Complex physical() const;
  Complex physical_dmu() const;
  Complex physical_dalpha() const;
};

SecularValue secular_jet(const PotentialSpec& p, double alpha, Complex mu);
Complex secular(const PotentialSpec& p, RobinParameter alpha, Complex mu);

/// Rectangle in the complex mu plane.
struct ComplexBox {
  double re_lo, re_hi, im_lo, im_hi;

  bool contains(Complex z) const noexcept {
    return z.real() >= re_lo && z.real() <= re_hi && z.imag() >= im_lo && z.imag() <= im_hi;
  }
};

/// Default search region: Re mu from min(v) - 1 up to `re_cap`, |Im mu| <= im_half.
ComplexBox default_search_box(const PotentialSpec& p, double re_cap, double im_half = 500.0);

/// Argument-principle zero count of F inside the box.
int winding_count(const PotentialSpec& p, RobinParameter alpha, const ComplexBox& box,
                  const Tolerances& tol = {});

/// All eigenvalues inside the box, with multiplicity, sorted by (Re, Im).
std::vector<Complex> find_eigenvalues(const PotentialSpec& p, RobinParameter alpha,
                                      const ComplexBox& box, int max_count,
                                      const Tolerances& tol = {});

/// Closed-form square-well spectrum (well value -v0 on [-a, a]):
/// {alpha^2 - v0} followed by (n pi / 2a)^2 - v0 for n = 1..n_max.
std::vector<Complex> square_well_eigenvalues(double a, double v0, RobinParameter alpha, int n_max);

struct BranchSample {
  double alpha;
  Complex mu;
  double residual;  // scaled |F|; NaN when not evaluated (reconstructed data)
  double step;
};

enum class BranchEnd { range_end, collision };

struct EigenBranch {
  int label = 0;
  std::vector<BranchSample> samples;  // strictly increasing alpha
  BranchEnd end = BranchEnd::range_end;
  // Partner root found when continuation stopped on a collision.
  std::optional<BranchSample> collision;
  std::string source = "direct";
};

class ContinuationStall : public Error {
 public:
  ContinuationStall(const std::string& what, BranchSample last_good)
      : Error(ErrorCode::continuation_stall, what), last_good_(last_good) {}
  const BranchSample& last_good() const noexcept { return last_good_; }

 private:
  BranchSample last_good_;
};

/// Newton polish of an eigenvalue at fixed alpha. Returns nullopt when the
/// iteration fails to converge.
std::optional<Complex> refine_eigenvalue(const PotentialSpec& p, double alpha, Complex guess,
                                         const Tolerances& tol = {});

/// Implicit-function slope d mu / d alpha = -F_alpha / F_mu at an eigenvalue.
Complex branch_slope(const PotentialSpec& p, double alpha, Complex mu);

/// Predictor-corrector continuation of one eigenvalue branch over
/// [alpha_lo, alpha_hi] from a seed (alpha0, mu0) inside that interval, on the
/// grid alpha0 + j * step. Linear extrapolation predicts, Newton corrects,
/// failed corrections halve the step. Stops early when another root comes
/// within the collision distance (candidate exceptional point).
EigenBranch continue_branch(const PotentialSpec& p, double alpha0, Complex mu0, double alpha_lo,
                            double alpha_hi, double step, const Tolerances& tol = {},
                            int label = 0);

/// Seeds at the reference alpha = 0 with labels by ascending real part.
std::vector<std::pair<int, Complex>> reference_seeds(const PotentialSpec& p, const ComplexBox& box,
                                                     int max_count, const Tolerances& tol = {});

using PotentialFamily = std::function<PotentialSpec(double theta)>;

struct FixedAlpha {
  double alpha;
};
// alpha^2 = mu, the dispersion relation: double roots are merging PTEs.
struct DispersionCoupled {};
// The Robin parameter itself is the sweep parameter.
struct AlphaIsTheta {};

using AlphaCoupling = std::variant<FixedAlpha, DispersionCoupled, AlphaIsTheta>;

/// G(mu; theta) and dG/dmu for a coupling. Physical (unscaled) values.
struct ReducedSecular {
  Complex g;
  Complex dg_dmu;
};
ReducedSecular reduced_secular(const PotentialFamily& family, const AlphaCoupling& coupling,
                               double theta, Complex mu);

struct ExceptionalPoint {
  double theta;
  Complex mu;
  int label_lo = 0;
  int label_hi = 1;
  double residual_f;
  double residual_df;
};

class NoExceptionalPoint : public Error {
 public:
  NoExceptionalPoint(const std::string& what, std::vector<std::string> trace)
      : Error(ErrorCode::no_exceptional_point, what), trace_(std::move(trace)) {}
  const std::vector<std::string>& trace() const noexcept { return trace_; }

 private:
  std::vector<std::string> trace_;
};

struct EpSearchOptions {
  // Real-root counting window mu_guess +- window.
  double window = 40.0;
  int count_points = 4000;
  int bisections = 40;
  double tol_f = 1e-11;
  double tol_df = 1e-9;
  int newton_max_iter = 60;
};

/// Real roots of G(., theta) on (lo, hi): sign changes on a uniform grid,
/// each bracket bisected to machine precision.
std::vector<double> real_roots_in_window(const PotentialFamily& family,
                                         const AlphaCoupling& coupling, double theta, double lo,
                                         double hi, int points);

/// Locates a real double root of G in (mu, theta) between bracket ends where
/// the number of real roots near mu_guess differs by two.
ExceptionalPoint locate_exceptional_point(const PotentialFamily& family,
                                          const AlphaCoupling& coupling, double theta_lo,
                                          double theta_hi, double mu_guess,
                                          const EpSearchOptions& opt = {});

/// 2D Newton on (G, dG/dmu) = 0 from a caller-supplied start.
ExceptionalPoint refine_exceptional_point(const PotentialFamily& family,
                                          const AlphaCoupling& coupling, double theta0,
                                          double mu0, const EpSearchOptions& opt = {});

/// Structured text record {theta, re_mu, im_mu, residual_F, residual_dF}.
std::string to_json(const ExceptionalPoint& ep);

void write_branch_csv(std::ostream& os, const EigenBranch& branch);

}  // namespace ptlab
