#include "ptlab/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "ptlab/format.hpp"

namespace ptlab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
const Complex kI{0.0, 1.0};

// Round-off allowance on |F| relative to the magnitude of its terms.
constexpr double kNoiseFactor = 1e3 * kEps;

double noise_floor(const SecularValue& sv) { return kNoiseFactor * sv.term_scale; }

bool residual_ok(const SecularValue& sv, const Tolerances& tol) {
  return std::abs(sv.f) <= std::max(tol.root_residual, noise_floor(sv));
}

// Newton at fixed alpha, optionally deflated by known roots. `multiplicity`
// scales the step for clustered roots.
std::optional<Complex> newton(const PotentialSpec& p, double alpha, Complex z,
                              std::span<const Complex> deflate, const Tolerances& tol,
                              double multiplicity = 1.0) {
  for (int it = 0; it < tol.newton_max_iter; ++it) {
    const SecularValue sv = secular_jet(p, alpha, z);
    if (!std::isfinite(std::abs(sv.f)) || !std::isfinite(std::abs(sv.df_dmu))) return std::nullopt;
    if (residual_ok(sv, tol) && it > 0) return z;
    if (sv.f == Complex{0.0}) return z;
    Complex ratio = sv.df_dmu / sv.f;
    for (Complex r : deflate) ratio -= 1.0 / (z - r);
    if (ratio == Complex{0.0}) return residual_ok(sv, tol) ? std::optional<Complex>(z) : std::nullopt;
    const Complex step = multiplicity / ratio;
    z -= step;
    if (std::abs(step) <= 4.0 * kEps * (1.0 + std::abs(z))) {
      const SecularValue fin = secular_jet(p, alpha, z);
      if (std::abs(fin.f) <= std::max(tol.root_residual, 1e3 * noise_floor(fin))) return z;
      return std::nullopt;
    }
  }
  const SecularValue fin = secular_jet(p, alpha, z);
  if (residual_ok(fin, tol)) return z;
  return std::nullopt;
}

// Phase bookkeeping along the box boundary.
class ContourWalker {
 public:
  ContourWalker(const PotentialSpec& p, double alpha, const Tolerances& tol)
      : p_(p), alpha_(alpha), tol_(tol) {}

  bool near_zero() const noexcept { return near_zero_; }

  // Winding number of F around the box, or nullopt when the contour comes
  // too close to a zero for the phase to be trusted.
  std::optional<int> count(const ComplexBox& b) {
    near_zero_ = false;
    const Complex c[4] = {{b.re_lo, b.im_lo}, {b.re_hi, b.im_lo}, {b.re_hi, b.im_hi}, {b.re_lo, b.im_hi}};
    double total = 0.0;
    for (int e = 0; e < 4 && !near_zero_; ++e) total += edge(c[e], c[(e + 1) % 4]);
    if (near_zero_) return std::nullopt;
    const double turns = total / kTwoPi;
    const double rounded = std::round(turns);
    if (std::abs(turns - rounded) > 0.05 || rounded < 0) return std::nullopt;
    return static_cast<int>(rounded);
  }

 private:
  Complex eval(Complex z) {
    const SecularValue sv = secular_jet(p_, alpha_, z);
    if (!std::isfinite(std::abs(sv.f)) || std::abs(sv.f) <= noise_floor(sv)) near_zero_ = true;
    return sv.f;
  }

  double edge(Complex z0, Complex z1) {
    const int n = std::max(4, tol_.contour_panels);
    double total = 0.0;
    Complex za = z0;
    Complex fa = eval(za);
    for (int i = 1; i <= n && !near_zero_; ++i) {
      const Complex zb = (i == n) ? z1 : z0 + (z1 - z0) * (static_cast<double>(i) / n);
      const Complex fb = eval(zb);
      total += panel(za, fa, zb, fb, 0);
      za = zb;
      fa = fb;
    }
    return total;
  }

  // Phase increment across one panel; accepted once it is small and agrees
  // with the two half-panel increments (a one-level Richardson check).
  double panel(Complex za, Complex fa, Complex zb, Complex fb, int depth) {
    if (near_zero_) return 0.0;
    const double d = std::arg(fb / fa);
    const Complex zm = 0.5 * (za + zb);
    const Complex fm = eval(zm);
    const double d1 = std::arg(fm / fa);
    const double d2 = std::arg(fb / fm);
    if (std::abs(d) <= tol_.contour_max_dphase && std::abs(d1 + d2 - d) < 1e-6) return d;
    if (depth >= tol_.contour_max_depth) {
      near_zero_ = true;
      return 0.0;
    }
    return panel(za, fa, zm, fm, depth + 1) + panel(zm, fm, zb, fb, depth + 1);
  }

  const PotentialSpec& p_;
  double alpha_;
  const Tolerances& tol_;
  bool near_zero_ = false;
};

// Split offsets tried in turn so that sub-box edges avoid symmetric
// positions such as the real axis.
constexpr double kSplitOffsets[] = {0.0371, -0.0613, 0.0829, -0.1043, 0.1187, -0.1429, 0.0217, -0.0297};

class BoxSolver {
 public:
  BoxSolver(const PotentialSpec& p, double alpha, const Tolerances& tol)
      : p_(p), alpha_(alpha), tol_(tol), walker_(p, alpha, tol) {}

  std::vector<Complex>& roots() { return roots_; }

  void solve(const ComplexBox& b, int n, int depth) {
    if (n == 0) return;
    if (depth > 200) throw Error(ErrorCode::contour_failure, "root isolation exceeded recursion depth");
    const Complex center{0.5 * (b.re_lo + b.re_hi), 0.5 * (b.im_lo + b.im_hi)};
    const double size = std::max(b.re_hi - b.re_lo, b.im_hi - b.im_lo);

    if (n == 1) {
      if (auto z = newton(p_, alpha_, center, roots_, tol_); z && inside(b, *z, size)) {
        roots_.push_back(*z);
        return;
      }
    }
    if (size <= 1e-9 * (1.0 + std::abs(center))) {
      // Cluster below resolution: treat as one root of multiplicity n.
      auto z = newton(p_, alpha_, center, {}, tol_, static_cast<double>(n));
      const Complex root = z ? *z : center;
      for (int i = 0; i < n; ++i) roots_.push_back(root);
      return;
    }

    for (double off : kSplitOffsets) {
      const double f = 0.5 + off;
      ComplexBox c1 = b, c2 = b;
      if (b.re_hi - b.re_lo >= b.im_hi - b.im_lo) {
        const double x = b.re_lo + f * (b.re_hi - b.re_lo);
        c1.re_hi = x;
        c2.re_lo = x;
      } else {
        const double y = b.im_lo + f * (b.im_hi - b.im_lo);
        c1.im_hi = y;
        c2.im_lo = y;
      }
      const auto n1 = walker_.count(c1);
      if (!n1) continue;
      const auto n2 = walker_.count(c2);
      if (!n2 || *n1 + *n2 != n) continue;
      solve(c1, *n1, depth + 1);
      solve(c2, *n2, depth + 1);
      return;
    }
    // Every split line grazes a zero: only a cluster (or a multiple root) can
    // do that once the cell is this small.
    if (n >= 2) {
      if (auto z = newton(p_, alpha_, center, {}, tol_, static_cast<double>(n)); z && inside(b, *z, size)) {
        for (int i = 0; i < n; ++i) roots_.push_back(*z);
        return;
      }
    }
    throw Error(ErrorCode::contour_failure, "could not split box without touching a zero");
  }

 private:
  static bool inside(const ComplexBox& b, Complex z, double size) {
    const double slack = 1e-9 * size;
    return z.real() >= b.re_lo - slack && z.real() <= b.re_hi + slack &&
           z.imag() >= b.im_lo - slack && z.imag() <= b.im_hi + slack;
  }

  const PotentialSpec& p_;
  double alpha_;
  const Tolerances& tol_;
  ContourWalker walker_;
  std::vector<Complex> roots_;
};

void validate_box(const ComplexBox& b) {
  if (!(b.re_hi > b.re_lo) || !(b.im_hi > b.im_lo))
    throw Error(ErrorCode::invalid_argument, "search box must have positive area");
}

// Outward perturbation for retry r (r = 0 leaves the box unchanged).
ComplexBox perturbed(const ComplexBox& b, int r) {
  if (r == 0) return b;
  const double dx = (b.re_hi - b.re_lo) * 1e-4 * r;
  const double dy = (b.im_hi - b.im_lo) * 1e-4 * r;
  return {b.re_lo - 0.731 * dx, b.re_hi + 0.577 * dx, b.im_lo - 0.613 * dy, b.im_hi + 0.897 * dy};
}

bool order_roots(Complex x, Complex y) {
  if (x.real() != y.real()) return x.real() < y.real();
  return x.imag() < y.imag();
}

}  // namespace

Complex SecularValue::physical() const { return f * std::exp(log_scale); }
Complex SecularValue::physical_dmu() const { return df_dmu * std::exp(log_scale); }
Complex SecularValue::physical_dalpha() const { return df_dalpha * std::exp(log_scale); }

SecularValue secular_jet(const PotentialSpec& p, double alpha, Complex mu) {
  const TransferJet j = total_transfer_jet(p, mu);
  const TransferMatrix& m = j.value;
  const Complex ia = kI * alpha;
  const double a2 = alpha * alpha;
  SecularValue sv;
  sv.f = m.m21 + ia * (m.m22 - m.m11) + a2 * m.m12;
  sv.df_dmu = j.d21 + ia * (j.d22 - j.d11) + a2 * j.d12;
  sv.df_dalpha = kI * (m.m22 - m.m11) + 2.0 * alpha * m.m12;
  sv.log_scale = m.log_scale;
  sv.term_scale = std::abs(m.m21) + std::abs(alpha) * (std::abs(m.m22) + std::abs(m.m11)) +
                  a2 * std::abs(m.m12);
  return sv;
}

Complex secular(const PotentialSpec& p, RobinParameter alpha, Complex mu) {
  return secular_jet(p, alpha.alpha, mu).physical();
}

ComplexBox default_search_box(const PotentialSpec& p, double re_cap, double im_half) {
  return {p.min_value() - 1.0, re_cap, -im_half, im_half};
}

int winding_count(const PotentialSpec& p, RobinParameter alpha, const ComplexBox& box,
                  const Tolerances& tol) {
  validate_box(box);
  ContourWalker walker(p, alpha.alpha, tol);
  for (int r = 0; r <= tol.contour_retries; ++r)
    if (auto n = walker.count(perturbed(box, r))) return *n;
  throw Error(ErrorCode::contour_failure, "contour passes too close to a zero");
}

std::vector<Complex> find_eigenvalues(const PotentialSpec& p, RobinParameter alpha,
                                      const ComplexBox& box, int max_count,
                                      const Tolerances& tol) {
  validate_box(box);
  if (max_count < 1) throw Error(ErrorCode::invalid_argument, "max_count must be at least 1");
  ContourWalker walker(p, alpha.alpha, tol);
  for (int r = 0; r <= tol.contour_retries; ++r) {
    const ComplexBox b = perturbed(box, r);
    const auto n = walker.count(b);
    if (!n) continue;
    if (*n > max_count) {
      std::ostringstream os;
      os << "box holds " << *n << " eigenvalues, more than max_count = " << max_count;
      throw Error(ErrorCode::capacity_exceeded, os.str());
    }
    BoxSolver solver(p, alpha.alpha, tol);
    solver.solve(b, *n, 0);
    auto roots = std::move(solver.roots());
    if (static_cast<int>(roots.size()) != *n)
      throw Error(ErrorCode::internal_inconsistency, "refined root count differs from winding number");
    std::sort(roots.begin(), roots.end(), order_roots);
    return roots;
  }
  throw Error(ErrorCode::contour_failure, "contour passes too close to a zero after retries");
}

std::vector<Complex> square_well_eigenvalues(double a, double v0, RobinParameter alpha, int n_max) {
  if (!(a > 0.0)) throw Error(ErrorCode::invalid_geometry, "half-width must be positive");
  if (n_max < 0) throw Error(ErrorCode::invalid_argument, "n_max must be non-negative");
  std::vector<Complex> out;
  out.emplace_back(alpha.alpha * alpha.alpha - v0);
  for (int n = 1; n <= n_max; ++n) {
    const double kn = n * std::numbers::pi / (2.0 * a);
    out.emplace_back(kn * kn - v0);
  }
  return out;
}

std::optional<Complex> refine_eigenvalue(const PotentialSpec& p, double alpha, Complex guess,
                                         const Tolerances& tol) {
  return newton(p, alpha, guess, {}, tol);
}

Complex branch_slope(const PotentialSpec& p, double alpha, Complex mu) {
  const SecularValue sv = secular_jet(p, alpha, mu);
  if (sv.df_dmu == Complex{0.0})
    throw Error(ErrorCode::numerical_singularity, "dF/dmu vanishes: slope undefined");
  return -sv.df_dalpha / sv.df_dmu;
}

namespace {

std::optional<Complex> find_partner(const PotentialSpec& p, double alpha, Complex mu,
                                    const Tolerances& tol) {
  const Complex known[1] = {mu};
  const double r = 10.0 * tol.collision_distance;
  for (double phi : {0.0, std::numbers::pi, 0.5 * std::numbers::pi, 1.5 * std::numbers::pi}) {
    const Complex start = mu + r * std::exp(kI * phi);
    if (auto z = newton(p, alpha, start, known, tol); z && std::abs(*z - mu) <= r) return z;
  }
  return std::nullopt;
}

struct MarchResult {
  std::vector<BranchSample> samples;  // excluding the seed, in marching order
  std::optional<BranchSample> collision;
};

MarchResult march(const PotentialSpec& p, const BranchSample& seed, double end, double step,
                  const Tolerances& tol) {
  MarchResult out;
  if (seed.alpha == end) return out;
  const double dir = end > seed.alpha ? 1.0 : -1.0;
  const double h_min = step * std::ldexp(1.0, -tol.continuation_max_halvings);

  BranchSample last = seed;
  std::optional<BranchSample> prev;
  double h = step;
  long grid_index = 1;
  auto grid_point = [&](long j) {
    const double g = seed.alpha + dir * static_cast<double>(j) * step;
    return dir > 0 ? std::min(g, end) : std::max(g, end);
  };

  while (last.alpha != end) {
    // Grid points closer than a hair to the current alpha count as reached.
    const double snap = 1e-9 * step;
    while (dir * (grid_point(grid_index) - last.alpha) <= snap) ++grid_index;
    const double target = grid_point(grid_index);
    const bool reaches_grid = std::abs(target - last.alpha) <= h + snap;
    const double a_next = reaches_grid ? target : last.alpha + dir * h;
    const double da = a_next - last.alpha;

    const Complex tangent = branch_slope(p, last.alpha, last.mu);
    const Complex slope = prev ? (last.mu - prev->mu) / (last.alpha - prev->alpha) : tangent;
    const Complex predicted = last.mu + slope * da;
    const auto corrected = newton(p, a_next, predicted, {}, tol);
    const double jump_tol = 0.5 * std::abs(predicted - last.mu) +
                            0.25 * std::abs(da) * (1.0 + std::abs(tangent)) +
                            1e-7 * (1.0 + std::abs(last.mu));
    bool ok = corrected && std::abs(*corrected - predicted) <= jump_tol;
    if (ok) {
      // Same branch only if the slope there continues the trend; a crossing
      // level within the jump tolerance has a different slope.
      const Complex t_new = branch_slope(p, a_next, *corrected);
      const double drift = prev ? std::abs(tangent - slope) : 0.0;
      ok = std::abs(t_new - tangent) <= 0.3 * (1.0 + std::abs(tangent)) + 2.0 * drift;
    }
    if (ok) {
      const SecularValue sv = secular_jet(p, a_next, *corrected);
      BranchSample s{a_next, *corrected, std::abs(sv.f), std::abs(da)};
      const bool reduced = h < step;
      prev = last;
      last = s;
      out.samples.push_back(s);
      if (reduced) {
        if (auto partner = find_partner(p, s.alpha, s.mu, tol);
            partner && std::abs(*partner - s.mu) <= tol.collision_distance) {
          out.collision = BranchSample{s.alpha, *partner, std::abs(secular_jet(p, s.alpha, *partner).f), 0.0};
          return out;
        }
      }
      h = std::min(2.0 * h, step);
      continue;
    }
    h *= 0.5;
    if (h < h_min) {
      if (auto partner = find_partner(p, last.alpha, last.mu, tol);
          partner && std::abs(*partner - last.mu) <= tol.collision_distance) {
        out.collision = BranchSample{last.alpha, *partner, std::abs(secular_jet(p, last.alpha, *partner).f), 0.0};
        return out;
      }
      std::ostringstream os;
      os << "continuation stalled at alpha = " << last.alpha << ", mu = " << last.mu;
      throw ContinuationStall(os.str(), last);
    }
  }
  return out;
}

}  // namespace

EigenBranch continue_branch(const PotentialSpec& p, double alpha0, Complex mu0, double alpha_lo,
                            double alpha_hi, double step, const Tolerances& tol, int label) {
  if (!(step > 0.0)) throw Error(ErrorCode::invalid_argument, "continuation step must be positive");
  if (!(alpha_lo <= alpha0 && alpha0 <= alpha_hi))
    throw Error(ErrorCode::invalid_argument, "seed alpha must lie inside the continuation range");
  const auto polished = newton(p, alpha0, mu0, {}, tol);
  if (!polished || std::abs(*polished - mu0) > 1e-6 * (1.0 + std::abs(mu0)))
    throw Error(ErrorCode::precondition_failed, "seed is not an eigenvalue at alpha0");
  const BranchSample seed{alpha0, *polished, std::abs(secular_jet(p, alpha0, *polished).f), 0.0};

  EigenBranch branch;
  branch.label = label;
  const MarchResult down = march(p, seed, alpha_lo, step, tol);
  const MarchResult up = march(p, seed, alpha_hi, step, tol);
  for (auto it = down.samples.rbegin(); it != down.samples.rend(); ++it) branch.samples.push_back(*it);
  branch.samples.push_back(seed);
  branch.samples.insert(branch.samples.end(), up.samples.begin(), up.samples.end());
  if (up.collision || down.collision) {
    branch.end = BranchEnd::collision;
    branch.collision = up.collision ? up.collision : down.collision;
  }
  return branch;
}

std::vector<std::pair<int, Complex>> reference_seeds(const PotentialSpec& p, const ComplexBox& box,
                                                     int max_count, const Tolerances& tol) {
  const auto roots = find_eigenvalues(p, RobinParameter{0.0}, box, max_count, tol);
  std::vector<std::pair<int, Complex>> out;
  for (std::size_t i = 0; i < roots.size(); ++i) out.emplace_back(static_cast<int>(i), roots[i]);
  return out;
}

ReducedSecular reduced_secular(const PotentialFamily& family, const AlphaCoupling& coupling,
                               double theta, Complex mu) {
  const PotentialSpec p = family(theta);
  return std::visit(
      [&](const auto& c) -> ReducedSecular {
        using C = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<C, FixedAlpha>) {
          const SecularValue sv = secular_jet(p, c.alpha, mu);
          return {sv.physical(), sv.physical_dmu()};
        } else if constexpr (std::is_same_v<C, AlphaIsTheta>) {
          const SecularValue sv = secular_jet(p, theta, mu);
          return {sv.physical(), sv.physical_dmu()};
        } else {
          if (!(mu.real() > 0.0))
            throw Error(ErrorCode::invalid_argument, "dispersion coupling needs mu > 0");
          const double alpha = std::sqrt(mu.real());
          const SecularValue sv = secular_jet(p, alpha, mu);
          return {sv.physical(), sv.physical_dmu() + sv.physical_dalpha() / (2.0 * alpha)};
        }
      },
      coupling);
}

std::vector<double> real_roots_in_window(const PotentialFamily& family,
                                         const AlphaCoupling& coupling, double theta, double lo,
                                         double hi, int points) {
  if (!(hi > lo) || points < 2) throw Error(ErrorCode::invalid_argument, "bad root window");
  const PotentialSpec p = family(theta);
  const PotentialFamily fixed = [&p](double) { return p; };
  auto g = [&](double mu) { return reduced_secular(fixed, coupling, theta, Complex{mu, 0.0}).g.real(); };
  std::vector<double> roots;
  double x0 = lo;
  double g0 = g(x0);
  for (int i = 1; i <= points; ++i) {
    const double x1 = lo + (hi - lo) * static_cast<double>(i) / points;
    const double g1 = g(x1);
    if (g0 == 0.0) {
      roots.push_back(x0);
    } else if ((g0 < 0.0) != (g1 < 0.0) && g1 != 0.0) {
      double a = x0, b = x1, ga = g0;
      for (int k = 0; k < 80 && b - a > 2.0 * kEps * std::abs(b); ++k) {
        const double m = 0.5 * (a + b);
        const double gm = g(m);
        if ((gm < 0.0) == (ga < 0.0)) {
          a = m;
          ga = gm;
        } else {
          b = m;
        }
      }
      roots.push_back(0.5 * (a + b));
    }
    x0 = x1;
    g0 = g1;
  }
  return roots;
}

ExceptionalPoint refine_exceptional_point(const PotentialFamily& family,
                                          const AlphaCoupling& coupling, double theta0,
                                          double mu0, const EpSearchOptions& opt) {
  std::vector<std::string> trace;
  double mu = mu0, theta = theta0;
  auto eval = [&](double m, double t) {
    const ReducedSecular r = reduced_secular(family, coupling, t, Complex{m, 0.0});
    return std::pair<double, double>{r.g.real(), r.dg_dmu.real()};
  };
  auto merit = [](std::pair<double, double> r) { return r.first * r.first + r.second * r.second; };

  auto cur = eval(mu, theta);
  for (int it = 0; it < opt.newton_max_iter; ++it) {
    {
      std::ostringstream os;
      os << "iter " << it << ": theta=" << fmt17(theta) << " mu=" << fmt17(mu) << " G=" << cur.first
         << " dG=" << cur.second;
      trace.push_back(os.str());
    }
    if (std::abs(cur.first) < opt.tol_f && std::abs(cur.second) < opt.tol_df) {
      const ReducedSecular fin = reduced_secular(family, coupling, theta, Complex{mu, 0.0});
      ExceptionalPoint ep;
      ep.theta = theta;
      ep.mu = Complex{mu, 0.0};
      ep.residual_f = std::abs(fin.g);
      ep.residual_df = std::abs(fin.dg_dmu);
      return ep;
    }
    const double hm = 1e-6 * (1.0 + std::abs(mu));
    const double ht = 1e-6 * (1.0 + std::abs(theta));
    const auto mp = eval(mu + hm, theta), mm = eval(mu - hm, theta);
    const auto tp = eval(mu, theta + ht), tm = eval(mu, theta - ht);
    const double j11 = cur.second;
    const double j12 = (tp.first - tm.first) / (2.0 * ht);
    const double j21 = (mp.second - mm.second) / (2.0 * hm);
    const double j22 = (tp.second - tm.second) / (2.0 * ht);
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || std::abs(det) <= 1e-8 * (std::abs(j11 * j22) + std::abs(j12 * j21))) {
      trace.push_back("singular Jacobian: no isolated double root");
      throw NoExceptionalPoint("exceptional-point Newton hit a singular Jacobian", trace);
    }
    const double dmu = -(j22 * cur.first - j12 * cur.second) / det;
    const double dth = -(-j21 * cur.first + j11 * cur.second) / det;
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k < 12; ++k, lambda *= 0.5) {
      const double m2 = mu + lambda * dmu, t2 = theta + lambda * dth;
      std::pair<double, double> trial;
      try {
        trial = eval(m2, t2);
      } catch (const Error&) {
        continue;
      }
      if (merit(trial) < merit(cur) || k == 11) {
        mu = m2;
        theta = t2;
        cur = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted || !std::isfinite(mu) || !std::isfinite(theta)) break;
  }
  trace.push_back("Newton did not converge");
  throw NoExceptionalPoint("exceptional-point Newton did not converge", trace);
}

ExceptionalPoint locate_exceptional_point(const PotentialFamily& family,
                                          const AlphaCoupling& coupling, double theta_lo,
                                          double theta_hi, double mu_guess,
                                          const EpSearchOptions& opt) {
  const double lo = mu_guess - opt.window, hi = mu_guess + opt.window;
  auto roots_at = [&](double t) {
    return real_roots_in_window(family, coupling, t, lo, hi, opt.count_points);
  };
  const auto r_lo = roots_at(theta_lo);
  const auto r_hi = roots_at(theta_hi);
  const auto diff = static_cast<long>(r_lo.size()) - static_cast<long>(r_hi.size());
  if (diff == 0 || diff % 2 != 0)
    throw Error(ErrorCode::precondition_failed,
                "real-root count near mu_guess does not change by an even number across the bracket");

  double a = theta_lo, b = theta_hi;
  const std::size_t n_a = r_lo.size();
  for (int k = 0; k < opt.bisections; ++k) {
    const double m = 0.5 * (a + b);
    if (roots_at(m).size() == n_a) a = m; else b = m;
  }
  const double theta_real = r_lo.size() > r_hi.size() ? a : b;
  const auto r = roots_at(theta_real);
  if (r.size() < 2) throw Error(ErrorCode::precondition_failed, "no real root pair near mu_guess");
  std::size_t best = 0;
  for (std::size_t i = 1; i + 1 < r.size(); ++i)
    if (r[i + 1] - r[i] < r[best + 1] - r[best]) best = i;
  ExceptionalPoint ep = refine_exceptional_point(family, coupling, theta_real,
                                                 0.5 * (r[best] + r[best + 1]), opt);
  ep.label_lo = static_cast<int>(best);
  ep.label_hi = static_cast<int>(best + 1);
  return ep;
}

std::string to_json(const ExceptionalPoint& ep) {
  nlohmann::ordered_json j;
  j["theta"] = ep.theta;
  j["re_mu"] = ep.mu.real();
  j["im_mu"] = ep.mu.imag();
  j["residual_F"] = ep.residual_f;
  j["residual_dF"] = ep.residual_df;
  j["labels"] = {ep.label_lo, ep.label_hi};
  return j.dump(2);
}

void write_branch_csv(std::ostream& os, const EigenBranch& branch) {
  os << "alpha,re_mu,im_mu,residual\n";
  for (const auto& s : branch.samples)
    os << fmt17(s.alpha) << ',' << fmt17(s.mu.real()) << ',' << fmt17(s.mu.imag()) << ','
       << fmt17(s.residual) << '\n';
}

}  // namespace ptlab
