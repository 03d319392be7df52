#include "ptlab/pte.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/format.hpp"
#include "ptlab/parallel.hpp"
#include "ptlab/transfer.hpp"

namespace ptlab {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
// |h| relative to its term scale below which a root is numerically exact.
constexpr double kExact = 1e3 * kEps;
// Candidates whose |h| stays above this (relative) after refinement are not
// roots: for non-even potentials Re h may cross zero while Im h does not.
constexpr double kAccept = 1e-8;

double relative(const PteValue& v) { return std::abs(v.h) / std::max(v.term_scale, 1e-300); }

PteRecord make_record(const PotentialSpec& p, double k, const PteValue& v, const Tolerances& tol,
                      int multiplicity) {
  PteRecord r;
  r.k_star = k;
  r.mu_star = k * k;
  r.multiplicity = multiplicity;
  r.residual_f = std::abs(v.h);
  r.residual_r = std::abs(scattering_amplitudes(p, k).R);
  if (!(r.residual_r <= tol.pte_verify)) {
    std::ostringstream os;
    os << "claimed PTE at k = " << fmt17(k) << " has |R| = " << r.residual_r;
    throw Error(ErrorCode::internal_inconsistency, os.str());
  }
  return r;
}

// Safeguarded Newton on Re h inside a sign-change bracket.
double refine_bracket(const PotentialSpec& p, double a, double b, double ga) {
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const PteValue v = pte_function(p, x);
    const double g = v.h.real();
    if (g == 0.0 || relative(v) <= kExact) return x;
    if ((g < 0.0) == (ga < 0.0)) {
      a = x;
      ga = g;
    } else {
      b = x;
    }
    if (b - a <= 4.0 * kEps * b) return 0.5 * (a + b);
    const double dg = v.dh.real();
    double next = dg != 0.0 ? x - g / dg : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    x = next;
  }
  return x;
}

// Zero of Re h' in [a, b], given opposite signs at the ends.
double refine_stationary(const PotentialSpec& p, double a, double b, double da) {
  for (int it = 0; it < 200 && b - a > 4.0 * kEps * b; ++it) {
    const double m = 0.5 * (a + b);
    const double dm = pte_function(p, m).dh.real();
    if (dm == 0.0) return m;
    if ((dm < 0.0) == (da < 0.0)) {
      a = m;
      da = dm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

void sort_records(std::vector<PteRecord>& v) {
  std::sort(v.begin(), v.end(), [](const PteRecord& x, const PteRecord& y) { return x.k_star < y.k_star; });
  // Roots reached from neighbouring brackets can coincide.
  v.erase(std::unique(v.begin(), v.end(),
                      [](const PteRecord& x, const PteRecord& y) {
                        return std::abs(x.k_star - y.k_star) <= 1e-12 * std::max(1.0, y.k_star);
                      }),
          v.end());
}

}  // namespace

PteValue pte_function(const PotentialSpec& p, double k) {
  const SecularValue sv = secular_jet(p, k, Complex{k * k, 0.0});
  return {sv.f, 2.0 * k * sv.df_dmu + sv.df_dalpha, sv.term_scale};
}

PteScan find_ptes(const PotentialSpec& p, double k_lo, double k_hi, double scan_step,
                  const Tolerances& tol) {
  if (!(k_lo >= 0.0) || !(k_hi > k_lo) || !std::isfinite(k_hi))
    throw Error(ErrorCode::invalid_argument, "k range must satisfy 0 <= k_lo < k_hi");
  if (!(scan_step > 0.0)) throw Error(ErrorCode::invalid_argument, "scan step must be positive");

  const auto n = static_cast<std::size_t>(std::ceil((k_hi - k_lo) / scan_step));
  std::vector<double> k(n + 1);
  std::vector<PteValue> v(n + 1);
  bool all_pass = true;
  for (std::size_t i = 0; i <= n; ++i) {
    k[i] = (i == n) ? k_hi : k_lo + (k_hi - k_lo) * static_cast<double>(i) / n;
    v[i] = pte_function(p, k[i]);
    if (relative(v[i]) > tol.all_pass_relative) all_pass = false;
  }
  PteScan out;
  if (all_pass) {
    out.all_pass = true;
    return out;
  }

  auto accept = [&](double x, int mult) {
    if (!(x > 0.0)) return;
    const PteValue fin = pte_function(p, x);
    if (relative(fin) > kAccept) return;
    out.records.push_back(make_record(p, x, fin, tol, mult));
  };

  auto sgn = [](double x) { return (x > 0.0) - (x < 0.0); };
  for (std::size_t i = 0; i <= n; ++i) {
    const int si = sgn(v[i].h.real());
    if (si == 0) {
      accept(k[i], 1);
      continue;
    }
    if (i < n) {
      const int sj = sgn(v[i + 1].h.real());
      if (sj != 0 && sj != si) accept(refine_bracket(p, k[i], k[i + 1], v[i].h.real()), 1);
    }
    // Same-sign local minimum of |h|: a pair may hide inside, or touch.
    if (i == 0 || i == n) continue;
    if (sgn(v[i - 1].h.real()) != si || sgn(v[i + 1].h.real()) != si) continue;
    const double r = relative(v[i]);
    if (r > relative(v[i - 1]) || r > relative(v[i + 1])) continue;
    const double d0 = v[i - 1].dh.real(), d1 = v[i + 1].dh.real();
    if ((d0 < 0.0) == (d1 < 0.0)) continue;
    const double kc = refine_stationary(p, k[i - 1], k[i + 1], d0);
    const PteValue vc = pte_function(p, kc);
    if (sgn(vc.h.real()) != si) {
      accept(refine_bracket(p, k[i - 1], kc, v[i - 1].h.real()), 1);
      accept(refine_bracket(p, kc, k[i + 1], vc.h.real()), 1);
    } else if (relative(vc) <= kExact) {
      accept(kc, 2);
    }
  }
  sort_records(out.records);
  return out;
}

std::optional<PteRecord> refine_pte(const PotentialSpec& p, double k_guess, const Tolerances& tol) {
  double x = k_guess;
  for (int it = 0; it < tol.newton_max_iter; ++it) {
    const PteValue v = pte_function(p, x);
    if (relative(v) <= kExact) break;
    const double dg = v.dh.real();
    if (dg == 0.0) return std::nullopt;
    const double step = v.h.real() / dg;
    x -= step;
    if (!(x > 0.0) || !std::isfinite(x)) return std::nullopt;
    if (std::abs(step) <= 4.0 * kEps * x) break;
  }
  const PteValue fin = pte_function(p, x);
  if (relative(fin) > kAccept) return std::nullopt;
  try {
    return make_record(p, x, fin, tol, 1);
  } catch (const Error&) {
    return std::nullopt;
  }
}

PteScan ptes_from_branches(const PotentialSpec& p, const std::vector<EigenBranch>& branches,
                           const Tolerances& tol) {
  PteScan out;
  for (const auto& br : branches) {
    std::vector<const BranchSample*> real;
    for (const auto& s : br.samples)
      if (s.alpha > 0.0 && std::abs(s.mu.imag()) <= 1e-9 * (1.0 + std::abs(s.mu))) real.push_back(&s);
    if (real.size() < 2) continue;

    auto g_of = [](const BranchSample& s) { return s.mu.real() - s.alpha * s.alpha; };
    const bool on_parabola = std::all_of(real.begin(), real.end(), [&](const BranchSample* s) {
      return std::abs(g_of(*s)) <= 1e-10 * (1.0 + s->alpha * s->alpha);
    });
    if (on_parabola) {
      out.all_pass = true;
      continue;
    }

    int last_change = -2;
    for (std::size_t i = 0; i + 1 < real.size(); ++i) {
      const BranchSample& s0 = *real[i];
      const BranchSample& s1 = *real[i + 1];
      const double g0 = g_of(s0), g1 = g_of(s1);
      if (g0 == 0.0 || (g0 < 0.0) == (g1 < 0.0)) continue;
      if (last_change == static_cast<int>(i) - 1) {
        std::ostringstream os;
        os << "branch " << br.label << " crosses the dispersion parabola twice within two samples near alpha = "
           << s0.alpha << "; resample more finely";
        throw Error(ErrorCode::resolution, os.str());
      }
      last_change = static_cast<int>(i);

      // Illinois iteration on g(alpha) = mu_n(alpha) - alpha^2 with mu_n
      // recomputed by Newton from the interpolated sample.
      auto g_live = [&](double a) {
        const double t = (a - s0.alpha) / (s1.alpha - s0.alpha);
        const Complex guess = s0.mu + t * (s1.mu - s0.mu);
        const auto mu = refine_eigenvalue(p, a, guess, tol);
        if (!mu) throw Error(ErrorCode::resolution, "eigenvalue refinement failed between branch samples");
        return mu->real() - a * a;
      };
      double a = s0.alpha, b = s1.alpha, ga = g_live(a), gb = g_live(b);
      if ((ga < 0.0) == (gb < 0.0)) {
        a = s0.alpha;
        b = s1.alpha;
        ga = g0;
        gb = g1;
      }
      int side = 0;
      double x = a;
      for (int it = 0; it < 100 && b - a > 4.0 * kEps * b; ++it) {
        x = (a * gb - b * ga) / (gb - ga);
        if (!(x > a && x < b)) x = 0.5 * (a + b);
        const double gx = g_live(x);
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
      auto rec = refine_pte(p, x, tol);
      if (!rec) {
        std::ostringstream os;
        os << "branch intersection near alpha = " << fmt17(x) << " does not verify as a PTE";
        throw Error(ErrorCode::internal_inconsistency, os.str());
      }
      rec->branch = br.label;
      out.records.push_back(*rec);
    }
  }
  std::sort(out.records.begin(), out.records.end(),
            [](const PteRecord& x, const PteRecord& y) { return x.k_star < y.k_star; });
  return out;
}

std::string_view to_string(PteEventKind kind) noexcept {
  switch (kind) {
    case PteEventKind::merge: return "merge";
    case PteEventKind::disappear: return "disappear";
    case PteEventKind::appear: return "appear";
    case PteEventKind::exit: return "exit";
    case PteEventKind::enter: return "enter";
    case PteEventKind::unmatched: return "unmatched";
  }
  return "unknown";
}

namespace {

class Tracker {
 public:
  Tracker(const PotentialFamily& family, const TrackOptions& opt, const Tolerances& tol)
      : family_(family), opt_(opt), tol_(tol) {}

  PteTrackSample sample(double theta, bool refined) const { return from_scan(theta, scan(theta), refined); }

  PteTrackSample from_scan(double theta, const PteScan& s, bool refined) const {
    PteTrackSample out;
    out.theta = theta;
    out.records = s.records;
    out.all_pass = s.all_pass;
    out.refined = refined;
    out.track_ids.assign(out.records.size(), -1);
    return out;
  }

  PteScan scan(double theta) const {
    return find_ptes(family_(theta), opt_.k_lo, opt_.k_hi, opt_.scan_step, tol_);
  }

  // Appends everything after `a` up to and including `b` to the track.
  void link(PteTrack& track, PteTrackSample a, PteTrackSample b, int depth) {
    const Alignment al = align(a.records, b.records);
    const bool crowded = al.events > 1;
    if (crowded && depth < tol_.track_max_refine) {
      PteTrackSample mid = sample(0.5 * (a.theta + b.theta), true);
      link(track, a, mid, depth + 1);
      link(track, track.samples.back(), std::move(b), depth + 1);
      return;
    }
    b.ambiguous = crowded;
    apply(track, a, b, al);
    track.samples.push_back(std::move(b));
  }

  int new_id() { return next_id_++; }

 private:
  enum class Op { match, lose_pair, gain_pair, lose_single, gain_single };

  struct Alignment {
    int events = 0;
    std::vector<std::pair<Op, std::size_t>> ops;  // index into a (losses, matches) or b (gains)
    std::vector<std::size_t> match_b;             // parallel to matches in ops
  };

  // Distinct simple PTEs cannot pass each other without merging, so the
  // survivors keep their order in mu. Among order-preserving alignments pick
  // the one with the fewest events (adjacent pairs lost or gained, singles
  // crossing the window edges), then the smallest total displacement.
  static Alignment align(const std::vector<PteRecord>& a, const std::vector<PteRecord>& b) {
    const std::size_t m = a.size(), n = b.size();
    struct Cell {
      int events = std::numeric_limits<int>::max();
      double cost = INFINITY;
      Op op = Op::match;
    };
    std::vector<Cell> dp((m + 1) * (n + 1));
    auto at = [&](std::size_t i, std::size_t j) -> Cell& { return dp[i * (n + 1) + j]; };
    auto relax = [](Cell& to, const Cell& from, int de, double dc, Op op) {
      if (from.events == std::numeric_limits<int>::max()) return;
      const int e = from.events + de;
      const double c = from.cost + dc;
      if (e < to.events || (e == to.events && c < to.cost)) to = {e, c, op};
    };
    at(0, 0) = {0, 0.0, Op::match};
    for (std::size_t i = 0; i <= m; ++i)
      for (std::size_t j = 0; j <= n; ++j) {
        Cell& c = at(i, j);
        if (i >= 1 && j >= 1) relax(c, at(i - 1, j - 1), 0, std::abs(a[i - 1].mu_star - b[j - 1].mu_star), Op::match);
        if (i >= 2) relax(c, at(i - 2, j), 1, a[i - 1].mu_star - a[i - 2].mu_star, Op::lose_pair);
        if (j >= 2) relax(c, at(i, j - 2), 1, b[j - 1].mu_star - b[j - 2].mu_star, Op::gain_pair);
        // Singles only at the ends of the list: below everything kept or
        // above everything kept.
        if (i >= 1 && (j == 0 || j == n)) relax(c, at(i - 1, j), 1, 0.0, Op::lose_single);
        if (j >= 1 && (i == 0 || i == m)) relax(c, at(i, j - 1), 1, 0.0, Op::gain_single);
      }
    Alignment out;
    out.events = at(m, n).events;
    std::size_t i = m, j = n;
    std::vector<std::pair<Op, std::size_t>> rev;
    std::vector<std::size_t> rev_b;
    while (i > 0 || j > 0) {
      const Op op = at(i, j).op;
      switch (op) {
        case Op::match: --i, --j; rev.emplace_back(op, i); rev_b.push_back(j); break;
        case Op::lose_pair: i -= 2; rev.emplace_back(op, i); break;
        case Op::gain_pair: j -= 2; rev.emplace_back(op, j); break;
        case Op::lose_single: --i; rev.emplace_back(op, i); break;
        case Op::gain_single: --j; rev.emplace_back(op, j); break;
      }
    }
    out.ops.assign(rev.rbegin(), rev.rend());
    out.match_b.assign(rev_b.rbegin(), rev_b.rend());
    return out;
  }

  void apply(PteTrack& track, const PteTrackSample& a, PteTrackSample& b, const Alignment& al) {
    const double gate = std::max(tol_.track_gate_slope * std::abs(b.theta - a.theta), tol_.track_gate_floor);
    const double mu_lo = opt_.k_lo * opt_.k_lo, mu_hi = opt_.k_hi * opt_.k_hi;
    auto near_edge = [&](double mu) { return mu - mu_lo <= gate || mu_hi - mu <= gate; };

    std::size_t next_match = 0;
    for (auto [op, i] : al.ops)
      if (op == Op::match) b.track_ids[al.match_b[next_match++]] = a.track_ids[i];
    for (auto [op, i] : al.ops)
      if (op == Op::gain_pair) {
        b.track_ids[i] = new_id();
        b.track_ids[i + 1] = new_id();
      } else if (op == Op::gain_single) {
        b.track_ids[i] = new_id();
      }

    for (auto [op, i] : al.ops) {
      switch (op) {
        case Op::match: break;
        case Op::lose_pair: {
          const auto [theta_star, mu_star] = locate_event(a, b, a.records[i].mu_star, a.records[i + 1].mu_star, gate);
          const std::vector<int> ids{a.track_ids[i], a.track_ids[i + 1]};
          track.events.push_back({theta_star, mu_star, PteEventKind::merge, ids});
          track.events.push_back({b.theta, mu_star, PteEventKind::disappear, ids});
          break;
        }
        case Op::gain_pair: {
          const auto [theta_star, mu_star] = locate_event(a, b, b.records[i].mu_star, b.records[i + 1].mu_star, gate);
          track.events.push_back({theta_star, mu_star, PteEventKind::appear, {b.track_ids[i], b.track_ids[i + 1]}});
          break;
        }
        case Op::lose_single: {
          const double mu = a.records[i].mu_star;
          track.events.push_back(
              {b.theta, mu, near_edge(mu) ? PteEventKind::exit : PteEventKind::unmatched, {a.track_ids[i]}});
          break;
        }
        case Op::gain_single: {
          const double mu = b.records[i].mu_star;
          track.events.push_back(
              {b.theta, mu, near_edge(mu) ? PteEventKind::enter : PteEventKind::unmatched, {b.track_ids[i]}});
          break;
        }
      }
    }
  }

  // Bisection in theta on the PTE count of an energy window around the pair.
  // Returns the crossing theta and the pair's mean energy on the side where
  // it still exists.
  std::pair<double, double> locate_event(const PteTrackSample& a, const PteTrackSample& b,
                                         double lo_mu, double hi_mu, double gate) const {
    const double w_lo = std::max(lo_mu - gate, opt_.k_lo * opt_.k_lo);
    const double w_hi = std::min(hi_mu + gate, opt_.k_hi * opt_.k_hi);
    const double k_lo = std::sqrt(std::max(w_lo, 0.0)), k_hi = std::sqrt(w_hi);
    auto window = [&](double theta) {
      return find_ptes(family_(theta), k_lo, k_hi, opt_.scan_step, tol_).records;
    };
    auto count_in = [&](const std::vector<PteRecord>& r) {
      return std::count_if(r.begin(), r.end(),
                           [&](const PteRecord& x) { return x.mu_star >= w_lo && x.mu_star <= w_hi; });
    };
    const auto n_a = count_in(a.records);
    double t0 = a.theta, t1 = b.theta;
    for (int it = 0; it < 30; ++it) {
      const double tm = 0.5 * (t0 + t1);
      if (count_in(window(tm)) == n_a) {
        t0 = tm;
      } else {
        t1 = tm;
      }
    }
    // The side holding the pair: more records in the window.
    const auto r0 = window(t0), r1 = window(t1);
    const auto& rich = r0.size() >= r1.size() ? r0 : r1;
    double best_gap = INFINITY, mu = 0.5 * (lo_mu + hi_mu);
    for (std::size_t i = 0; i + 1 < rich.size(); ++i) {
      const double gap = rich[i + 1].mu_star - rich[i].mu_star;
      if (gap < best_gap) {
        best_gap = gap;
        mu = 0.5 * (rich[i].mu_star + rich[i + 1].mu_star);
      }
    }
    return {0.5 * (t0 + t1), mu};
  }

  const PotentialFamily& family_;
  const TrackOptions& opt_;
  const Tolerances& tol_;
  int next_id_ = 0;
};

}  // namespace

PteTrack track_ptes(const PotentialFamily& family, const std::vector<double>& theta_grid,
                    const TrackOptions& opt, const Tolerances& tol) {
  if (theta_grid.empty()) throw Error(ErrorCode::invalid_argument, "theta grid is empty");
  for (std::size_t i = 2; i < theta_grid.size(); ++i)
    if ((theta_grid[i] - theta_grid[i - 1]) * (theta_grid[1] - theta_grid[0]) <= 0.0)
      throw Error(ErrorCode::invalid_argument, "theta grid must be strictly monotone");
  if (theta_grid.size() == 2 && theta_grid[0] == theta_grid[1])
    throw Error(ErrorCode::invalid_argument, "theta grid must be strictly monotone");

  Tracker tracker(family, opt, tol);
  std::vector<PteScan> scans(theta_grid.size());
  parallel_for(theta_grid.size(), [&](std::size_t i) { scans[i] = tracker.scan(theta_grid[i]); },
               opt.threads);

  PteTrack track;
  track.parameter = opt.parameter;
  PteTrackSample first = tracker.from_scan(theta_grid[0], scans[0], false);
  for (auto& id : first.track_ids) id = tracker.new_id();
  track.samples.push_back(std::move(first));
  for (std::size_t i = 1; i < theta_grid.size(); ++i) {
    const PteTrackSample prev = track.samples.back();
    tracker.link(track, prev, tracker.from_scan(theta_grid[i], scans[i], false), 0);
  }
  return track;
}

void write_track_csv(std::ostream& os, const PteTrack& track) {
  os << "theta,mu_star,k_star,branch,event\n";
  const double dir =
      track.samples.size() > 1 && track.samples.back().theta < track.samples.front().theta ? -1.0 : 1.0;
  struct Row {
    double theta;
    int order;
    std::string text;
  };
  std::vector<Row> rows;
  int order = 0;
  for (const auto& s : track.samples)
    for (std::size_t i = 0; i < s.records.size(); ++i) {
      std::ostringstream r;
      r << fmt17(s.theta) << ',' << fmt17(s.records[i].mu_star) << ',' << fmt17(s.records[i].k_star) << ','
        << s.track_ids[i] << ',' << '\n';
      rows.push_back({s.theta, order++, r.str()});
    }
  for (const auto& e : track.events) {
    std::ostringstream r;
    r << fmt17(e.theta) << ',' << fmt17(e.mu_star) << ',' << fmt17(std::sqrt(std::max(e.mu_star, 0.0))) << ','
      << (e.tracks.empty() ? -1 : e.tracks.front()) << ',' << to_string(e.kind) << '\n';
    rows.push_back({e.theta, order++, r.str()});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [dir](const Row& x, const Row& y) { return dir * x.theta < dir * y.theta; });
  for (const auto& r : rows) os << r.text;
}

std::string events_json(const PteTrack& track) {
  nlohmann::ordered_json j;
  j["parameter"] = track.parameter;
  j["events"] = nlohmann::ordered_json::array();
  for (const auto& e : track.events) {
    nlohmann::ordered_json x;
    x["theta"] = e.theta;
    x["mu_star"] = e.mu_star;
    x["kind"] = std::string(to_string(e.kind));
    x["tracks"] = e.tracks;
    j["events"].push_back(x);
  }
  std::size_t ambiguous = 0;
  for (const auto& s : track.samples) ambiguous += s.ambiguous;
  j["ambiguous_samples"] = ambiguous;
  return j.dump(2);
}

}  // namespace ptlab
