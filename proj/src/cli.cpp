#include "ptlab/cli.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "ptlab/errors.hpp"
#include "ptlab/format.hpp"
#include "ptlab/inverse.hpp"
#include "ptlab/parallel.hpp"
#include "ptlab/pte.hpp"
#include "ptlab/transfer.hpp"

namespace ptlab {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

ordered_json tolerances_json(const Tolerances& t) {
  ordered_json j;
  j["root_residual"] = t.root_residual;
  j["newton_max_iter"] = t.newton_max_iter;
  j["contour_panels"] = t.contour_panels;
  j["contour_max_dphase"] = t.contour_max_dphase;
  j["contour_max_depth"] = t.contour_max_depth;
  j["contour_retries"] = t.contour_retries;
  j["continuation_max_halvings"] = t.continuation_max_halvings;
  j["collision_distance"] = t.collision_distance;
  j["pte_scan_step"] = t.pte_scan_step;
  j["pte_verify"] = t.pte_verify;
  j["all_pass_relative"] = t.all_pass_relative;
  j["track_gate_slope"] = t.track_gate_slope;
  j["track_gate_floor"] = t.track_gate_floor;
  j["track_max_refine"] = t.track_max_refine;
  return j;
}

// Numbers specific to the command that also steer the numerics.
ordered_json command_tolerances(const RunConfig& cfg) {
  ordered_json j = ordered_json::object();
  switch (cfg.command) {
    case Command::pte_scan: j["scan_step"] = cfg.pte_scan.scan_step; break;
    case Command::track: j["scan_step"] = cfg.track.scan_step; break;
    case Command::inverse:
      j["scan_step"] = cfg.inverse.scan_step;
      j["refine_tolerance"] = cfg.inverse.refine_tolerance;
      break;
    case Command::ep_locate: {
      const auto& o = cfg.ep.options;
      j["window"] = o.window;
      j["count_points"] = o.count_points;
      j["bisections"] = o.bisections;
      j["tol_f"] = o.tol_f;
      j["tol_df"] = o.tol_df;
      j["newton_max_iter"] = o.newton_max_iter;
      break;
    }
    case Command::spectrum:
      j["im_half"] = cfg.spectrum.im_half;
      j["max_count"] = cfg.spectrum.max_count;
      break;
    case Command::transmission: break;
  }
  return j;
}

std::string coupling_name(const AlphaCoupling& c) {
  if (std::holds_alternative<DispersionCoupled>(c)) return "dispersion";
  if (std::holds_alternative<AlphaIsTheta>(c)) return "theta";
  return "alpha=" + fmt17(std::get<FixedAlpha>(c).alpha);
}

class Runner {
 public:
  Runner(const RunConfig& cfg, fs::path dir, ordered_json& outcomes, ordered_json& outputs)
      : cfg_(cfg), dir_(std::move(dir)), outcomes_(outcomes), outputs_(outputs) {}

  template <class F>
  void write(const std::string& name, F&& body) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + (dir_ / name).string());
    body(os);
    os.close();
    if (!os) throw std::runtime_error("failed writing " + (dir_ / name).string());
    outputs_.push_back(name);
  }

  // Returns false when a partial numerical failure was recorded in outcomes.
  bool run() {
    switch (cfg_.command) {
      case Command::transmission: return transmission();
      case Command::spectrum: return spectrum();
      case Command::pte_scan: return pte_scan();
      case Command::track: return track();
      case Command::ep_locate: return ep_locate();
      case Command::inverse: return inverse();
    }
    return true;
  }

 private:
  bool transmission() {
    const auto& k2 = cfg_.transmission.k2;
    std::vector<TransmissionPoint> pts(k2.size());
    parallel_for(
        k2.size(),
        [&](std::size_t i) { pts[i] = transmission_curve(cfg_.potential, std::span(&k2[i], 1)).front(); },
        thread_budget());
    write("transmission.csv", [&](std::ostream& os) { write_transmission_csv(os, pts); });
    double tmax = 0.0;
    for (const auto& p : pts) tmax = std::max(tmax, p.T2);
    outcomes_["points"] = pts.size();
    outcomes_["max_T2"] = tmax;
    return true;
  }

  bool spectrum() {
    const auto& s = cfg_.spectrum;
    const double a_lo = s.alpha.start, a_hi = s.alpha.stop;
    // Labels follow ascending real part at alpha = 0 when the range holds it.
    const double a_ref = (a_lo <= 0.0 && 0.0 <= a_hi) ? 0.0 : a_lo;
    const ComplexBox box{s.re_lo, s.re_cap, -s.im_half, s.im_half};
    const auto seeds = find_eigenvalues(cfg_.potential, RobinParameter{a_ref}, box, s.max_count, cfg_.tol);
    outcomes_["reference_alpha"] = a_ref;
    outcomes_["branch_count"] = seeds.size();

    std::vector<std::optional<EigenBranch>> branches(seeds.size());
    std::vector<std::string> failures(seeds.size());
    parallel_for(
        seeds.size(),
        [&](std::size_t i) {
          try {
            branches[i] = continue_branch(cfg_.potential, a_ref, seeds[i], a_lo, a_hi, s.alpha.step, cfg_.tol,
                                          static_cast<int>(i));
          } catch (const ContinuationStall& e) {
            std::ostringstream os;
            os << to_string(e.code()) << ": " << e.what() << " (last good alpha " << fmt17(e.last_good().alpha)
               << ", mu " << fmt17(e.last_good().mu.real()) << (e.last_good().mu.imag() < 0 ? "" : "+")
               << fmt17(e.last_good().mu.imag()) << "i)";
            failures[i] = os.str();
          }
        },
        thread_budget());

    ordered_json list = ordered_json::array();
    bool clean = true;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      ordered_json b;
      b["label"] = i;
      b["re_mu_ref"] = seeds[i].real();
      b["im_mu_ref"] = seeds[i].imag();
      const std::string name = "branch_" + std::to_string(i) + ".csv";
      if (branches[i]) {
        write(name, [&](std::ostream& os) { write_branch_csv(os, *branches[i]); });
        b["file"] = name;
        b["samples"] = branches[i]->samples.size();
        b["end"] = branches[i]->end == BranchEnd::collision ? "collision" : "range_end";
        if (branches[i]->collision) {
          b["collision_alpha"] = branches[i]->collision->alpha;
          b["collision_re_mu"] = branches[i]->collision->mu.real();
        }
      } else {
        b["failure"] = failures[i];
        clean = false;
      }
      list.push_back(b);
    }
    outcomes_["branches"] = list;
    return clean;
  }

  bool pte_scan() {
    const auto& s = cfg_.pte_scan;
    const PteScan scan = find_ptes(cfg_.potential, s.k_lo, s.k_hi, s.scan_step, cfg_.tol);
    write("ptes.csv", [&](std::ostream& os) {
      os << "k_star,mu_star,multiplicity,residual_f,residual_r\n";
      for (const auto& r : scan.records)
        os << fmt17(r.k_star) << ',' << fmt17(r.mu_star) << ',' << r.multiplicity << ',' << fmt17(r.residual_f)
           << ',' << fmt17(r.residual_r) << '\n';
    });
    outcomes_["all_pass"] = scan.all_pass;
    outcomes_["pte_count"] = scan.records.size();
    if (scan.all_pass) outcomes_["note"] = "reflectionless over the whole range; PTEs are not isolated";
    return true;
  }

  bool track() {
    const auto& t = cfg_.track;
    TrackOptions opt;
    opt.k_lo = t.k_lo;
    opt.k_hi = t.k_hi;
    opt.scan_step = t.scan_step;
    opt.parameter = t.vary.field + (t.vary.field == "beta" || t.vary.field == "eps"
                                        ? "[" + std::to_string(t.vary.index) + "]"
                                        : "");
    opt.threads = thread_budget();
    const PteTrack tr = track_ptes(build_family(cfg_.potential_input, t.vary), t.theta, opt, cfg_.tol);
    write("track.csv", [&](std::ostream& os) { write_track_csv(os, tr); });
    write("events.json", [&](std::ostream& os) { os << events_json(tr) << '\n'; });
    outcomes_["samples"] = tr.samples.size();
    outcomes_["events"] = ordered_json::parse(events_json(tr))["events"];
    return true;
  }

  bool ep_locate() {
    const auto& e = cfg_.ep;
    const auto family = build_family(cfg_.potential_input, e.vary);
    outcomes_["coupling"] = coupling_name(e.coupling);
    try {
      const ExceptionalPoint ep =
          e.start ? refine_exceptional_point(family, e.coupling, e.start->first, e.start->second, e.options)
                  : locate_exceptional_point(family, e.coupling, e.bracket->first, e.bracket->second, e.mu_guess,
                                             e.options);
      write("ep.json", [&](std::ostream& os) { os << to_json(ep) << '\n'; });
      outcomes_["exceptional_point"] = ordered_json::parse(to_json(ep));
    } catch (const NoExceptionalPoint& x) {
      outcomes_["trace"] = x.trace();
      throw;
    }
    return true;
  }

  bool inverse() {
    const auto& v = cfg_.inverse;
    KappaSelector sel;
    sel.mu_lo = v.mu_lo;
    sel.mu_hi = v.mu_hi;
    sel.k_hi = v.k_hi;
    sel.scan_step = v.scan_step;
    sel.refine_tolerance = v.refine_tolerance;
    sel.threads = thread_budget();
    const MeasurementCurve curve = simulate_kappa(cfg_.potential, sel, v.v0, cfg_.tol);
    write("curve.csv", [&](std::ostream& os) { write_curve_csv(os, curve); });
    outcomes_["curve_samples"] = curve.samples.size();
    outcomes_["monotone"] = curve.monotone;
    outcomes_["min_slope"] = curve.min_slope;
    outcomes_["all_pass_v0"] = curve.all_pass_v0;
    outcomes_["crossing_v0"] = curve.crossing_v0;
    if (curve.truncation) {
      ordered_json t;
      t["v0_last"] = curve.truncation->v0_last;
      t["v0_missing"] = curve.truncation->v0_missing;
      t["kappa_last"] = curve.truncation->kappa_last;
      t["reason"] = curve.truncation->reason;
      outcomes_["truncation"] = t;
    }

    const Reconstruction rec = reconstruct_branch(curve, v.alpha);
    ordered_json skipped = ordered_json::array();
    for (const auto& s : rec.skipped) skipped.push_back({{"alpha", s.alpha}, {"reason", s.reason}});
    outcomes_["reconstructed_samples"] = rec.branch.samples.size();
    outcomes_["skipped"] = skipped;

    std::vector<const EigenBranch*> out{&rec.branch};
    std::optional<EigenBranch> direct;
    if (v.direct) {
      const double lo = std::min(v.alpha.front(), v.alpha.back());
      const double hi = std::max(v.alpha.front(), v.alpha.back());
      direct = continue_branch(cfg_.potential, v.direct->alpha0, v.direct->mu0, std::min(lo, v.direct->alpha0),
                               std::max(hi, v.direct->alpha0), v.direct->step, cfg_.tol);
      out.push_back(&*direct);
      double sup = 0.0;
      for (const auto& s : rec.branch.samples) {
        const auto& ds = direct->samples;
        auto it = std::lower_bound(ds.begin(), ds.end(), s.alpha,
                                   [](const BranchSample& b, double a) { return b.alpha < a; });
        if (it == ds.end()) --it;
        const auto mu = refine_eigenvalue(cfg_.potential, s.alpha, it->mu, cfg_.tol);
        if (!mu) throw Error(ErrorCode::resolution, "direct branch could not be evaluated at a reconstructed alpha");
        sup = std::max(sup, std::abs(*mu - s.mu));
      }
      outcomes_["sup_error_vs_direct"] = sup;
    }
    write("reconstruction.csv", [&](std::ostream& os) { write_reconstruction_csv(os, out); });
    return true;
  }

  const RunConfig& cfg_;
  fs::path dir_;
  ordered_json& outcomes_;
  ordered_json& outputs_;
};

}  // namespace

std::string version() { return "0.1.0"; }

void check_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw ConfigError({{"--out", "cannot create output directory " + dir.string()}});
  const fs::path probe = dir / ".ptlab_write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw ConfigError({{"--out", "output directory is not writable: " + dir.string()}});
  }
  fs::remove(probe, ec);
}

RunResult execute(const RunConfig& cfg, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  check_writable(out_dir);

  RunResult res;
  ordered_json outcomes = ordered_json::object();
  ordered_json outputs = ordered_json::array();
  ordered_json failure;
  try {
    Runner r(cfg, out_dir, outcomes, outputs);
    if (!r.run()) {
      res.exit_code = kExitNumerical;
      failure["code"] = "partial";
      failure["message"] = "some outputs could not be computed; see outcomes";
    }
  } catch (const Error& e) {
    res.exit_code = kExitNumerical;
    failure["code"] = std::string(to_string(e.code()));
    failure["message"] = e.what();
  } catch (const std::exception& e) {
    res.exit_code = kExitNumerical;
    failure["code"] = "unexpected";
    failure["message"] = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ordered_json& m = res.manifest;
  m["tool"] = "ptlab";
  m["version"] = version();
  m["command"] = std::string(to_string(cfg.command));
  m["config"] = cfg.echo;
  m["tolerances"] = tolerances_json(cfg.tol);
  m["command_tolerances"] = command_tolerances(cfg);
  m["threads"] = thread_budget();
  m["wall_time_s"] = wall;
  m["status"] = res.exit_code == kExitOk ? "ok" : "numerical_failure";
  m["exit_code"] = res.exit_code;
  m["outcomes"] = outcomes;
  if (!failure.is_null()) m["failure"] = failure;
  m["outputs"] = outputs;

  std::ofstream os(out_dir / "manifest.json", std::ios::binary);
  os << m.dump(2) << '\n';
  return res;
}

}  // namespace ptlab
