#include "ptlab/config.hpp"

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "ptlab/errors.hpp"

namespace ptlab {

using nlohmann::ordered_json;

namespace {

std::string join(const std::vector<Diagnostic>& diags) {
  std::ostringstream os;
  for (std::size_t i = 0; i < diags.size(); ++i) {
    if (i) os << '\n';
    os << diags[i].where << ": " << diags[i].message;
  }
  return os.str();
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

using Diags = std::vector<Diagnostic>;

// Walks one JSON object, remembering which keys were consumed so that
// anything left over can be reported as unknown.
class Fields {
 public:
  Fields(const ordered_json& j, std::string path, Diags& d) : j_(j), path_(std::move(path)), d_(d) {
    if (!j_.is_object()) {
      fail(path_, "expected an object");
      ok_ = false;
    }
  }

  bool ok() const noexcept { return ok_; }
  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  void fail(const std::string& where, const std::string& msg) { d_.push_back({where.empty() ? "(root)" : where, msg}); }

  bool has(const std::string& key) {
    if (!ok_) return false;
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const ordered_json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::optional<double> number(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(at(key), "missing required number");
      return std::nullopt;
    }
    const auto& v = raw(key);
    if (!v.is_number() || !std::isfinite(v.get<double>())) {
      fail(at(key), "expected a finite number");
      return std::nullopt;
    }
    return v.get<double>();
  }
  double number_or(const std::string& key, double def) { return number(key, false).value_or(def); }

  double positive(const std::string& key, double def) {
    const auto v = number(key, false);
    if (v && !(*v > 0.0)) fail(at(key), "must be positive");
    return v.value_or(def);
  }

  std::optional<int> integer(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(at(key), "missing required integer");
      return std::nullopt;
    }
    const auto& v = raw(key);
    if (!v.is_number_integer()) {
      fail(at(key), "expected an integer");
      return std::nullopt;
    }
    return v.get<int>();
  }

  std::optional<std::string> string(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(at(key), "missing required string");
      return std::nullopt;
    }
    const auto& v = raw(key);
    if (!v.is_string()) {
      fail(at(key), "expected a string");
      return std::nullopt;
    }
    return v.get<std::string>();
  }

  std::optional<std::pair<double, double>> interval(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(at(key), "missing required [lo, hi] pair");
      return std::nullopt;
    }
    const auto& v = raw(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
      fail(at(key), "expected [lo, hi]");
      return std::nullopt;
    }
    const double lo = v[0].get<double>(), hi = v[1].get<double>();
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
      fail(at(key), "expected finite lo < hi");
      return std::nullopt;
    }
    return std::pair{lo, hi};
  }

  // Either an explicit strictly monotone array or {start, stop, step|count}.
  std::vector<double> grid(const std::string& key, bool increasing_only) {
    std::vector<double> out;
    if (!has(key)) {
      fail(at(key), "missing required grid");
      return out;
    }
    const auto& v = raw(key);
    const std::string where = at(key);
    if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
          fail(where + "[" + std::to_string(i) + "]", "expected a finite number");
          return {};
        }
        out.push_back(v[i].get<double>());
      }
    } else if (v.is_object()) {
      auto u = uniform(key, false);
      if (!u) return {};
      out = expand(*u);
    } else {
      fail(where, "expected an array or {start, stop, step|count}");
      return {};
    }
    if (out.empty()) {
      fail(where, "grid is empty");
      return out;
    }
    const bool up = out.size() < 2 || out[1] > out[0];
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (up ? !(out[i] > out[i - 1]) : !(out[i] < out[i - 1])) {
        fail(where + "[" + std::to_string(i) + "]", "grid is not strictly monotone");
        return {};
      }
    }
    if (increasing_only && !up) fail(where, "grid must be increasing");
    return out;
  }

  std::optional<UniformGrid> uniform(const std::string& key, bool required) {
    if (!has(key)) {
      if (required) fail(at(key), "missing required {start, stop, step}");
      return std::nullopt;
    }
    Fields g(raw(key), at(key), d_);
    if (!g.ok()) return std::nullopt;
    const auto start = g.number("start", true);
    const auto stop = g.number("stop", true);
    const bool has_step = g.has("step"), has_count = g.has("count");
    std::optional<double> step;
    if (has_step && has_count) {
      g.fail(g.at("step"), "give step or count, not both");
    } else if (has_step) {
      step = g.number("step", true);
      if (step && !(*step > 0.0)) {
        g.fail(g.at("step"), "must be positive");
        step.reset();
      }
    } else if (has_count) {
      const auto n = g.integer("count", true);
      if (n && *n < 2) {
        g.fail(g.at("count"), "must be at least 2");
      } else if (n && start && stop) {
        step = std::abs(*stop - *start) / (*n - 1);
      }
    } else {
      g.fail(at(key), "needs step or count");
    }
    g.finish();
    if (!start || !stop || !step) return std::nullopt;
    if (*start == *stop) {
      g.fail(at(key), "start equals stop");
      return std::nullopt;
    }
    if (std::abs(*stop - *start) / *step > 1e7) {
      g.fail(at(key), "more than 1e7 grid points");
      return std::nullopt;
    }
    return UniformGrid{*start, *stop, *step};
  }

  void finish() {
    if (!ok_) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
  }

  static std::vector<double> expand(const UniformGrid& u) {
    const double dir = u.stop > u.start ? 1.0 : -1.0;
    const double span = std::abs(u.stop - u.start);
    const auto n = static_cast<long>(std::floor(span / u.step + 1e-9));
    std::vector<double> out;
    for (long i = 0; i <= n; ++i) out.push_back(u.start + dir * static_cast<double>(i) * u.step);
    if (std::abs(out.back() - u.stop) <= 1e-9 * u.step) out.back() = u.stop;
    return out;
  }

 private:
  const ordered_json& j_;
  std::string path_;
  Diags& d_;
  std::set<std::string> seen_;
  bool ok_ = true;
};

PotentialInput read_potential(Fields& root, Diags& d) {
  PotentialInput in;
  if (!root.has("potential")) {
    root.fail("potential", "missing required object");
    return in;
  }
  Fields f(root.raw("potential"), "potential", d);
  if (!f.ok()) return in;
  in.type = f.string("type", true).value_or("");
  in.a = f.number("a", true).value_or(0.0);
  if (f.has("a") && !(in.a > 0.0)) f.fail("potential.a", "must be positive");
  if (in.type == "square_well") {
    in.depth = f.number("depth", true).value_or(0.0);
  } else if (in.type == "steps") {
    const bool he = f.has("eps"), hb = f.has("beta");
    if (!he) f.fail("potential.eps", "missing required array");
    if (!hb) f.fail("potential.beta", "missing required array");
    if (he && hb) {
      const auto& e = f.raw("eps");
      const auto& b = f.raw("beta");
      if (!e.is_array() || !b.is_array()) {
        f.fail("potential", "eps and beta must be arrays");
      } else {
        if (e.size() != b.size())
          f.fail("potential.eps/potential.beta",
                 "eps has " + std::to_string(e.size()) + " entries but beta has " + std::to_string(b.size()));
        if (e.empty()) f.fail("potential.eps", "at least one band is required");
        int nulls = 0;
        for (std::size_t i = 0; i < e.size(); ++i) {
          const std::string w = "potential.eps[" + std::to_string(i) + "]";
          if (e[i].is_null()) {
            ++nulls;
            in.eps.emplace_back();
          } else if (!e[i].is_number() || !(e[i].get<double>() > 0.0) || !std::isfinite(e[i].get<double>())) {
            f.fail(w, "expected a positive width or null");
            in.eps.emplace_back(0.0);
          } else {
            in.eps.emplace_back(e[i].get<double>());
          }
        }
        if (nulls > 1) f.fail("potential.eps", "at most one width may be null");
        for (std::size_t i = 0; i < b.size(); ++i) {
          if (!b[i].is_number() || !std::isfinite(b[i].get<double>()))
            f.fail("potential.beta[" + std::to_string(i) + "]", "expected a finite number");
          else
            in.beta.push_back(b[i].get<double>());
        }
      }
    }
  } else if (!in.type.empty()) {
    f.fail("potential.type", "unknown type '" + in.type + "' (square_well, steps)");
  }
  f.finish();
  return in;
}

VarySpec read_vary(Fields& f, const PotentialInput& pin) {
  VarySpec v;
  if (!f.has("vary")) {
    f.fail(f.at("vary"), "missing required {field, index}");
    return v;
  }
  const auto& raw = f.raw("vary");
  Diags local;
  Fields g(raw, f.at("vary"), local);
  if (g.ok()) {
    v.field = g.string("field", true).value_or("");
    v.index = g.integer("index", false).value_or(0);
    g.finish();
    const bool steps = pin.type == "steps";
    if (v.field == "beta" || v.field == "eps") {
      if (!steps) {
        g.fail(g.at("field"), "'" + v.field + "' needs a steps potential");
      } else if (v.index < 0 || v.index >= static_cast<int>(pin.beta.size())) {
        g.fail(g.at("index"), "out of range for potential." + v.field);
      } else if (v.field == "eps" && !pin.eps[v.index]) {
        g.fail(g.at("index"), "cannot vary the null (remainder) width");
      }
    } else if (v.field == "depth") {
      if (pin.type != "square_well") g.fail(g.at("field"), "'depth' needs a square_well potential");
    } else if (v.field != "shift" && !v.field.empty()) {
      g.fail(g.at("field"), "unknown field '" + v.field + "' (beta, eps, depth, shift)");
    }
  }
  for (auto& x : local) f.fail(x.where, x.message);
  return v;
}

AlphaCoupling read_coupling(Fields& f) {
  if (!f.has("coupling")) return DispersionCoupled{};
  const auto& c = f.raw("coupling");
  if (c.is_string()) {
    const auto s = c.get<std::string>();
    if (s == "dispersion") return DispersionCoupled{};
    if (s == "theta") return AlphaIsTheta{};
    f.fail(f.at("coupling"), "expected \"dispersion\", \"theta\" or {\"alpha\": value}");
    return DispersionCoupled{};
  }
  Diags local;
  Fields g(c, f.at("coupling"), local);
  double alpha = 0.0;
  if (g.ok()) {
    alpha = g.number("alpha", true).value_or(0.0);
    g.finish();
  }
  for (auto& x : local) f.fail(x.where, x.message);
  return FixedAlpha{alpha};
}

Tolerances read_tolerances(Fields& root, Diags& d) {
  Tolerances t;
  if (!root.has("tolerances")) return t;
  Fields f(root.raw("tolerances"), "tolerances", d);
  if (!f.ok()) return t;
  auto pos_int = [&](const char* key, int& slot) {
    if (auto v = f.integer(key, false)) {
      if (*v <= 0) f.fail(f.at(key), "must be positive");
      else slot = *v;
    }
  };
  auto nonneg_int = [&](const char* key, int& slot) {
    if (auto v = f.integer(key, false)) {
      if (*v < 0) f.fail(f.at(key), "must not be negative");
      else slot = *v;
    }
  };
  t.root_residual = f.positive("root_residual", t.root_residual);
  pos_int("newton_max_iter", t.newton_max_iter);
  pos_int("contour_panels", t.contour_panels);
  t.contour_max_dphase = f.positive("contour_max_dphase", t.contour_max_dphase);
  pos_int("contour_max_depth", t.contour_max_depth);
  nonneg_int("contour_retries", t.contour_retries);
  pos_int("continuation_max_halvings", t.continuation_max_halvings);
  t.collision_distance = f.positive("collision_distance", t.collision_distance);
  t.pte_scan_step = f.positive("pte_scan_step", t.pte_scan_step);
  t.pte_verify = f.positive("pte_verify", t.pte_verify);
  t.all_pass_relative = f.positive("all_pass_relative", t.all_pass_relative);
  t.track_gate_slope = f.positive("track_gate_slope", t.track_gate_slope);
  t.track_gate_floor = f.positive("track_gate_floor", t.track_gate_floor);
  nonneg_int("track_max_refine", t.track_max_refine);
  f.finish();
  return t;
}

void read_k_range(Fields& f, double& lo, double& hi) {
  if (auto k = f.interval("k", true)) {
    if (k->first < 0.0) f.fail(f.at("k"), "wavenumbers must be non-negative");
    lo = k->first;
    hi = k->second;
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<Diagnostic> diags) : std::runtime_error(join(diags)), diags_(std::move(diags)) {}

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::transmission: return "transmission";
    case Command::spectrum: return "spectrum";
    case Command::pte_scan: return "pte-scan";
    case Command::track: return "track";
    case Command::ep_locate: return "ep-locate";
    case Command::inverse: return "inverse";
  }
  return "?";
}

std::optional<Command> parse_command(std::string_view name) noexcept {
  for (auto c : {Command::transmission, Command::spectrum, Command::pte_scan, Command::track, Command::ep_locate,
                 Command::inverse})
    if (to_string(c) == name) return c;
  return std::nullopt;
}

PotentialSpec build_potential(const PotentialInput& in) {
  if (in.type == "square_well") return make_square_well(in.a, in.depth);
  StepFamilySpec s;
  s.half_width = in.a;
  double fixed = 0.0;
  for (const auto& e : in.eps) fixed += e.value_or(0.0);
  for (std::size_t i = 0; i < in.eps.size(); ++i) {
    s.widths.push_back(in.eps[i] ? *in.eps[i] : in.a - fixed);
    s.strengths.push_back(in.beta.at(i));
  }
  return make_steps(s);
}

PotentialFamily build_family(const PotentialInput& in, const VarySpec& vary) {
  if (vary.field == "shift") {
    const PotentialSpec base = build_potential(in);
    return [base](double theta) { return add_constant(base, theta); };
  }
  return [in, vary](double theta) {
    PotentialInput q = in;
    if (vary.field == "beta") q.beta.at(vary.index) = theta;
    else if (vary.field == "eps") q.eps.at(vary.index) = theta;
    else if (vary.field == "depth") q.depth = theta;
    return build_potential(q);
  };
}

RunConfig parse_config(const std::string& text, std::optional<Command> command) {
  Diags d;
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    // nlohmann prefixes its own location; keep only the description.
    if (auto p = msg.find("parse error"); p != std::string::npos) msg = msg.substr(p);
    if (auto p = msg.find(": "); p != std::string::npos && msg.rfind("parse error at", 0) == 0)
      msg = "parse error: " + msg.substr(p + 2);
    throw ConfigError({{line_col(text, e.byte == 0 ? 0 : e.byte - 1), msg}});
  }

  RunConfig cfg;
  cfg.echo = doc;
  Fields root(doc, "", d);
  if (!root.ok()) throw ConfigError(d);

  std::optional<Command> cmd = command;
  if (auto name = root.string("command", false)) {
    const auto c = parse_command(*name);
    if (!c) root.fail("command", "unknown command '" + *name + "'");
    else if (cmd && *cmd != *c)
      root.fail("command", "document says '" + *name + "' but '" + std::string(to_string(*cmd)) + "' was requested");
    else cmd = c;
  }
  if (!cmd) {
    // A document with exactly one command section names its command.
    for (auto c : {Command::transmission, Command::spectrum, Command::pte_scan, Command::track, Command::ep_locate,
                   Command::inverse}) {
      if (!doc.contains(std::string(to_string(c)))) continue;
      if (cmd) {
        cmd.reset();
        break;
      }
      cmd = c;
    }
  }
  if (!cmd) {
    root.fail("command", "no command given");
    throw ConfigError(d);
  }
  cfg.command = *cmd;
  cfg.out = root.string("out", false);

  cfg.potential_input = read_potential(root, d);
  cfg.tol = read_tolerances(root, d);

  const std::string section(to_string(cfg.command));
  for (auto c : {Command::transmission, Command::spectrum, Command::pte_scan, Command::track, Command::ep_locate,
                 Command::inverse}) {
    const std::string other(to_string(c));
    if (c != cfg.command && root.has(other)) root.fail(other, "section for a different command");
  }

  if (!root.has(section)) {
    root.fail(section, "missing required section for command '" + section + "'");
  } else {
    Fields f(root.raw(section), section, d);
    if (f.ok()) {
      switch (cfg.command) {
        case Command::transmission: {
          cfg.transmission.k2 = f.grid("k2", true);
          if (!cfg.transmission.k2.empty() && !(cfg.transmission.k2.front() > 0.0))
            f.fail(f.at("k2"), "energies must be positive");
          break;
        }
        case Command::spectrum: {
          auto& s = cfg.spectrum;
          if (auto g = f.uniform("alpha", true)) {
            if (g->stop < g->start) f.fail(f.at("alpha"), "grid must be increasing");
            s.alpha = *g;
          }
          s.re_cap = f.number("re_cap", true).value_or(0.0);
          s.re_lo = f.number_or("re_lo", std::nan(""));
          s.im_half = f.positive("im_half", s.im_half);
          if (auto n = f.integer("max_count", false)) {
            if (*n < 1) f.fail(f.at("max_count"), "must be at least 1");
            else s.max_count = *n;
          }
          break;
        }
        case Command::pte_scan: {
          read_k_range(f, cfg.pte_scan.k_lo, cfg.pte_scan.k_hi);
          cfg.pte_scan.scan_step = f.positive("scan_step", cfg.tol.pte_scan_step);
          break;
        }
        case Command::track: {
          auto& t = cfg.track;
          t.vary = read_vary(f, cfg.potential_input);
          t.theta = f.grid("theta", false);
          read_k_range(f, t.k_lo, t.k_hi);
          t.scan_step = f.positive("scan_step", cfg.tol.pte_scan_step);
          break;
        }
        case Command::ep_locate: {
          auto& e = cfg.ep;
          e.vary = read_vary(f, cfg.potential_input);
          e.coupling = read_coupling(f);
          e.bracket = f.interval("bracket", false);
          if (f.has("start")) {
            Diags local;
            Fields g(f.raw("start"), f.at("start"), local);
            if (g.ok()) {
              const auto th = g.number("theta", true);
              const auto mu = g.number("mu", true);
              g.finish();
              if (th && mu) e.start = std::pair{*th, *mu};
            }
            for (auto& x : local) f.fail(x.where, x.message);
          }
          if (e.bracket) e.mu_guess = f.number("mu_guess", true).value_or(0.0);
          if (!e.bracket && !e.start) f.fail(section, "needs a bracket (with mu_guess) or a start point");
          if (e.bracket && e.start) f.fail(section, "give a bracket or a start point, not both");
          e.options.window = f.positive("window", e.options.window);
          if (auto n = f.integer("count_points", false)) {
            if (*n < 2) f.fail(f.at("count_points"), "must be at least 2");
            else e.options.count_points = *n;
          }
          e.options.tol_f = f.positive("tol_f", e.options.tol_f);
          e.options.tol_df = f.positive("tol_df", e.options.tol_df);
          break;
        }
        case Command::inverse: {
          auto& v = cfg.inverse;
          if (auto w = f.interval("window", true)) {
            v.mu_lo = w->first;
            v.mu_hi = w->second;
          }
          v.v0 = f.grid("v0", true);
          v.alpha = f.grid("alpha", true);
          v.k_hi = f.number_or("k_hi", 0.0);
          if (v.k_hi < 0.0) f.fail(f.at("k_hi"), "must not be negative (0 picks a default)");
          v.scan_step = f.positive("scan_step", cfg.tol.pte_scan_step);
          v.refine_tolerance = f.number_or("refine_tolerance", 0.0);
          if (v.refine_tolerance < 0.0) f.fail(f.at("refine_tolerance"), "must not be negative");
          if (f.has("direct")) {
            Diags local;
            Fields g(f.raw("direct"), f.at("direct"), local);
            if (g.ok()) {
              DirectBranch b;
              b.alpha0 = g.number("alpha0", true).value_or(0.0);
              b.mu0 = g.number("mu0", true).value_or(0.0);
              b.step = g.positive("step", b.step);
              g.finish();
              v.direct = b;
            }
            for (auto& x : local) f.fail(x.where, x.message);
          }
          break;
        }
      }
      f.finish();
    }
  }
  root.finish();

  if (d.empty()) {
    try {
      cfg.potential = build_potential(cfg.potential_input);
      if (cfg.command == Command::spectrum && std::isnan(cfg.spectrum.re_lo))
        cfg.spectrum.re_lo = cfg.potential.min_value() - 1.0;
      if (cfg.command == Command::spectrum && !(cfg.spectrum.re_lo < cfg.spectrum.re_cap))
        d.push_back({"spectrum.re_cap", "must exceed the lower edge of the search box"});
    } catch (const Error& e) {
      d.push_back({"potential", e.what()});
    }
  }
  if (!d.empty()) throw ConfigError(d);
  return cfg;
}

}  // namespace ptlab
