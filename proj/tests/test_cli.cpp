#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ptlab/cli.hpp"
#include "ptlab/errors.hpp"
#include "ptlab/format.hpp"

using namespace ptlab;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const char* kStepsPotential =
    R"("potential": {"type": "steps", "a": 0.7853981633974483, "eps": [0.2, null, 0.5], "beta": [-90, 0, -100]})";

std::vector<Diagnostic> diagnostics(const std::string& text, std::optional<Command> c = std::nullopt) {
  try {
    parse_config(text, c);
  } catch (const ConfigError& e) {
    return e.diagnostics();
  }
  return {};
}

bool mentions(const std::vector<Diagnostic>& d, const std::string& where) {
  for (const auto& x : d)
    if (x.where.find(where) != std::string::npos) return true;
  return false;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ptlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<double>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("square-well spectrum document") {
  const auto cfg = parse_config(R"({
    "command": "spectrum",
    "potential": {"type": "square_well", "a": 2, "depth": 1},
    "spectrum": {"alpha": {"start": 0, "stop": 3, "step": 0.05}, "re_cap": 12}
  })");
  CHECK(cfg.command == Command::spectrum);
  CHECK(cfg.potential.segments().size() == 1);
  CHECK(cfg.potential.segments()[0].value == -1.0);
  CHECK(cfg.spectrum.alpha.step == 0.05);
  CHECK(cfg.spectrum.re_lo == -2.0);
  CHECK(cfg.spectrum.im_half == 500.0);
}

TEST_CASE("steps document resolves heights") {
  const auto cfg = parse_config(std::string("{") + kStepsPotential + R"(,
    "transmission": {"k2": {"start": 1, "stop": 500, "count": 500}}})",
                                Command::transmission);
  const auto segs = cfg.potential.segments();
  REQUIRE(segs.size() == 5);
  CHECK(segs[2].value == doctest::Approx(-450.0).epsilon(1e-14));
  CHECK(segs[1].value == 0.0);
  CHECK(segs[0].value == doctest::Approx(-200.0).epsilon(1e-14));
  CHECK(cfg.potential.is_even());
  CHECK(cfg.transmission.k2.size() == 500);
  CHECK(cfg.transmission.k2.back() == 500.0);
}

TEST_CASE("diagnostics") {
  SUBCASE("eps longer than beta names both fields") {
    const auto d = diagnostics(R"({"potential": {"type": "steps", "a": 1, "eps": [0.1, 0.2, 0.3], "beta": [1, 2]},
      "pte-scan": {"k": [0, 5]}})");
    REQUIRE(!d.empty());
    CHECK(mentions(d, "potential.eps"));
    CHECK(mentions(d, "potential.beta"));
  }
  SUBCASE("unknown field with its path") {
    const auto d = diagnostics(R"({"potential": {"type": "square_well", "a": 2, "depth": 1, "detph": 1},
      "pte-scan": {"k": [0, 5], "scan_stp": 0.1}})");
    CHECK(mentions(d, "potential.detph"));
    CHECK(mentions(d, "pte-scan.scan_stp"));
  }
  SUBCASE("syntax error carries a line") {
    const auto d = diagnostics("{\n  \"potential\": {\n    \"type\": ,\n");
    REQUIRE(d.size() == 1);
    CHECK(d[0].where.rfind("line 3", 0) == 0);
  }
  SUBCASE("non-monotone grid") {
    const auto d = diagnostics(R"({"potential": {"type": "square_well", "a": 2, "depth": 1},
      "transmission": {"k2": [1, 3, 2]}})",
                               Command::transmission);
    CHECK(mentions(d, "transmission.k2[2]"));
  }
  SUBCASE("tolerances must be positive") {
    const auto d = diagnostics(R"({"potential": {"type": "square_well", "a": 2, "depth": 1},
      "tolerances": {"pte_verify": 0, "collision_distance": -1},
      "pte-scan": {"k": [0, 5]}})",
                               Command::pte_scan);
    CHECK(mentions(d, "tolerances.pte_verify"));
    CHECK(mentions(d, "tolerances.collision_distance"));
  }
  SUBCASE("command mismatch and missing section") {
    CHECK(mentions(diagnostics(R"({"command": "track", "potential": {"type": "square_well", "a": 2, "depth": 1},
      "pte-scan": {"k": [0, 5]}})",
                               Command::pte_scan),
                   "command"));
    CHECK(mentions(diagnostics(R"({"potential": {"type": "square_well", "a": 2, "depth": 1}})", Command::inverse),
                   "inverse"));
  }
  SUBCASE("widths exceeding a") {
    const auto d = diagnostics(R"({"potential": {"type": "steps", "a": 1, "eps": [0.7, 0.6], "beta": [1, 2]},
      "pte-scan": {"k": [0, 5]}})");
    CHECK(mentions(d, "potential"));
  }
  SUBCASE("vary must name an existing number") {
    const auto d = diagnostics(std::string("{") + kStepsPotential + R"(,
      "track": {"vary": {"field": "beta", "index": 3}, "theta": [-100, -90], "k": [1, 5]}})");
    CHECK(mentions(d, "track.vary.index"));
  }
}

TEST_CASE("free pte-scan is an all-pass outcome") {
  const auto dir = scratch("free");
  const auto cfg = parse_config(R"({"potential": {"type": "square_well", "a": 2, "depth": 0},
    "pte-scan": {"k": [0, 10]}})",
                                Command::pte_scan);
  const auto res = execute(cfg, dir);
  CHECK(res.exit_code == kExitOk);
  CHECK(res.manifest["outcomes"]["all_pass"] == true);
  CHECK(fs::exists(dir / "ptes.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("transmission is byte-deterministic and the manifest lists every tolerance") {
  const std::string doc = std::string("{") + kStepsPotential + R"(,
    "tolerances": {"pte_verify": 1e-9},
    "transmission": {"k2": {"start": 0.5, "stop": 500, "step": 0.5}}})";
  const auto cfg = parse_config(doc, Command::transmission);
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  REQUIRE(execute(cfg, d1).exit_code == kExitOk);
  const auto res = execute(parse_config(doc, Command::transmission), d2);
  CHECK(slurp(d1 / "transmission.csv") == slurp(d2 / "transmission.csv"));
  CHECK(slurp(d1 / "transmission.csv").rfind("k2,T2,R2,argT\n", 0) == 0);

  const auto& t = res.manifest["tolerances"];
  for (const char* key : {"root_residual", "newton_max_iter", "contour_panels", "contour_max_dphase",
                          "contour_max_depth", "contour_retries", "continuation_max_halvings", "collision_distance",
                          "pte_scan_step", "pte_verify", "all_pass_relative", "track_gate_slope", "track_gate_floor",
                          "track_max_refine"})
    CHECK_MESSAGE(t.contains(key), key);
  CHECK(t["pte_verify"] == 1e-9);
  CHECK(res.manifest["config"]["tolerances"]["pte_verify"] == 1e-9);
  CHECK(res.manifest.contains("wall_time_s"));
  CHECK(res.manifest["version"] == version());
}

TEST_CASE("square-well spectrum recipe reproduces the level formula") {
  const auto dir = scratch("well_spectrum");
  const auto cfg = parse_config(R"({"potential": {"type": "square_well", "a": 2, "depth": 1},
    "spectrum": {"alpha": {"start": 0, "stop": 3, "step": 0.05}, "re_cap": 12, "im_half": 5}})",
                                Command::spectrum);
  const auto res = execute(cfg, dir);
  REQUIRE(res.exit_code == kExitOk);
  // Levels below 12 at alpha = 0: alpha^2 - 1 and (n pi / 4)^2 - 1 for n = 1..4.
  REQUIRE(res.manifest["outcomes"]["branch_count"] == 5);
  const auto n0 = read_csv(dir / "branch_0.csv");
  REQUIRE(n0.size() == 61);
  for (const auto& r : n0) CHECK(std::abs(r[1] - (r[0] * r[0] - 1.0)) < 1e-10);
  for (int n = 1; n <= 4; ++n) {
    const double level = std::pow(n * pi / 4, 2) - 1.0;
    for (const auto& r : read_csv(dir / ("branch_" + std::to_string(n) + ".csv"))) {
      CHECK(std::abs(r[1] - level) < 1e-10 * std::max(1.0, std::abs(level)));
      CHECK(std::abs(r[2]) < 1e-12);
    }
  }
}

TEST_CASE("pte-scan energies are transmission peaks") {
  const std::string pot = std::string("{") + kStepsPotential;
  const auto d = scratch("peaks");
  REQUIRE(execute(parse_config(pot + R"(, "pte-scan": {"k": [1, 25]}})", Command::pte_scan), d).exit_code == 0);
  const auto ptes = read_csv(d / "ptes.csv");
  REQUIRE(ptes.size() >= 3);
  std::string grid = "[";
  for (std::size_t i = 0; i < ptes.size(); ++i) grid += (i ? "," : "") + fmt17(ptes[i][1]);
  grid += "]";
  REQUIRE(execute(parse_config(pot + R"(, "transmission": {"k2": )" + grid + "}}", Command::transmission), d)
              .exit_code == 0);
  for (const auto& r : read_csv(d / "transmission.csv")) {
    CHECK(std::abs(r[1] - 1.0) < 1e-8);
    CHECK(r[2] < 1e-8);
  }
}

TEST_CASE("numerical failures exit 2 and keep partial outputs") {
  SUBCASE("ep bracket without a pair change") {
    const auto dir = scratch("noep");
    const auto cfg = parse_config(std::string("{") + kStepsPotential + R"(,
      "ep-locate": {"vary": {"field": "beta", "index": 0}, "bracket": [-100, -95], "mu_guess": 190, "window": 20}})",
                                  Command::ep_locate);
    const auto res = execute(cfg, dir);
    CHECK(res.exit_code == kExitNumerical);
    CHECK(res.manifest["status"] == "numerical_failure");
    CHECK(res.manifest["failure"]["code"] == "precondition-failed");
    CHECK(fs::exists(dir / "manifest.json"));
  }
  SUBCASE("bad direct seed after the curve was written") {
    const auto dir = scratch("partial");
    const auto cfg = parse_config(R"({"potential": {"type": "square_well", "a": 2, "depth": 1},
      "inverse": {"window": [4, 5], "v0": {"start": 0, "stop": 0.5, "step": 0.125}, "alpha": [2.15, 2.2],
                  "direct": {"alpha0": 2.2, "mu0": 3.0}}})",
                                  Command::inverse);
    const auto res = execute(cfg, dir);
    CHECK(res.exit_code == kExitNumerical);
    CHECK(fs::exists(dir / "curve.csv"));
    CHECK(read_csv(dir / "curve.csv").size() == 5);
    CHECK_FALSE(fs::exists(dir / "reconstruction.csv"));
  }
}

TEST_CASE("ep-locate recipe") {
  const auto dir = scratch("ep");
  const auto cfg = parse_config(std::string("{") + kStepsPotential + R"(,
    "ep-locate": {"vary": {"field": "beta", "index": 0}, "bracket": [-90, -84], "mu_guess": 190, "window": 20}})",
                                Command::ep_locate);
  const auto res = execute(cfg, dir);
  REQUIRE(res.exit_code == kExitOk);
  const auto& ep = res.manifest["outcomes"]["exceptional_point"];
  CHECK(ep["residual_F"].get<double>() < 1e-10);
  CHECK(ep["residual_dF"].get<double>() < 1e-8);
  CHECK(ep["im_mu"].get<double>() == 0.0);
  CHECK(fs::exists(dir / "ep.json"));
}

TEST_CASE("unwritable output directory is a config error") {
  const auto blocker = scratch("blocker");
  { std::ofstream(blocker.string()) << "x"; }
  CHECK_THROWS_AS(check_writable(blocker / "sub"), ConfigError);
  fs::remove(blocker);
}
