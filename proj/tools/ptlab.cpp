#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ptlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Perfect-transmission energies and the PT-symmetric Robin spectrum of 1D step potentials"};
  app.set_version_flag("--version", ptlab::version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir = ".";
  bool out_given = false;
  for (const char* name : {"transmission", "spectrum", "pte-scan", "track", "ep-locate", "inverse"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory (default: the config's \"out\" or .)")
        ->each([&](const std::string&) { out_given = true; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ptlab::kExitConfig;
  }
  const auto command = ptlab::parse_command(app.get_subcommands().front()->get_name());

  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "ptlab: cannot read config " << config_path << '\n';
    return ptlab::kExitConfig;
  }
  std::ostringstream text;
  text << in.rdbuf();

  try {
    const ptlab::RunConfig cfg = ptlab::parse_config(text.str(), command);
    const std::string dir = out_given ? out_dir : cfg.out.value_or(out_dir);
    ptlab::check_writable(dir);
    const auto res = ptlab::execute(cfg, dir);
    if (res.exit_code != ptlab::kExitOk && res.manifest.contains("failure"))
      std::cerr << "ptlab: " << res.manifest["failure"]["code"].get<std::string>() << ": "
                << res.manifest["failure"]["message"].get<std::string>() << '\n';
    return res.exit_code;
  } catch (const ptlab::ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << config_path << ": " << d.where << ": " << d.message << '\n';
    return ptlab::kExitConfig;
  }
}
