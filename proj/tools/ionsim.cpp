#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ionsim/errors.hpp"
#include "ionsim/scenario.hpp"
#include "ionsim/version.hpp"

namespace {

struct Opts {
  std::string config;
  std::string out = "./ionsim-out";
  std::uint64_t seed = 12345;
  int jobs = 1;
  std::vector<std::string> sets;
  std::string param;
  std::vector<double> grid;
};

void add_common(CLI::App* cmd, Opts& o) {
  cmd->add_option("--config", o.config, "scenario JSON file")->required();
  cmd->add_option("--out", o.out,
                  "output directory, created if missing (default ./ionsim-out)");
  cmd->add_option("--seed", o.seed, "master RNG seed (default 12345)");
  cmd->add_option("--jobs", o.jobs, "worker threads for sweep points")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--set", o.sets,
                  "override a config key, e.g. --set simulation.n_out=101 "
                  "(repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapped-ion crystal simulator: normal modes, sympathetic "
               "cooling, and dissipative spin dynamics"};
  app.set_version_flag("--version", IONSIM_VERSION);
  app.require_subcommand(1);
  Opts o;

  CLI::App* c_modes =
      app.add_subcommand("modes", "axial normal-mode table");
  CLI::App* c_cooling =
      app.add_subcommand("cooling", "per-mode cooling rates and ratios");
  CLI::App* c_evolve =
      app.add_subcommand("evolve", "time evolution to CSV + summary");
  CLI::App* c_steady =
      app.add_subcommand("steady", "stationary state dump");
  CLI::App* c_sweep =
      app.add_subcommand("sweep", "cooling table over a parameter grid");
  for (CLI::App* c : {c_modes, c_cooling, c_evolve, c_steady, c_sweep})
    add_common(c, o);
  c_sweep->add_option("--param", o.param, "dotted config key to sweep")
      ->required();
  c_sweep
      ->add_option("--grid", o.grid, "comma-separated parameter values")
      ->required()
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ionsim::RunContext rc;
    rc.sc = ionsim::load_scenario(o.config, o.sets);
    std::filesystem::create_directories(o.out);
    rc.out_dir = o.out;
    rc.seed = o.seed;
    rc.jobs = o.jobs;
    if (app.got_subcommand(c_modes)) {
      ionsim::run_modes(rc);
    } else if (app.got_subcommand(c_cooling)) {
      ionsim::run_cooling(rc);
    } else if (app.got_subcommand(c_evolve)) {
      ionsim::run_evolve(rc);
    } else if (app.got_subcommand(c_steady)) {
      ionsim::run_steady(rc);
    } else {
      ionsim::run_sweep(rc, o.param, o.grid);
    }
    return 0;
  } catch (const ionsim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const ionsim::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
