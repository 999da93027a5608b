#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = IONSIM_BIN;
const std::string kPresets = IONSIM_PRESET_DIR;
const std::string kTmp = "test-tmp-cli";
int g_log_id = 0;

// Runs the binary with output captured; returns the process exit code.
int run_cli(const std::string& args) {
  fs::create_directories(kTmp);
  const std::string log =
      kTmp + "/log-" + std::to_string(g_log_id++) + ".txt";
  const std::string cmd = kBin + " " + args + " > " + log + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string cheap_evolve_args(const std::string& out) {
  return "evolve --config " + kPresets +
         "/fig2b.json --set simulation.t_final_ms=0.05 --set "
         "simulation.n_out=6 --out " +
         out;
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("evolve writes the documented outputs") {
  const std::string out = kTmp + "/evolve-a";
  fs::remove_all(out);
  REQUIRE(run_cli(cheap_evolve_args(out)) == 0);
  REQUIRE(fs::exists(out + "/timeseries.csv"));
  REQUIRE(fs::exists(out + "/summary.json"));
  REQUIRE(fs::exists(out + "/manifest.json"));

  const std::string ts = slurp(out + "/timeseries.csv");
  CHECK(ts.rfind("t_s, P_up_1, P_up_2, fidelity_phi_minus, trace, min_eig\n",
                 0) == 0);
  CHECK(count_lines(ts) == 1 + 6);

  const json summary = json::parse(slurp(out + "/summary.json"));
  CHECK(summary.at("model") == "effective");
  CHECK(summary.at("n_out") == 6);
  CHECK(summary.at("final").contains("fidelity_phi_minus"));
  CHECK(std::abs(summary.at("final").at("trace").get<double>() - 1.0) <= 1e-8);

  const json m = json::parse(slurp(out + "/manifest.json"));
  const std::string backend = m.at("backend");
  CHECK((backend == "scalar" || backend == "avx2"));
  CHECK(m.at("version") == "0.1.0");
  CHECK(m.at("command") == "evolve");
  CHECK(m.at("config") == "fig2b.json");
  CHECK(m.at("config_hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(m.at("seed") == 12345);
  CHECK(m.at("overrides").size() == 2);
}

TEST_CASE("reruns are byte-identical") {
  const std::string a = kTmp + "/rerun-a", b = kTmp + "/rerun-b";
  fs::remove_all(a);
  fs::remove_all(b);
  REQUIRE(run_cli(cheap_evolve_args(a)) == 0);
  REQUIRE(run_cli(cheap_evolve_args(b)) == 0);
  CHECK(slurp(a + "/timeseries.csv") == slurp(b + "/timeseries.csv"));
  CHECK(slurp(a + "/summary.json") == slurp(b + "/summary.json"));
}

TEST_CASE("configuration failures exit 2 and write nothing") {
  fs::create_directories(kTmp);
  const std::string bad = kTmp + "/bad.json";
  std::ofstream(bad) << "{ not json";
  const std::string out = kTmp + "/never-created";
  fs::remove_all(out);
  CHECK(run_cli("evolve --config " + bad + " --out " + out) == 2);
  CHECK_FALSE(fs::exists(out));

  CHECK(run_cli(cheap_evolve_args(out) + " --set model.bogus_key=1") == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("numerical failures exit 3") {
  const std::string out = kTmp + "/underflow";
  // Unsatisfiable error control forces the step size to underflow.
  CHECK(run_cli(cheap_evolve_args(out) +
                " --set simulation.rel_tol=1e-30"
                " --set simulation.abs_tol=1e-300") == 3);
}

TEST_CASE("flag handling") {
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("") == 2);           // a subcommand is required
  CHECK(run_cli("evolve") == 2);     // --config is required
  CHECK(run_cli("evolve --config x.json --frobnicate") == 2);
}

TEST_CASE("steady refuses a stochastic-noise scenario") {
  const std::string out = kTmp + "/steady-ou";
  CHECK(run_cli("steady --config " + kPresets + "/ising-noise.json --out " +
                out) == 2);
}

TEST_CASE("sweep tabulates the grid and parallelizes deterministically") {
  const std::string one = kTmp + "/sweep-1", two = kTmp + "/sweep-2";
  fs::remove_all(one);
  fs::remove_all(two);
  const std::string base = "sweep --config " + kPresets +
                           "/fig2b.json --param cooling.omega_tau_over_gamma "
                           "--grid 0.2,2.0 --out ";
  REQUIRE(run_cli(base + one) == 0);
  const std::string csv = slurp(one + "/sweep.csv");
  CHECK(csv.rfind("param, value, mode, omega_over_2pi_mhz, W_per_s, nbar, "
                  "delta_tilde_over_2pi_mhz, R\n",
                  0) == 0);
  CHECK(count_lines(csv) == 1 + 2 * 3); // two grid points, three modes each

  const json m = json::parse(slurp(one + "/manifest.json"));
  CHECK(m.at("param") == "cooling.omega_tau_over_gamma");
  CHECK(m.at("grid") == json::array({0.2, 2.0}));

  REQUIRE(run_cli(base + two + " --jobs 2") == 0);
  CHECK(slurp(two + "/sweep.csv") == csv);

  CHECK(run_cli("sweep --config " + kPresets + "/fig2b.json --grid 1 --out " +
                kTmp + "/sweep-x") == 2); // --param is required
}

} // TEST_SUITE
