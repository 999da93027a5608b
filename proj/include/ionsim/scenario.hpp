#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ionsim/cooling.hpp"
#include "ionsim/crystal.hpp"
#include "ionsim/dynamics.hpp"
#include "ionsim/effective.hpp"
#include "ionsim/fullmodel.hpp"

namespace ionsim {

enum class ModelKind { full, effective, ising };
enum class NoiseKind { none, markovian, ou };

// Fully interpreted scenario: JSON config plus --set overrides, converted to
// SI angular frequencies and chain indices.  Frequencies are accepted as
// *_over_2pi_* keys; everything here is rad/s, seconds, and 1/s.
struct ScenarioConfig {
  std::string config_path;
  std::string config_text;             // raw config bytes (hashed for manifest)
  std::vector<std::string> overrides;  // applied key=value strings, in order

  IonChain chain;
  std::vector<int> sigma_pos;  // chain indices of the qubit ions
  std::vector<int> tau_pos;    // chain indices of the coolant ions

  bool has_cooling = false;
  double omega_tau = 0.0;   // rad/s
  double delta_tau = 0.0;   // rad/s
  double gamma_tau = 0.0;   // rad/s
  double lambda_tau = 280.3e-9;
  double tau_projection = 1.0;

  double gamma_ah = 0.0;  // anomalous heating, phonons/s

  bool has_drive = false;
  double eta1_sigma = 0.16;            // calibration at the lowest mode
  std::vector<double> delta_all;       // rad/s, one per mode (empty = zeros)
  double omega_sigma_explicit = -1.0;  // rad/s; negative = unset
  double w_over_eta_factor = 0.0;      // 0 = unset
  std::vector<double> phases;          // rad, one per qubit ion
  int selected_mode_1based = 0;        // 0 = auto (smallest |delta|)

  ModelKind model = ModelKind::full;
  std::vector<int> retained_1based;  // empty = auto retention rule
  int n_max = 8;

  std::string spin_pattern;           // default: all 'd'
  std::string fock_kind = "thermal";  // "thermal" | "vacuum"

  double t_final = 0.0;  // s
  int n_out = 201;
  SolverConfig solver;
  bool has_window = false;
  double window_a = 0.0, window_b = 0.0;  // s
  std::string target;                     // "" = none
  bool compare_effective = false;

  NoiseKind noise = NoiseKind::none;
  double Gamma_d = 0.0;  // 1/s (angular)
  double tau_c = 0.0;    // s
  int n_traj = 200;

  double Omega_d = 0.0;  // rad/s
};

// Parse the JSON file, apply the overrides in order, validate every section
// against the published schema (unknown keys are rejected), and convert to
// internal units.  Parse failures carry file:line:column positions.
ScenarioConfig load_scenario(const std::string& path,
                             const std::vector<std::string>& overrides);

// Derived physical system: crystal, cooling rates, drive calibration, and the
// retained-mode truncation, ready to feed the model builders.
struct BuiltSystem {
  EquilibriumConfig eq;
  NormalModes modes;
  CoolingRates rates_raw;  // before anomalous heating
  CoolingRates rates;      // with anomalous heating folded in
  std::vector<double> eta_tau;    // per mode
  std::vector<double> eta_sigma;  // per mode
  std::vector<double> delta;      // rad/s per mode
  std::vector<int> retained;      // 0-based mode indices, ascending
  int selected = 0;               // 0-based mode fixing the drive strength
  double Omega_sigma = 0.0;       // resolved two-photon Rabi frequency
  RamanDrive drive;               // restricted to the retained modes
  FockCutoff cutoff;
  std::vector<std::string> warnings;
};

BuiltSystem build_system(const ScenarioConfig& sc);

struct RunContext {
  ScenarioConfig sc;
  std::string out_dir;
  std::uint64_t seed = 12345;
  int jobs = 1;
};

// Command drivers.  Each writes its outputs plus a manifest.json into
// rc.out_dir (which must exist) and throws ConfigError / NumericalError on
// failure; nothing is written on configuration errors detected up front.
void run_modes(const RunContext& rc);
void run_cooling(const RunContext& rc);
void run_evolve(const RunContext& rc);
void run_steady(const RunContext& rc);
void run_sweep(const RunContext& rc, const std::string& param,
               const std::vector<double>& grid);

// FNV-1a 64-bit over the raw config bytes, then each override string, as
// "fnv1a64:<16 hex digits>".
std::string config_hash(const ScenarioConfig& sc);

}  // namespace ionsim
