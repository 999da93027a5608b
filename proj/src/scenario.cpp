#include "ionsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ionsim/constants.hpp"
#include "ionsim/errors.hpp"
#include "ionsim/kernels.hpp"
#include "ionsim/superop.hpp"
#include "ionsim/version.hpp"

namespace ionsim {
namespace {

using nlohmann::json;

constexpr double k_mhz = k_two_pi * 1e6;
constexpr double k_khz = k_two_pi * 1e3;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::string fmt_g(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.12g", v);
  return b;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open config file: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  if (f.bad()) fail("cannot read config file: " + path);
  return os.str();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail("cannot write output file: " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f) fail("failed writing output file: " + path);
}

json parse_doc(const std::string& path, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // e.byte is the 1-based offset of the failure; convert to line:column.
    std::size_t line = 1, col = 1;
    const std::size_t stop = e.byte > 0 ? e.byte - 1 : 0;
    for (std::size_t i = 0; i < stop && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
         e.what());
  }
}

void set_path_value(json& doc, const std::string& dotted, const json& value) {
  std::vector<std::string> segs;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    segs.push_back(dotted.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (const std::string& s : segs)
    if (s.empty()) fail("invalid key path: " + dotted);
  json* cur = &doc;
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    if (!cur->is_object() && !cur->is_null())
      fail("key path crosses a non-object value: " + dotted);
    cur = &(*cur)[segs[i]];
  }
  if (!cur->is_object() && !cur->is_null())
    fail("key path crosses a non-object value: " + dotted);
  (*cur)[segs.back()] = value;
}

void apply_set(json& doc, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    fail("--set expects key.path=value, got: " + kv);
  const std::string key = kv.substr(0, eq);
  const std::string vs = kv.substr(eq + 1);
  json val;
  try {
    val = json::parse(vs);
  } catch (...) {
    val = vs;  // bare word: treat as a string
  }
  set_path_value(doc, key, val);
}

void check_keys(const json& o, const std::string& sec,
                std::initializer_list<const char*> allowed) {
  for (auto it = o.begin(); it != o.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) fail(sec + "." + it.key() + ": unknown key");
  }
}

double as_num(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

long long as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + ": expected an integer");
  return v.get<long long>();
}

bool as_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) fail(where + ": expected true or false");
  return v.get<bool>();
}

std::string as_str(const json& v, const std::string& where) {
  if (!v.is_string()) fail(where + ": expected a string");
  return v.get<std::string>();
}

double req_num(const json& o, const std::string& sec, const char* key) {
  if (!o.contains(key)) fail(sec + "." + key + ": required key missing");
  return as_num(o.at(key), sec + "." + key);
}

double opt_num(const json& o, const std::string& sec, const char* key,
               double def) {
  if (!o.contains(key)) return def;
  return as_num(o.at(key), sec + "." + key);
}

long long opt_int(const json& o, const std::string& sec, const char* key,
                  long long def) {
  if (!o.contains(key)) return def;
  return as_int(o.at(key), sec + "." + key);
}

bool opt_bool(const json& o, const std::string& sec, const char* key,
              bool def) {
  if (!o.contains(key)) return def;
  return as_bool(o.at(key), sec + "." + key);
}

std::string req_str(const json& o, const std::string& sec, const char* key) {
  if (!o.contains(key)) fail(sec + "." + key + ": required key missing");
  return as_str(o.at(key), sec + "." + key);
}

std::string opt_str(const json& o, const std::string& sec, const char* key,
                    const std::string& def) {
  if (!o.contains(key)) return def;
  return as_str(o.at(key), sec + "." + key);
}

const json& section(const json& doc, const char* name) {
  const json& s = doc.at(name);
  if (!s.is_object()) fail(std::string(name) + ": expected an object");
  return s;
}

ScenarioConfig interpret(const json& doc, std::string path, std::string text,
                         std::vector<std::string> overrides) {
  if (!doc.is_object()) fail("config root must be a JSON object");
  check_keys(doc, "config",
             {"chain", "cooling", "heating", "drive", "model", "initial",
              "simulation", "noise", "ising"});

  ScenarioConfig sc;
  sc.config_path = std::move(path);
  sc.config_text = std::move(text);
  sc.overrides = std::move(overrides);

  // ---- chain ----
  if (!doc.contains("chain")) fail("chain: section required");
  const json& jc = section(doc, "chain");
  check_keys(jc, "chain", {"species", "omega_z_over_2pi_mhz", "reference_amu"});
  if (!jc.contains("species")) fail("chain.species: required key missing");
  const json& js = jc.at("species");
  if (!js.is_array() || js.empty())
    fail("chain.species: expected a non-empty array");
  std::vector<double> amu;
  int idx = 0;
  for (const json& e : js) {
    const std::string where = "chain.species[" + std::to_string(idx) + "]";
    IonSpecies ion;
    double a = 0.0;
    if (e.is_string()) {
      const std::string s = e.get<std::string>();
      if (s == "mg25") {
        a = 25.0;
        ion.role = IonSpecies::Role::sigma;
      } else if (s == "mg24") {
        a = 24.0;
        ion.role = IonSpecies::Role::tau;
      } else {
        fail(where + ": unknown species \"" + s +
             "\" (known shorthands: \"mg25\", \"mg24\")");
      }
      ion.label = s;
    } else if (e.is_object()) {
      check_keys(e, where, {"mass_amu", "role", "label"});
      a = req_num(e, where, "mass_amu");
      if (!(a > 0)) fail(where + ".mass_amu: must be positive");
      const std::string role = req_str(e, where, "role");
      if (role == "sigma") {
        ion.role = IonSpecies::Role::sigma;
      } else if (role == "tau") {
        ion.role = IonSpecies::Role::tau;
      } else {
        fail(where + ".role: expected \"sigma\" or \"tau\"");
      }
      ion.label = opt_str(e, where, "label", role);
    } else {
      fail(where + ": expected a species string or an object");
    }
    ion.mass_kg = a * k_amu;
    amu.push_back(a);
    sc.chain.ions.push_back(ion);
    ++idx;
  }
  const double wz = req_num(jc, "chain", "omega_z_over_2pi_mhz");
  if (!(wz > 0)) fail("chain.omega_z_over_2pi_mhz: must be positive");
  sc.chain.omega_z = k_mhz * wz;
  for (std::size_t i = 0; i < sc.chain.ions.size(); ++i) {
    if (sc.chain.ions[i].role == IonSpecies::Role::sigma)
      sc.sigma_pos.push_back(static_cast<int>(i));
    else
      sc.tau_pos.push_back(static_cast<int>(i));
  }
  double ref =
      amu[sc.sigma_pos.empty() ? 0 : static_cast<std::size_t>(sc.sigma_pos[0])];
  ref = opt_num(jc, "chain", "reference_amu", ref);
  if (!(ref > 0)) fail("chain.reference_amu: must be positive");
  sc.chain.reference_mass_kg = ref * k_amu;

  const int n_ions = static_cast<int>(sc.chain.ions.size());
  const int n_sigma = static_cast<int>(sc.sigma_pos.size());
  sc.phases.assign(static_cast<std::size_t>(n_sigma), 0.0);
  sc.spin_pattern.assign(static_cast<std::size_t>(n_sigma), 'd');

  // ---- cooling ----
  if (doc.contains("cooling")) {
    const json& o = section(doc, "cooling");
    check_keys(o, "cooling",
               {"omega_tau_over_gamma", "delta_tau_over_gamma",
                "gamma_tau_over_2pi_mhz", "lambda_tau_nm", "projection"});
    const double g = opt_num(o, "cooling", "gamma_tau_over_2pi_mhz", 41.4);
    if (!(g > 0)) fail("cooling.gamma_tau_over_2pi_mhz: must be positive");
    sc.gamma_tau = k_mhz * g;
    const double om = req_num(o, "cooling", "omega_tau_over_gamma");
    if (om < 0) fail("cooling.omega_tau_over_gamma: must be >= 0");
    sc.omega_tau = om * sc.gamma_tau;
    sc.delta_tau = opt_num(o, "cooling", "delta_tau_over_gamma", -0.5) *
                   sc.gamma_tau;
    const double lam = opt_num(o, "cooling", "lambda_tau_nm", 280.3);
    if (!(lam > 0)) fail("cooling.lambda_tau_nm: must be positive");
    sc.lambda_tau = lam * 1e-9;
    sc.tau_projection = opt_num(o, "cooling", "projection", 1.0);
    if (sc.tau_pos.empty()) fail("cooling: chain has no tau (coolant) ions");
    sc.has_cooling = true;
  }

  // ---- heating ----
  if (doc.contains("heating")) {
    const json& o = section(doc, "heating");
    check_keys(o, "heating", {"gamma_ah_phonons_per_ms"});
    const double gah = req_num(o, "heating", "gamma_ah_phonons_per_ms");
    if (gah < 0) fail("heating.gamma_ah_phonons_per_ms: must be >= 0");
    sc.gamma_ah = gah * 1e3;
  }

  // ---- drive ----
  if (doc.contains("drive")) {
    const json& o = section(doc, "drive");
    check_keys(o, "drive",
               {"eta1_sigma", "delta_over_2pi_mhz", "phases_pi",
                "omega_sigma_over_2pi_mhz", "omega_sigma_rule",
                "selected_mode"});
    if (n_sigma == 0) fail("drive: chain has no sigma (qubit) ions");
    sc.eta1_sigma = opt_num(o, "drive", "eta1_sigma", 0.16);
    if (!(sc.eta1_sigma > 0)) fail("drive.eta1_sigma: must be positive");
    if (o.contains("delta_over_2pi_mhz")) {
      const json& d = o.at("delta_over_2pi_mhz");
      if (!d.is_array() || static_cast<int>(d.size()) != n_ions)
        fail("drive.delta_over_2pi_mhz: expected one entry per mode (" +
             std::to_string(n_ions) + ")");
      int k = 0;
      for (const json& v : d) {
        sc.delta_all.push_back(
            k_mhz * as_num(v, "drive.delta_over_2pi_mhz[" +
                                  std::to_string(k) + "]"));
        ++k;
      }
    }
    if (o.contains("phases_pi")) {
      const json& p = o.at("phases_pi");
      if (!p.is_array() || static_cast<int>(p.size()) != n_sigma)
        fail("drive.phases_pi: expected one entry per sigma ion (" +
             std::to_string(n_sigma) + ")");
      int k = 0;
      for (const json& v : p) {
        sc.phases[static_cast<std::size_t>(k)] =
            k_pi * as_num(v, "drive.phases_pi[" + std::to_string(k) + "]");
        ++k;
      }
    }
    const bool has_exp = o.contains("omega_sigma_over_2pi_mhz");
    const bool has_rule = o.contains("omega_sigma_rule");
    if (has_exp == has_rule)
      fail("drive: exactly one of omega_sigma_over_2pi_mhz and "
           "omega_sigma_rule is required");
    if (has_exp) {
      const double v =
          as_num(o.at("omega_sigma_over_2pi_mhz"),
                 "drive.omega_sigma_over_2pi_mhz");
      if (v < 0) fail("drive.omega_sigma_over_2pi_mhz: must be >= 0");
      sc.omega_sigma_explicit = k_mhz * v;
    } else {
      const json& r = o.at("omega_sigma_rule");
      if (!r.is_object()) fail("drive.omega_sigma_rule: expected an object");
      check_keys(r, "drive.omega_sigma_rule", {"w_over_eta_factor"});
      sc.w_over_eta_factor =
          req_num(r, "drive.omega_sigma_rule", "w_over_eta_factor");
      if (!(sc.w_over_eta_factor > 0))
        fail("drive.omega_sigma_rule.w_over_eta_factor: must be positive");
    }
    if (o.contains("selected_mode")) {
      const long long m = as_int(o.at("selected_mode"), "drive.selected_mode");
      if (m < 1 || m > n_ions)
        fail("drive.selected_mode: out of range 1.." + std::to_string(n_ions));
      sc.selected_mode_1based = static_cast<int>(m);
    }
    sc.has_drive = true;
  }

  // ---- model ----
  if (doc.contains("model")) {
    const json& o = section(doc, "model");
    check_keys(o, "model", {"kind", "retained_modes", "n_max"});
    const std::string kind = opt_str(o, "model", "kind", "full");
    if (kind == "full") {
      sc.model = ModelKind::full;
    } else if (kind == "effective") {
      sc.model = ModelKind::effective;
    } else if (kind == "ising") {
      sc.model = ModelKind::ising;
    } else {
      fail("model.kind: expected \"full\", \"effective\", or \"ising\"");
    }
    if (o.contains("retained_modes")) {
      const json& r = o.at("retained_modes");
      if (r.is_string()) {
        if (r.get<std::string>() != "auto")
          fail("model.retained_modes: expected \"auto\" or an array of "
               "1-based mode numbers");
      } else if (r.is_array()) {
        if (r.empty()) fail("model.retained_modes: array must be non-empty");
        int k = 0;
        for (const json& v : r) {
          const long long m = as_int(
              v, "model.retained_modes[" + std::to_string(k) + "]");
          if (m < 1 || m > n_ions)
            fail("model.retained_modes: mode " + std::to_string(m) +
                 " out of range 1.." + std::to_string(n_ions));
          sc.retained_1based.push_back(static_cast<int>(m));
          ++k;
        }
        std::sort(sc.retained_1based.begin(), sc.retained_1based.end());
        if (std::adjacent_find(sc.retained_1based.begin(),
                               sc.retained_1based.end()) !=
            sc.retained_1based.end())
          fail("model.retained_modes: duplicate mode number");
      } else {
        fail("model.retained_modes: expected \"auto\" or an array");
      }
    }
    const long long nmax = opt_int(o, "model", "n_max", 8);
    if (nmax < 1 || nmax > 4096) fail("model.n_max: out of range 1..4096");
    sc.n_max = static_cast<int>(nmax);
  }

  // ---- initial ----
  if (doc.contains("initial")) {
    const json& o = section(doc, "initial");
    check_keys(o, "initial", {"spin", "fock"});
    if (o.contains("spin")) {
      const std::string s = as_str(o.at("spin"), "initial.spin");
      if (static_cast<int>(s.size()) != n_sigma)
        fail("initial.spin: expected one character per sigma ion (" +
             std::to_string(n_sigma) + ")");
      for (char c : s)
        if (c != 'u' && c != 'd' && c != 'x')
          fail("initial.spin: characters must be 'u', 'd', or 'x'");
      sc.spin_pattern = s;
    }
    const std::string fk = opt_str(o, "initial", "fock", "thermal");
    if (fk != "thermal" && fk != "vacuum")
      fail("initial.fock: expected \"thermal\" or \"vacuum\"");
    sc.fock_kind = fk;
  }

  // ---- simulation ----
  if (doc.contains("simulation")) {
    const json& o = section(doc, "simulation");
    check_keys(o, "simulation",
               {"t_final_ms", "n_out", "rel_tol", "abs_tol", "window_ms",
                "target", "compare_effective"});
    if (o.contains("t_final_ms")) {
      const double t = as_num(o.at("t_final_ms"), "simulation.t_final_ms");
      if (!(t > 0)) fail("simulation.t_final_ms: must be positive");
      sc.t_final = t * 1e-3;
    }
    const long long n = opt_int(o, "simulation", "n_out", 201);
    if (n < 2 || n > 1000000) fail("simulation.n_out: out of range 2..1000000");
    sc.n_out = static_cast<int>(n);
    sc.solver.rel_tol = opt_num(o, "simulation", "rel_tol", 1e-8);
    sc.solver.abs_tol = opt_num(o, "simulation", "abs_tol", 1e-10);
    if (!(sc.solver.rel_tol > 0)) fail("simulation.rel_tol: must be positive");
    if (!(sc.solver.abs_tol > 0)) fail("simulation.abs_tol: must be positive");
    if (o.contains("window_ms")) {
      const json& w = o.at("window_ms");
      if (!w.is_array() || w.size() != 2)
        fail("simulation.window_ms: expected [start_ms, end_ms]");
      const double a = as_num(w.at(0), "simulation.window_ms[0]");
      const double b = as_num(w.at(1), "simulation.window_ms[1]");
      if (!(a >= 0) || !(b > a))
        fail("simulation.window_ms: need 0 <= start < end");
      sc.window_a = a * 1e-3;
      sc.window_b = b * 1e-3;
      sc.has_window = true;
    }
    if (o.contains("target")) {
      const std::string t = as_str(o.at("target"), "simulation.target");
      if (t != "psi_bell" && t != "phi_minus" && t != "phi_plus")
        fail("simulation.target: expected \"psi_bell\", \"phi_minus\", or "
             "\"phi_plus\"");
      if (n_sigma != 2)
        fail("simulation.target: named targets require exactly two sigma "
             "ions");
      sc.target = t;
    }
    sc.compare_effective =
        opt_bool(o, "simulation", "compare_effective", false);
  }

  // ---- noise ----
  if (doc.contains("noise")) {
    const json& o = section(doc, "noise");
    check_keys(o, "noise",
               {"kind", "gamma_d_over_2pi_khz", "tau_c_us", "n_traj"});
    const std::string kind = req_str(o, "noise", "kind");
    if (kind == "none") {
      sc.noise = NoiseKind::none;
    } else if (kind == "markovian") {
      sc.noise = NoiseKind::markovian;
    } else if (kind == "ou") {
      sc.noise = NoiseKind::ou;
    } else {
      fail("noise.kind: expected \"none\", \"markovian\", or \"ou\"");
    }
    if (sc.noise != NoiseKind::none) {
      const double gd = req_num(o, "noise", "gamma_d_over_2pi_khz");
      if (gd < 0) fail("noise.gamma_d_over_2pi_khz: must be >= 0");
      sc.Gamma_d = k_khz * gd;
    }
    if (sc.noise == NoiseKind::ou) {
      const double tc = req_num(o, "noise", "tau_c_us");
      if (!(tc > 0)) fail("noise.tau_c_us: must be positive");
      sc.tau_c = tc * 1e-6;
      const long long nt = opt_int(o, "noise", "n_traj", 200);
      if (nt < 2 || nt > 1000000) fail("noise.n_traj: out of range 2..1000000");
      sc.n_traj = static_cast<int>(nt);
    }
  }

  // ---- ising ----
  if (doc.contains("ising")) {
    const json& o = section(doc, "ising");
    check_keys(o, "ising", {"omega_d_over_2pi_mhz"});
    const double od = req_num(o, "ising", "omega_d_over_2pi_mhz");
    if (!(od > 0)) fail("ising.omega_d_over_2pi_mhz: must be positive");
    sc.Omega_d = k_mhz * od;
  }

  // ---- cross-section checks ----
  if (sc.model != ModelKind::full) {
    if (!sc.has_drive)
      fail("model.kind: effective/ising models require a drive section");
    if (!sc.has_cooling)
      fail("model.kind: effective/ising models require a cooling section");
  }
  if (sc.model == ModelKind::ising && !(sc.Omega_d > 0))
    fail("model.kind \"ising\": requires ising.omega_d_over_2pi_mhz");
  if (sc.has_window && sc.t_final > 0 &&
      sc.window_b > sc.t_final * (1.0 + 1e-12))
    fail("simulation.window_ms: window extends past t_final_ms");
  return sc;
}

// ---------------------------------------------------------------------------
// output helpers

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& cols) {
  const std::size_t nrow = cols.empty() ? 0 : cols.front().size();
  for (const auto& c : cols)
    if (c.size() != nrow)
      throw NumericalError("internal error: ragged CSV columns");
  std::ostringstream os;
  for (std::size_t i = 0; i < header.size(); ++i)
    os << (i ? ", " : "") << header[i];
  os << "\n";
  for (std::size_t r = 0; r < nrow; ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      os << (c ? ", " : "") << fmt_g(cols[c][r]);
    os << "\n";
  }
  write_text(path, os.str());
}

void write_manifest(const RunContext& rc, const std::string& command,
                    const std::vector<std::string>& outputs,
                    const json* extra = nullptr) {
  json m;
  m["backend"] = kern::backend_name();
  m["command"] = command;
  m["config"] =
      std::filesystem::path(rc.sc.config_path).filename().string();
  m["config_hash"] = config_hash(rc.sc);
  m["outputs"] = outputs;
  m["overrides"] = rc.sc.overrides;
  m["seed"] = rc.seed;
  m["version"] = IONSIM_VERSION;
  if (extra)
    for (auto it = extra->begin(); it != extra->end(); ++it)
      m[it.key()] = it.value();
  write_text(rc.out_dir + "/manifest.json", m.dump(2) + "\n");
}

const char* model_name(ModelKind k) {
  switch (k) {
    case ModelKind::full: return "full";
    case ModelKind::effective: return "effective";
    case ModelKind::ising: return "ising";
  }
  return "?";
}

std::string target_short(const std::string& target) {
  return target == "psi_bell" ? std::string("bell") : target;
}

// ---------------------------------------------------------------------------
// model assembly shared by evolve and steady

struct ModelBundle {
  Generator gen;
  DensityMatrix rho0;
  bool has_fock = false;
  std::vector<std::string> warnings;
};

void merge_warnings(std::vector<std::string>& into,
                    const std::vector<std::string>& from) {
  for (const std::string& w : from)
    if (std::find(into.begin(), into.end(), w) == into.end())
      into.push_back(w);
}

ModelBundle make_model(const ScenarioConfig& sc, const BuiltSystem& bs) {
  if (!sc.has_drive) fail("model building requires a drive section");
  ModelBundle mb;
  const HeatingSpec hs{sc.gamma_ah};
  switch (sc.model) {
    case ModelKind::full: {
      mb.gen = build_full_generator(bs.drive, bs.rates_raw, hs, bs.modes,
                                    bs.cutoff);
      mb.has_fock = true;
      break;
    }
    case ModelKind::effective: {
      const EffectiveSpinModel em =
          sw_flipflop_params(bs.drive, bs.rates, bs.modes);
      merge_warnings(mb.warnings, em.warnings);
      mb.gen = build_effective_liouvillian(em);
      break;
    }
    case ModelKind::ising: {
      const DrivenIsingModel im =
          sw_ising_params(bs.drive, bs.rates, bs.modes, sc.Omega_d);
      merge_warnings(mb.warnings, im.warnings);
      mb.gen = build_ising_liouvillian(im);
      break;
    }
  }
  merge_warnings(mb.warnings, mb.gen.warnings);
  merge_warnings(mb.warnings, bs.warnings);

  switch (sc.noise) {
    case NoiseKind::none:
      break;
    case NoiseKind::markovian:
      add_markovian_dephasing(mb.gen, sc.Gamma_d);
      mb.gen.finalize();
      break;
    case NoiseKind::ou:
      add_ou_dephasing_pattern(mb.gen);
      mb.gen.finalize();
      break;
  }

  const SpaceLayout& sl = mb.gen.layout;
  const std::vector<cplx> spin = spin_ket(sl, sc.spin_pattern);
  std::vector<double> nb;
  if (mb.has_fock) {
    for (int m : bs.retained) {
      const ModeRates& mr = bs.rates.mode[static_cast<std::size_t>(m)];
      const bool cooled = mr.net_cooling && mr.W > 0;
      nb.push_back(sc.fock_kind == "thermal" && cooled ? mr.nbar : 0.0);
    }
  }
  mb.rho0 = assemble_rho(sl, spin, thermal_fock_diag(sl, nb));
  return mb;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string config_hash(const ScenarioConfig& sc) {
  constexpr std::uint64_t offset = 1469598103934665603ull;
  constexpr std::uint64_t prime = 1099511628211ull;
  std::uint64_t h = offset;
  auto mix = [&h](const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= prime;
    }
  };
  mix(sc.config_text.data(), sc.config_text.size());
  for (const std::string& o : sc.overrides) {
    const unsigned char sep = 0x1f;
    mix(&sep, 1);
    mix(o.data(), o.size());
  }
  char b[40];
  std::snprintf(b, sizeof b, "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return b;
}

ScenarioConfig load_scenario(const std::string& path,
                             const std::vector<std::string>& overrides) {
  const std::string text = read_file(path);
  json doc = parse_doc(path, text);
  for (const std::string& kv : overrides) apply_set(doc, kv);
  return interpret(doc, path, text, overrides);
}

BuiltSystem build_system(const ScenarioConfig& sc) {
  BuiltSystem bs;
  bs.eq = solve_equilibrium(sc.chain);
  bs.modes = compute_modes(sc.chain, bs.eq);
  const int nm = static_cast<int>(bs.modes.omega.size());

  bs.rates_raw.mode.assign(static_cast<std::size_t>(nm), ModeRates{});
  bs.eta_tau.assign(static_cast<std::size_t>(nm), 0.0);
  if (sc.has_cooling) {
    const double m_tau =
        sc.chain.ions[static_cast<std::size_t>(sc.tau_pos[0])].mass_kg;
    const double k_tau = k_two_pi / sc.lambda_tau;
    CoolingLaser laser;
    laser.Omega_tau = sc.omega_tau;
    laser.Delta_tau = sc.delta_tau;
    laser.Gamma_tau = sc.gamma_tau;
    laser.coolant_indices = sc.tau_pos;
    for (int n = 0; n < nm; ++n)
      bs.eta_tau[static_cast<std::size_t>(n)] = lamb_dicke(
          k_tau, sc.tau_projection, m_tau,
          bs.modes.omega[static_cast<std::size_t>(n)]);
    laser.eta_tau = bs.eta_tau;
    bs.rates_raw = mode_cooling_rates(laser, bs.modes);
  }
  bs.rates = apply_anomalous_heating(bs.rates_raw, HeatingSpec{sc.gamma_ah});

  bs.eta_sigma.assign(static_cast<std::size_t>(nm), 0.0);
  if (!sc.sigma_pos.empty()) {
    const double m_sigma =
        sc.chain.ions[static_cast<std::size_t>(sc.sigma_pos[0])].mass_kg;
    const double k_sigma =
        sc.eta1_sigma /
        std::sqrt(k_hbar / (2.0 * m_sigma * bs.modes.omega[0]));
    for (int n = 0; n < nm; ++n)
      bs.eta_sigma[static_cast<std::size_t>(n)] = lamb_dicke(
          k_sigma, 1.0, m_sigma, bs.modes.omega[static_cast<std::size_t>(n)]);
  }

  bs.delta = sc.delta_all.empty() ? std::vector<double>(
                                        static_cast<std::size_t>(nm), 0.0)
                                  : sc.delta_all;

  if (!sc.retained_1based.empty()) {
    for (int r : sc.retained_1based) bs.retained.push_back(r - 1);
  } else {
    // Keep the modes the drive is near-resonant with: |delta_n| within a
    // factor 5 of the smallest detuning magnitude.
    double dmin = std::numeric_limits<double>::infinity();
    for (double d : bs.delta) dmin = std::min(dmin, std::abs(d));
    for (int n = 0; n < nm; ++n)
      if (std::abs(bs.delta[static_cast<std::size_t>(n)]) <=
          5.0 * dmin * (1.0 + 1e-12))
        bs.retained.push_back(n);
  }
  if (bs.retained.empty())
    throw NumericalError("no retained modes after truncation rule");

  if (sc.selected_mode_1based > 0) {
    bs.selected = sc.selected_mode_1based - 1;
    if (std::find(bs.retained.begin(), bs.retained.end(), bs.selected) ==
        bs.retained.end())
      fail("drive.selected_mode: mode " +
           std::to_string(sc.selected_mode_1based) + " is not retained");
  } else {
    bs.selected = bs.retained[0];
    for (int n : bs.retained)
      if (std::abs(bs.delta[static_cast<std::size_t>(n)]) <
          std::abs(bs.delta[static_cast<std::size_t>(bs.selected)]))
        bs.selected = n;
  }

  if (sc.has_drive) {
    if (sc.omega_sigma_explicit >= 0.0) {
      bs.Omega_sigma = sc.omega_sigma_explicit;
    } else {
      const ModeRates& mr =
          bs.rates.mode[static_cast<std::size_t>(bs.selected)];
      if (!(mr.W > 0))
        fail("drive.omega_sigma_rule: selected mode " +
             std::to_string(bs.selected + 1) +
             " is not net-cooled; the rule needs W > 0");
      bs.Omega_sigma = sc.w_over_eta_factor * mr.W /
                       bs.eta_sigma[static_cast<std::size_t>(bs.selected)];
    }
    bs.drive.Omega_sigma = bs.Omega_sigma;
    bs.drive.sigma_positions = sc.sigma_pos;
    bs.drive.phases = sc.phases;
    bs.drive.retained_modes = bs.retained;
    for (int n : bs.retained) {
      bs.drive.eta_sigma.push_back(
          bs.eta_sigma[static_cast<std::size_t>(n)]);
      bs.drive.delta.push_back(bs.delta[static_cast<std::size_t>(n)]);
    }
  }

  bs.cutoff.retained_modes = bs.retained;
  bs.cutoff.n_max = sc.n_max;
  return bs;
}

void run_modes(const RunContext& rc) {
  const BuiltSystem bs = build_system(rc.sc);
  const int nm = static_cast<int>(bs.modes.omega.size());
  const int ni = static_cast<int>(bs.modes.M.rows());
  std::vector<std::string> header{"mode", "omega_over_2pi_mhz"};
  for (int i = 0; i < ni; ++i) header.push_back("M_" + std::to_string(i + 1));
  std::vector<std::vector<double>> cols(header.size());
  for (int n = 0; n < nm; ++n) {
    cols[0].push_back(n + 1);
    cols[1].push_back(bs.modes.omega[static_cast<std::size_t>(n)] / k_mhz);
    for (int i = 0; i < ni; ++i)
      cols[static_cast<std::size_t>(2 + i)].push_back(bs.modes.M(i, n));
  }
  write_csv(rc.out_dir + "/modes.csv", header, cols);
  write_manifest(rc, "modes", {"modes.csv"});
}

void run_cooling(const RunContext& rc) {
  if (!rc.sc.has_cooling)
    fail("cooling command requires a cooling section");
  const BuiltSystem bs = build_system(rc.sc);
  const int nm = static_cast<int>(bs.modes.omega.size());
  const std::vector<std::string> header{
      "mode",     "omega_over_2pi_mhz", "re_gamma_minus_per_s",
      "re_gamma_plus_per_s", "W_per_s", "nbar",
      "lamb_shift_per_s", "delta_tilde_over_2pi_mhz", "R"};
  std::vector<std::vector<double>> cols(header.size());
  for (int n = 0; n < nm; ++n) {
    const ModeRates& mr = bs.rates.mode[static_cast<std::size_t>(n)];
    const double dt = shifted_detuning(mr, bs.delta[static_cast<std::size_t>(n)]);
    double R = std::numeric_limits<double>::quiet_NaN();
    try {
      R = coherence_ratio(mr, dt, RatioVariant::flipflop);
    } catch (const NumericalError&) {
    }
    cols[0].push_back(n + 1);
    cols[1].push_back(bs.modes.omega[static_cast<std::size_t>(n)] / k_mhz);
    cols[2].push_back(mr.gamma_minus.real());
    cols[3].push_back(mr.gamma_plus.real());
    cols[4].push_back(mr.W);
    cols[5].push_back(mr.nbar);
    cols[6].push_back(mr.lamb_shift);
    cols[7].push_back(dt / k_mhz);
    cols[8].push_back(R);
  }
  write_csv(rc.out_dir + "/cooling.csv", header, cols);
  write_manifest(rc, "cooling", {"cooling.csv"});
}

void run_evolve(const RunContext& rc) {
  const ScenarioConfig& sc = rc.sc;
  if (!(sc.t_final > 0))
    fail("evolve requires simulation.t_final_ms");
  if (sc.compare_effective) {
    if (sc.model != ModelKind::full)
      fail("simulation.compare_effective requires model.kind \"full\"");
    if (sc.noise != NoiseKind::none)
      fail("simulation.compare_effective requires noise.kind \"none\"");
  }
  const BuiltSystem bs = build_system(sc);
  ModelBundle mb = make_model(sc, bs);
  const SpaceLayout& sl = mb.gen.layout;

  std::vector<double> grid(static_cast<std::size_t>(sc.n_out));
  for (int i = 0; i < sc.n_out; ++i)
    grid[static_cast<std::size_t>(i)] =
        sc.t_final * static_cast<double>(i) / (sc.n_out - 1);

  ObservableSpec obs;
  std::string short_name;
  std::vector<cplx> target_spin;
  if (!sc.target.empty()) {
    short_name = target_short(sc.target);
    target_spin = named_target(sl, sc.target);
    obs.fidelity_targets.emplace_back(short_name, target_spin);
  }
  if (sc.model == ModelKind::ising) {
    CsrMat op = CsrMat::zero(sl.dim(), sl.dim());
    for (int q = 0; q < sl.n_spins; ++q) op = op.plus(sigma_x(sl, q));
    obs.expectations.emplace_back("sigma_x_mean",
                                  op.scaled(cplx(1.0 / sl.n_spins)));
  }
  const bool traj = sc.noise == NoiseKind::ou;
  const bool want_states =
      !traj && (sc.compare_effective ||
                (sc.has_window && !sc.target.empty()));
  obs.record_states = want_states;

  TimeSeries ts;
  if (traj) {
    OUNoise noise;
    noise.Gamma_d = sc.Gamma_d;
    noise.tau_c = sc.tau_c;
    noise.seed = rc.seed;
    ts = trajectory_average(mb.gen, noise, mb.rho0, sc.n_traj, grid,
                            sc.solver, obs);
  } else {
    ts = evolve(mb.gen, mb.rho0, grid, sc.solver, obs);
  }

  std::vector<double> td;
  double max_td = 0.0;
  bool has_td = false;
  if (sc.compare_effective) {
    const EffectiveSpinModel em =
        sw_flipflop_params(bs.drive, bs.rates, bs.modes);
    Generator geff = build_effective_liouvillian(em);
    const std::vector<cplx> spin = spin_ket(geff.layout, sc.spin_pattern);
    const DensityMatrix r0 =
        assemble_rho(geff.layout, spin, thermal_fock_diag(geff.layout, {}));
    ObservableSpec obs_eff;
    obs_eff.record_states = true;
    const TimeSeries tse = evolve(geff, r0, grid, sc.solver, obs_eff);
    td.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      td[i] = trace_distance(reduce_spins(sl, ts.states[i]), tse.states[i]);
      max_td = std::max(max_td, td[i]);
    }
    has_td = true;
  }

  // ---- timeseries.csv ----
  std::vector<std::string> header;
  std::vector<std::vector<double>> cols;
  header.push_back("t_s");
  cols.push_back(ts.t);
  for (int q = 0; q < sl.n_spins; ++q) {
    header.push_back("P_up_" + std::to_string(q + 1));
    cols.push_back(ts.p_up[static_cast<std::size_t>(q)]);
  }
  if (mb.has_fock) {
    for (int m = 0; m < sl.n_modes(); ++m) {
      header.push_back("n_mode_" +
                       std::to_string(sl.mode_labels[static_cast<std::size_t>(m)]));
      cols.push_back(ts.mode_occ[static_cast<std::size_t>(m)]);
    }
  }
  for (std::size_t k = 0; k < ts.fidelity_names.size(); ++k) {
    header.push_back("fidelity_" + ts.fidelity_names[k]);
    cols.push_back(ts.fidelity[k]);
    if (ts.n_traj > 1 && k < ts.fidelity_se.size()) {
      header.push_back("fidelity_" + ts.fidelity_names[k] + "_se");
      cols.push_back(ts.fidelity_se[k]);
    }
  }
  for (std::size_t k = 0; k < ts.expect_names.size(); ++k) {
    header.push_back(ts.expect_names[k]);
    cols.push_back(ts.expect[k]);
    if (ts.n_traj > 1 && k < ts.expect_se.size()) {
      header.push_back(ts.expect_names[k] + "_se");
      cols.push_back(ts.expect_se[k]);
    }
  }
  if (has_td) {
    header.push_back("trace_distance_eff");
    cols.push_back(td);
  }
  header.push_back("trace");
  cols.push_back(ts.trace);
  header.push_back("min_eig");
  cols.push_back(ts.min_eig);
  if (mb.has_fock) {
    header.push_back("leak");
    cols.push_back(ts.leak);
  }
  write_csv(rc.out_dir + "/timeseries.csv", header, cols);

  // ---- summary.json ----
  json summary;
  summary["model"] = model_name(sc.model);
  summary["t_final_s"] = sc.t_final;
  summary["n_out"] = sc.n_out;
  summary["n_traj"] = ts.n_traj;
  summary["omega_sigma_rad_per_s"] = bs.Omega_sigma;
  {
    json rm = json::array();
    for (int n : bs.retained) rm.push_back(n + 1);
    summary["retained_modes"] = rm;
  }
  json fin;
  fin["t_s"] = ts.t.back();
  fin["trace"] = ts.trace.back();
  fin["min_eig"] = ts.min_eig.back();
  if (mb.has_fock) fin["leak"] = ts.leak.back();
  {
    json pu = json::array();
    for (int q = 0; q < sl.n_spins; ++q)
      pu.push_back(ts.p_up[static_cast<std::size_t>(q)].back());
    fin["p_up"] = pu;
  }
  for (std::size_t k = 0; k < ts.fidelity_names.size(); ++k)
    fin["fidelity_" + ts.fidelity_names[k]] = ts.fidelity[k].back();
  for (std::size_t k = 0; k < ts.expect_names.size(); ++k)
    fin[ts.expect_names[k]] = ts.expect[k].back();
  summary["final"] = fin;
  if (has_td) summary["max_trace_distance_eff"] = max_td;

  if (sc.has_window && !sc.target.empty()) {
    const double eps = 1e-9 * sc.t_final;
    int i_lo = -1, i_hi = -1;
    for (int i = 0; i < sc.n_out; ++i) {
      const double t = grid[static_cast<std::size_t>(i)];
      if (t >= sc.window_a - eps && t <= sc.window_b + eps) {
        if (i_lo < 0) i_lo = i;
        i_hi = i;
      }
    }
    if (i_lo < 0) fail("simulation.window_ms: no output samples in window");
    const std::vector<double>& f = ts.fidelity[0];
    int k = i_lo;
    for (int i = i_lo; i <= i_hi; ++i)
      if (f[static_cast<std::size_t>(i)] > f[static_cast<std::size_t>(k)])
        k = i;
    const double grid_t = grid[static_cast<std::size_t>(k)];
    const double grid_f = f[static_cast<std::size_t>(k)];
    double t_pk = grid_t, f_pk = grid_f;
    if (want_states && !ts.states.empty()) {
      const int a = std::max(k - 1, 0);
      const int b = std::min(k + 1, sc.n_out - 1);
      const auto ref = refine_fidelity_max(
          mb.gen, ts.states[static_cast<std::size_t>(a)],
          grid[static_cast<std::size_t>(a)], grid[static_cast<std::size_t>(b)],
          target_spin, sc.solver);
      if (ref.second >= f_pk) {
        t_pk = ref.first;
        f_pk = ref.second;
      }
    }
    json peak;
    peak["target"] = short_name;
    peak["t_s"] = t_pk;
    peak["fidelity"] = f_pk;
    peak["one_minus_fidelity"] = 1.0 - f_pk;
    peak["grid_t_s"] = grid_t;
    peak["grid_fidelity"] = grid_f;
    peak["window_ms"] = json::array({sc.window_a * 1e3, sc.window_b * 1e3});
    summary["peak"] = peak;
  }
  summary["warnings"] = mb.warnings;
  write_text(rc.out_dir + "/summary.json", summary.dump(2) + "\n");

  write_manifest(rc, "evolve", {"timeseries.csv", "summary.json"});
}

void run_steady(const RunContext& rc) {
  const ScenarioConfig& sc = rc.sc;
  if (sc.noise == NoiseKind::ou)
    fail("steady: OU noise has no stationary generator; use noise.kind "
         "\"markovian\" or \"none\"");
  const BuiltSystem bs = build_system(sc);
  ModelBundle mb = make_model(sc, bs);
  const SteadyResult sr = steady_state(mb.gen, sc.solver);
  const SpaceLayout& sl = mb.gen.layout;
  SpaceLayout spin_only;
  spin_only.n_spins = sl.n_spins;

  json out;
  out["method"] = sr.method;
  out["degenerate"] = sr.degenerate;
  out["n_states"] = sr.states.size();
  out["slowest_rate_per_s"] = sr.slowest_rate;
  if (sr.slowest_rate > 0)
    out["t_ss_s"] = 3.0 / sr.slowest_rate;
  else
    out["t_ss_s"] = nullptr;
  json states = json::array();
  for (const DensityMatrix& st : sr.states) {
    const DensityMatrix red = sl.n_modes() > 0 ? reduce_spins(sl, st) : st;
    json je;
    if (sl.n_spins == 2) {
      json f;
      for (const char* name : {"psi_bell", "phi_minus", "phi_plus"})
        f[name] = fidelity(red, named_target(spin_only, name));
      je["fidelities"] = f;
    }
    json re = json::array(), im = json::array();
    for (int i = 0; i < red.n; ++i) {
      json rrow = json::array(), irow = json::array();
      for (int j = 0; j < red.n; ++j) {
        rrow.push_back(red(i, j).real());
        irow.push_back(red(i, j).imag());
      }
      re.push_back(rrow);
      im.push_back(irow);
    }
    je["matrix_re"] = re;
    je["matrix_im"] = im;
    states.push_back(je);
  }
  out["states"] = states;
  out["warnings"] = mb.warnings;
  write_text(rc.out_dir + "/steady.json", out.dump(2) + "\n");
  write_manifest(rc, "steady", {"steady.json"});
}

void run_sweep(const RunContext& rc, const std::string& param,
               const std::vector<double>& grid) {
  if (param.empty()) fail("sweep: --param is required");
  if (grid.empty()) fail("sweep: --grid must contain at least one value");
  if (!rc.sc.has_cooling) fail("sweep command requires a cooling section");

  json base = parse_doc(rc.sc.config_path, rc.sc.config_text);
  for (const std::string& kv : rc.sc.overrides) apply_set(base, kv);

  struct Row {
    double value, omega_mhz, W, nbar, dt_mhz, R;
    int mode;
  };
  std::vector<std::vector<Row>> results(grid.size());
  const int n_threads =
      std::max(1, std::min(rc.jobs, static_cast<int>(grid.size())));

  auto work = [&](int tid, std::exception_ptr& err) {
    try {
      for (std::size_t i = static_cast<std::size_t>(tid); i < grid.size();
           i += static_cast<std::size_t>(n_threads)) {
        json doc = base;
        set_path_value(doc, param, json(grid[i]));
        const ScenarioConfig s = interpret(doc, rc.sc.config_path,
                                           rc.sc.config_text,
                                           rc.sc.overrides);
        const BuiltSystem b = build_system(s);
        std::vector<Row>& rows = results[i];
        for (std::size_t n = 0; n < b.modes.omega.size(); ++n) {
          const ModeRates& mr = b.rates.mode[n];
          const double dt = shifted_detuning(mr, b.delta[n]);
          double R = std::numeric_limits<double>::quiet_NaN();
          try {
            R = coherence_ratio(mr, dt, RatioVariant::flipflop);
          } catch (const NumericalError&) {
          }
          rows.push_back(Row{grid[i], b.modes.omega[n] / k_mhz, mr.W, mr.nbar,
                             dt / k_mhz, R, static_cast<int>(n) + 1});
        }
      }
    } catch (...) {
      err = std::current_exception();
    }
  };

  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(n_threads));
  if (n_threads == 1) {
    work(0, errs[0]);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back(work, t, std::ref(errs[static_cast<std::size_t>(t)]));
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errs)
    if (e) std::rethrow_exception(e);

  std::ostringstream os;
  os << "param, value, mode, omega_over_2pi_mhz, W_per_s, nbar, "
        "delta_tilde_over_2pi_mhz, R\n";
  for (const std::vector<Row>& rows : results)
    for (const Row& r : rows)
      os << param << ", " << fmt_g(r.value) << ", " << r.mode << ", "
         << fmt_g(r.omega_mhz) << ", " << fmt_g(r.W) << ", " << fmt_g(r.nbar)
         << ", " << fmt_g(r.dt_mhz) << ", " << fmt_g(r.R) << "\n";
  write_text(rc.out_dir + "/sweep.csv", os.str());

  json extra;
  extra["param"] = param;
  extra["grid"] = grid;
  write_manifest(rc, "sweep", {"sweep.csv"}, &extra);
}

}  // namespace ionsim
