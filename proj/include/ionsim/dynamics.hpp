#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ionsim/generator.hpp"

namespace ionsim {

struct SolverConfig {
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;
  double max_step = 0.0; // 0 = unlimited
};

// Additional named observables evaluated at every output time.
struct ObservableSpec {
  // Pure spin-space targets; for models with Fock factors the state is
  // reduced to the spin factor before the overlap |<psi|rho|psi>| is taken.
  std::vector<std::pair<std::string, std::vector<cplx>>> fidelity_targets;
  // Expectation values Re tr(Op rho) of full-space operators.
  std::vector<std::pair<std::string, CsrMat>> expectations;
  // Keep a copy of the state at every grid point (evolve only).
  bool record_states = false;
};

struct TimeSeries {
  std::vector<double> t;
  std::vector<std::vector<double>> p_up;     // [qubit][time]
  std::vector<std::vector<double>> mode_occ; // [retained mode][time]
  std::vector<std::string> fidelity_names;
  std::vector<std::vector<double>> fidelity; // [target][time]
  std::vector<std::string> expect_names;
  std::vector<std::vector<double>> expect;   // [observable][time]
  std::vector<double> trace;
  std::vector<double> min_eig;
  std::vector<double> leak;
  // Standard errors (filled by trajectory_average, empty otherwise).
  std::vector<std::vector<double>> p_up_se;
  std::vector<std::vector<double>> fidelity_se;
  std::vector<std::vector<double>> expect_se;
  int n_traj = 1;
  std::vector<DensityMatrix> states; // only if ObservableSpec::record_states
};

// Physicality thresholds monitored at every output point; violations abort
// the integration with diagnostics.
struct Monitors {
  double trace_tol = 1e-8;
  double min_eig_tol = -1e-8;
  bool enforce = true;
};

// Adaptive Dormand-Prince 5(4) propagation of rho through the output grid.
// grid times must be non-negative and strictly increasing; rho0 is the state
// at grid.front() (use t=0 as the first entry for a fresh evolution).
TimeSeries evolve(const Generator& gen, const DensityMatrix& rho0,
                  const std::vector<double>& grid, const SolverConfig& cfg,
                  const ObservableSpec& obs = {}, const Monitors& mon = {});

// Propagate without observables: returns rho(t1) starting from rho(t0)=rho0.
// Optional piecewise-constant noise values (one per generator noise pattern)
// are held fixed over [t0, t1].
DensityMatrix evolve_to(const Generator& gen, const DensityMatrix& rho0,
                        double t0, double t1, const SolverConfig& cfg,
                        const double* noise = nullptr);

struct SteadyResult {
  std::vector<DensityMatrix> states; // trace-normalized basis (size 1 unless
                                     // the null space is degenerate)
  bool degenerate = false;
  double slowest_rate = 0.0; // slowest nonzero relaxation rate (1/s); 0 if
                             // not resolved by the method used
  std::string method;        // "nullspace" or "longtime"
};

// Spin-only generators with dim <= 16 use the assembled superoperator's null
// space; otherwise long-time evolution from the maximally mixed state with
// the convergence check |L(rho)|_tr <= 1e-10 * gen.scale().
SteadyResult steady_state(const Generator& gen, const SolverConfig& cfg = {});

double fidelity(const DensityMatrix& rho, const std::vector<cplx>& psi);
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

struct OUNoise {
  double Gamma_d = 0.0;      // Markovian-limit dephasing rate (rad/s)
  double tau_c = 0.0;        // correlation time (s)
  std::uint64_t seed = 12345;
};

// Exact-discretization stationary Ornstein-Uhlenbeck samples: stationary
// variance 2 Gamma_d / tau_c, autocorrelation exp(-|s|/tau_c).  `stream`
// selects an independent deterministic substream of the seed.
std::vector<double> ou_sample(const OUNoise& noise, double dt,
                              std::size_t n_steps, std::uint64_t stream = 0);

// Ensemble average over OU-noise trajectories: each generator noise pattern
// gets an independent OU process; macro-steps are at most tau_c/10.  Fills
// mean observables and their standard errors.
TimeSeries trajectory_average(const Generator& gen, const OUNoise& noise,
                              const DensityMatrix& rho0, int n_traj,
                              const std::vector<double>& grid,
                              const SolverConfig& cfg,
                              const ObservableSpec& obs = {},
                              const Monitors& mon = {});

// Golden-section maximization of t -> fidelity(reduce(rho(t)), target) over
// [t_a, t_b], starting from the cached state rho_at_a = rho(t_a).
std::pair<double, double> refine_fidelity_max(
    const Generator& gen, const DensityMatrix& rho_at_a, double t_a,
    double t_b, const std::vector<cplx>& target_spin, const SolverConfig& cfg);

} // namespace ionsim
