#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstring>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ionsim/constants.hpp"
#include "ionsim/dynamics.hpp"
#include "ionsim/effective.hpp"
#include "ionsim/errors.hpp"
#include "ionsim/hilbert.hpp"
#include "ionsim/superop.hpp"

using namespace ionsim;

namespace {

Generator flipflop_gen(double J) {
  SpaceLayout sl;
  sl.n_spins = 2;
  Generator gen;
  gen.layout = sl;
  gen.H = sigma_plus(sl, 0)
              .matmul(sigma_minus(sl, 1))
              .scaled(J)
              .plus(sigma_plus(sl, 1).matmul(sigma_minus(sl, 0)), J);
  gen.finalize();
  return gen;
}

// Damped driven mode: small enough for the dense matrix-exponential reference.
Generator damped_mode_gen() {
  SpaceLayout sl;
  sl.n_spins = 0;
  sl.fock_dims = {6};
  sl.mode_labels = {1};
  Generator gen;
  gen.layout = sl;
  const CsrMat b = annihilate(sl, 0);
  gen.H = number_op(sl, 0).scaled(2e4).plus(b.plus(b.dagger()), 5e3);
  gen.channels.push_back(Channel{b, 3e4});
  gen.finalize();
  return gen;
}

DensityMatrix pure_state(const std::vector<cplx>& psi) {
  const int d = static_cast<int>(psi.size());
  DensityMatrix rho = DensityMatrix::zero(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) rho(i, j) = psi[i] * std::conj(psi[j]);
  return rho;
}

double max_entry_diff(const DensityMatrix& a, const DensityMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i)
    m = std::max(m, std::abs(a.a[i] - b.a[i]));
  return m;
}

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("zero generator leaves the state untouched") {
  SpaceLayout sl;
  sl.n_spins = 1;
  Generator gen;
  gen.layout = sl;
  gen.H = CsrMat::zero(2, 2);
  gen.finalize();
  const DensityMatrix rho0 = pure_state(spin_ket(sl, "x"));
  SolverConfig cfg;
  const TimeSeries ts = evolve(gen, rho0, {0.0, 1e-3, 2e-3}, cfg);
  CHECK(ts.p_up[0][2] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ts.trace[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("coherent flip-flop exchange oscillates at cos^2(Jt)") {
  const double J = 1e4;
  const Generator gen = flipflop_gen(J);
  const DensityMatrix rho0 = pure_state(spin_ket(gen.layout, "ud"));
  std::vector<double> grid;
  for (int i = 0; i <= 8; ++i) grid.push_back(i * 2e-5);
  SolverConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  const TimeSeries ts = evolve(gen, rho0, grid, cfg);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double c = std::cos(J * grid[i]);
    CHECK(ts.p_up[0][i] == doctest::Approx(c * c).epsilon(1e-8).scale(1.0));
    CHECK(ts.p_up[1][i] ==
          doctest::Approx(1.0 - c * c).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("golden-section refinement locates the transfer maximum") {
  const double J = 1e4;
  const Generator gen = flipflop_gen(J);
  const DensityMatrix rho0 = pure_state(spin_ket(gen.layout, "ud"));
  SolverConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  // Full transfer |ud> -> |du> peaks at t = pi / (2J).
  const auto [t_star, f_star] = refine_fidelity_max(
      gen, rho0, 0.0, 2.5e-4, spin_ket(gen.layout, "du"), cfg);
  CHECK(t_star == doctest::Approx(k_pi / (2.0 * J)).epsilon(1e-3));
  CHECK(f_star == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("integration error tracks the requested tolerance") {
  Generator gen = damped_mode_gen();
  gen.leak_threshold = 1.0; // the initial state sits on the top level
  const Eigen::MatrixXcd S = assemble_superop(gen);
  DensityMatrix rho0 = DensityMatrix::zero(6);
  rho0(5, 5) = 1.0; // top level: decays through the whole ladder
  const double T = 2e-4;
  const DensityMatrix ref = expm_propagate(S, rho0, T);

  auto run = [&](double rel) {
    SolverConfig cfg;
    cfg.rel_tol = rel;
    cfg.abs_tol = rel * 1e-4;
    const TimeSeries ts =
        evolve(gen, rho0, {0.0, T}, cfg, [] {
          ObservableSpec o;
          o.record_states = true;
          return o;
        }());
    return max_entry_diff(ts.states.back(), ref);
  };
  const double err_loose = run(1e-4);
  const double err_tight = run(1e-10);
  CHECK(err_tight < err_loose);
  CHECK(err_tight <= 1e-8);
}

TEST_CASE("adaptive propagation matches the dense exponential on a "
          "spin-phonon model") {
  SpaceLayout sl;
  sl.n_spins = 1;
  sl.fock_dims = {4};
  sl.mode_labels = {1};
  Generator gen;
  gen.layout = sl;
  const CsrMat sp_b = sigma_plus(sl, 0).matmul(annihilate(sl, 0));
  gen.H = number_op(sl, 0)
              .scaled(k_two_pi * 0.3e6)
              .plus(sp_b, cplx(0.0, 2e4))
              .plus(sp_b.dagger(), cplx(0.0, -2e4));
  gen.channels.push_back(Channel{annihilate(sl, 0), 1e4});
  gen.channels.push_back(Channel{create(sl, 0), 4e3});
  gen.leak_threshold = 1.0; // the top level is populated by construction
  gen.finalize();

  const DensityMatrix rho0 =
      assemble_rho(sl, spin_ket(sl, "u"), thermal_fock_diag(sl, {0.4}));
  const double T = 1e-4;
  SolverConfig cfg;
  cfg.rel_tol = 1e-10;
  cfg.abs_tol = 1e-12;
  ObservableSpec obs;
  obs.record_states = true;
  Monitors mon;
  mon.enforce = false; // truncated thermal tail sits on the top level
  const TimeSeries ts = evolve(gen, rho0, {0.0, 0.5 * T, T}, cfg, obs, mon);
  const Eigen::MatrixXcd S = assemble_superop(gen);
  CHECK(max_entry_diff(ts.states[1], expm_propagate(S, rho0, 0.5 * T)) <= 1e-8);
  CHECK(max_entry_diff(ts.states[2], expm_propagate(S, rho0, T)) <= 1e-8);
}

TEST_CASE("matrix-free application agrees with the assembled superoperator "
          "on non-Hermitian input") {
  const Generator gen = damped_mode_gen();
  const int d = gen.dim();
  const Eigen::MatrixXcd S = assemble_superop(gen);

  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  // Arbitrary matrix, deliberately not Hermitian: the generator must act
  // linearly on the full matrix space, not just on physical states.
  std::vector<cplx> X(static_cast<std::size_t>(d) * d), dX(X.size());
  for (auto& v : X) v = cplx(nd(rng), nd(rng));

  Generator::Workspace ws;
  gen.apply(X.data(), dX.data(), ws);

  // Column-stacked reference: vec is column-major, our buffers row-major.
  Eigen::VectorXcd vx(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      vx[j * d + i] = X[static_cast<std::size_t>(i) * d + j];
  const Eigen::VectorXcd vy = S * vx;
  double max_diff = 0.0, max_ref = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      max_diff = std::max(
          max_diff,
          std::abs(dX[static_cast<std::size_t>(i) * d + j] - vy[j * d + i]));
      max_ref = std::max(max_ref, std::abs(vy[j * d + i]));
    }
  CHECK(max_diff <= 1e-11 * max_ref);
}

TEST_CASE("null-space steady state of a decaying spin") {
  SpaceLayout sl;
  sl.n_spins = 1;
  Generator gen;
  gen.layout = sl;
  const double B = 3e3, r = 2e3;
  gen.H = sigma_z(sl, 0).scaled(0.5 * B);
  gen.channels.push_back(Channel{sigma_minus(sl, 0), r});
  gen.finalize();

  const SteadyResult sr = steady_state(gen);
  CHECK(sr.method == "nullspace");
  CHECK_FALSE(sr.degenerate);
  REQUIRE(sr.states.size() == 1);
  // Everything decays into |down>; coherences relax at r/2, populations at r.
  CHECK(sr.states[0](0, 0).real() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(sr.slowest_rate == doctest::Approx(0.5 * r).epsilon(1e-6));

  SolverConfig cfg;
  const DensityMatrix late =
      evolve_to(gen, pure_state(spin_ket(sl, "u")), 0.0, 40.0 / r, cfg);
  CHECK(trace_distance(late, sr.states[0]) <= 1e-6);
}

TEST_CASE("generator without channels reports a degenerate null space") {
  const Generator gen = flipflop_gen(1e4);
  const SteadyResult sr = steady_state(gen);
  CHECK(sr.degenerate);
  CHECK(sr.states.size() >= 2);
}

TEST_CASE("physicality monitors abort on a bad state") {
  const Generator gen = flipflop_gen(1e4);
  DensityMatrix rho0 = pure_state(spin_ket(gen.layout, "ud"));
  for (auto& v : rho0.a) v *= 0.9; // trace 0.9 violates |tr - 1| < 1e-8
  SolverConfig cfg;
  CHECK_THROWS_AS((void)evolve(gen, rho0, {0.0, 1e-5}, cfg), NumericalError);
}

TEST_CASE("stationary OU samples have the advertised moments") {
  OUNoise noise;
  noise.Gamma_d = 2e3;
  noise.tau_c = 1e-5;
  noise.seed = 99;
  const double dt = noise.tau_c / 10.0;
  const std::size_t n = 100000;
  const std::vector<double> f = ou_sample(noise, dt, n);
  REQUIRE(f.size() == n);

  const double var_expect = 2.0 * noise.Gamma_d / noise.tau_c; // 4e8
  const double mean = std::accumulate(f.begin(), f.end(), 0.0) / double(n);
  double var = 0.0, acorr = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= double(n - 1);
  for (std::size_t i = 0; i + 10 < n; ++i)
    acorr += (f[i] - mean) * (f[i + 10] - mean);
  acorr /= (double(n - 10) * var);

  CHECK(std::abs(mean) <= 0.02 * std::sqrt(var_expect));
  CHECK(var == doctest::Approx(var_expect).epsilon(0.05));
  CHECK(std::abs(acorr - std::exp(-1.0)) <= 0.03);

  // Deterministic substreams.
  CHECK(ou_sample(noise, dt, 100) == ou_sample(noise, dt, 100));
  CHECK(ou_sample(noise, dt, 100, 1) != ou_sample(noise, dt, 100, 0));

  CHECK_THROWS_AS((void)ou_sample(noise, 0.0, 10), ConfigError);
  OUNoise bad = noise;
  bad.tau_c = 0.0;
  CHECK_THROWS_AS((void)ou_sample(bad, dt, 10), ConfigError);
  bad = noise;
  bad.Gamma_d = -1.0;
  CHECK_THROWS_AS((void)ou_sample(bad, dt, 10), ConfigError);
}

TEST_CASE("trajectory-averaged dephasing reproduces the OU coherence decay") {
  SpaceLayout sl;
  sl.n_spins = 1;
  Generator gen;
  gen.layout = sl;
  gen.H = CsrMat::zero(2, 2);
  add_ou_dephasing_pattern(gen);
  gen.finalize();

  OUNoise noise;
  noise.Gamma_d = 2e3;
  noise.tau_c = 1e-5;
  noise.seed = 4242;

  const DensityMatrix rho0 = pure_state(spin_ket(sl, "x"));
  ObservableSpec obs;
  obs.expectations.emplace_back("sx", sigma_x(sl, 0));
  const std::vector<double> grid = {0.0, 5e-5, 1e-4, 1.5e-4, 2e-4};
  SolverConfig cfg;
  cfg.rel_tol = 1e-8;
  cfg.abs_tol = 1e-10;

  const TimeSeries ts = trajectory_average(gen, noise, rho0, 400, grid, cfg, obs);
  CHECK(ts.n_traj == 400);
  REQUIRE(ts.expect.size() == 1);
  REQUIRE(ts.expect_se.size() == 1);

  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double t = grid[i];
    // <sigma_x>(t) for a frozen-in-steps OU phase converges to the exact
    // filtered-noise expression for macro-steps << tau_c.
    const double expect = std::exp(-2.0 * noise.Gamma_d * t +
                                   2.0 * noise.Gamma_d * noise.tau_c *
                                       (1.0 - std::exp(-t / noise.tau_c)));
    CHECK(ts.expect[0][i] == doctest::Approx(expect).epsilon(0.10));
    if (i > 0) CHECK(ts.expect_se[0][i] > 0.0);
  }
  CHECK(ts.expect[0][0] == doctest::Approx(1.0).epsilon(1e-12));

  // Fixed seed means bitwise-identical reruns.
  const TimeSeries ts2 =
      trajectory_average(gen, noise, rho0, 400, grid, cfg, obs);
  CHECK(std::memcmp(ts.expect[0].data(), ts2.expect[0].data(),
                    ts.expect[0].size() * sizeof(double)) == 0);

  // Noise-bearing generators cannot go through the deterministic entry point.
  CHECK_THROWS_AS((void)evolve(gen, rho0, grid, cfg), NumericalError);
  CHECK_THROWS_AS((void)trajectory_average(gen, noise, rho0, 1, grid, cfg),
                  ConfigError);
  OUNoise bad = noise;
  bad.tau_c = -1.0;
  CHECK_THROWS_AS((void)trajectory_average(gen, bad, rho0, 4, grid, cfg),
                  ConfigError);
  const Generator plain = flipflop_gen(1e4);
  CHECK_THROWS_AS(
      (void)trajectory_average(plain, noise, rho0, 4, grid, cfg),
      ConfigError);
}

TEST_CASE("fidelity and trace distance basics") {
  SpaceLayout sl;
  sl.n_spins = 2;
  const auto bell = named_target(sl, "phi_minus");
  const auto orth = named_target(sl, "phi_plus");
  const DensityMatrix rho = pure_state(bell);
  CHECK(fidelity(rho, bell) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fidelity(rho, orth) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(trace_distance(rho, rho) == doctest::Approx(0.0).scale(1.0));
  CHECK(trace_distance(rho, pure_state(orth)) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

} // TEST_SUITE
