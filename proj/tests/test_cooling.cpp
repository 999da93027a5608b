#include "doctest.h"

#include <cmath>
#include <complex>
#include <vector>

#include "ionsim/constants.hpp"
#include "ionsim/cooling.hpp"
#include "ionsim/crystal.hpp"
#include "ionsim/errors.hpp"

using namespace ionsim;
using cplx = std::complex<double>;

namespace {

struct Setup {
  IonChain chain;
  NormalModes modes;
  CoolingLaser laser;
};

Setup make_setup(double omega_over_gamma) {
  Setup s;
  for (int i = 0; i < 3; ++i) {
    IonSpecies sp;
    sp.mass_kg = (i == 1 ? 24 : 25) * k_amu;
    sp.label = i == 1 ? "mg24" : "mg25";
    sp.role = i == 1 ? IonSpecies::Role::tau : IonSpecies::Role::sigma;
    s.chain.ions.push_back(sp);
  }
  s.chain.omega_z = k_two_pi * 4.1e6;
  s.chain.reference_mass_kg = 25 * k_amu;
  s.modes = compute_modes(s.chain, solve_equilibrium(s.chain));

  s.laser.Gamma_tau = k_two_pi * 41.4e6;
  s.laser.Delta_tau = -0.5 * s.laser.Gamma_tau;
  s.laser.Omega_tau = omega_over_gamma * s.laser.Gamma_tau;
  const double k_tau = k_two_pi / 280.3e-9;
  for (double w : s.modes.omega)
    s.laser.eta_tau.push_back(lamb_dicke(k_tau, 1.0, 24 * k_amu, w));
  s.laser.coolant_indices = {1};
  return s;
}

} // namespace

TEST_SUITE("cooling") {

TEST_CASE("per-mode rates at the working point") {
  const Setup s = make_setup(0.15);
  const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
  REQUIRE(r.mode.size() == 3);

  CHECK(r.mode[0].W == doctest::Approx(4794.31876928).epsilon(1e-9));
  CHECK(r.mode[2].W == doctest::Approx(10024.9868524).epsilon(1e-9));
  // The coolant sits on the node of the stretch mode: its amplitude is pure
  // round-off, so W collapses to a denormal-scale residue while the limiting
  // occupation Re(gamma_plus)/W stays finite and well defined.
  CHECK(std::abs(r.mode[1].W) <= 1e-20);
  CHECK(r.mode[1].nbar == doctest::Approx(1.04322318771).epsilon(1e-9));

  CHECK(r.mode[0].nbar == doctest::Approx(2.05744808834).epsilon(1e-9));
  CHECK(r.mode[2].nbar == doctest::Approx(0.654796974252).epsilon(1e-9));
  CHECK(r.mode[2].lamb_shift == doctest::Approx(-18305.4838166).epsilon(1e-8));
  CHECK(r.mode[0].net_cooling);
  CHECK(r.mode[2].net_cooling);

  // Independent recomputation of the mode-3 complex rates from the
  // single-coolant formula.
  const double g = 0.5 * s.laser.Omega_tau * s.laser.eta_tau[2] * s.modes.M(1, 2);
  const cplx dm(0.5 * s.laser.Gamma_tau,
                -s.laser.Delta_tau - s.modes.omega[2]);
  const cplx dp(0.5 * s.laser.Gamma_tau,
                -s.laser.Delta_tau + s.modes.omega[2]);
  CHECK(std::abs(r.mode[2].gamma_minus - g * g / dm) <=
        1e-12 * std::abs(r.mode[2].gamma_minus));
  CHECK(std::abs(r.mode[2].gamma_plus - g * g / dp) <=
        1e-12 * std::abs(r.mode[2].gamma_plus));
  CHECK(r.mode[2].W ==
        doctest::Approx((g * g / dm - g * g / dp).real()).epsilon(1e-12));
}

TEST_CASE("steady occupation is independent of the cooling drive strength") {
  double ref = 0.0;
  for (double x : {0.2, 0.7, 1.3, 2.0}) {
    const Setup s = make_setup(x);
    const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
    if (ref == 0.0)
      ref = r.mode[2].nbar;
    else
      CHECK(std::abs(r.mode[2].nbar - ref) <= 1e-12 * ref);
  }
  CHECK(std::abs(ref - 0.65) <= 0.01);
}

TEST_CASE("half-linewidth detuning closed form at 10.1 MHz") {
  // Single coolant ion whose only mode sits exactly at 10.1 MHz: nbar
  // depends only on Gamma, Delta, and omega.
  IonChain c;
  IonSpecies sp;
  sp.mass_kg = 24 * k_amu;
  sp.label = "mg24";
  sp.role = IonSpecies::Role::tau;
  c.ions.push_back(sp);
  c.omega_z = k_two_pi * 10.1e6;
  c.reference_mass_kg = 24 * k_amu;
  const auto modes = compute_modes(c, solve_equilibrium(c));

  CoolingLaser l;
  l.Gamma_tau = k_two_pi * 41.4e6;
  l.Delta_tau = -0.5 * l.Gamma_tau;
  l.Omega_tau = 0.3 * l.Gamma_tau;
  l.eta_tau = {0.11};
  l.coolant_indices = {0};
  const CoolingRates r = mode_cooling_rates(l, modes);
  CHECK(r.mode[0].nbar == doctest::Approx(0.6467331515760271).epsilon(1e-12));

  // Against the analytic sideband expression
  //   nbar = [(Gamma/2)^2 + (Delta - omega)^2] / [4 omega (-Delta) ... ]
  // evaluated directly from the Lorentzian weights.
  const double G2 = 0.5 * l.Gamma_tau;
  const double w = modes.omega[0];
  const double lm = 1.0 / (G2 * G2 + (l.Delta_tau + w) * (l.Delta_tau + w));
  const double lp = 1.0 / (G2 * G2 + (l.Delta_tau - w) * (l.Delta_tau - w));
  CHECK(r.mode[0].nbar == doctest::Approx(lp / (lm - lp)).epsilon(1e-12));
}

TEST_CASE("strong drive endpoint") {
  const Setup s = make_setup(2.0);
  const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
  CHECK(r.mode[2].W == doctest::Approx(1782219.8848763348).epsilon(1e-9));
  CHECK(r.mode[2].lamb_shift ==
        doctest::Approx(-3254308.234065178).epsilon(1e-9));
  CHECK(r.mode[2].nbar == doctest::Approx(0.654796974252).epsilon(1e-9));
}

TEST_CASE("anomalous heating shifts gamma_plus by Gamma_ah/2") {
  const Setup s = make_setup(0.15);
  const CoolingRates raw = mode_cooling_rates(s.laser, s.modes);
  const CoolingRates heated = apply_anomalous_heating(raw, HeatingSpec{100.0});

  for (int n = 0; n < 3; ++n) {
    CHECK(heated.mode[n].gamma_plus.real() ==
          doctest::Approx(raw.mode[n].gamma_plus.real() + 50.0).epsilon(1e-12));
    CHECK(heated.mode[n].gamma_plus.imag() == raw.mode[n].gamma_plus.imag());
    CHECK(heated.mode[n].gamma_minus == raw.mode[n].gamma_minus);
    CHECK(heated.mode[n].lamb_shift ==
          doctest::Approx(raw.mode[n].lamb_shift).epsilon(1e-12));
  }
  CHECK(heated.mode[2].W == doctest::Approx(9974.9868524).epsilon(1e-8));
  CHECK(heated.mode[2].nbar == doctest::Approx(0.66309171).epsilon(1e-7));

  // Heating with the cooling laser off: net heating, no steady occupation.
  Setup off = make_setup(0.0);
  const CoolingRates r0 = mode_cooling_rates(off.laser, off.modes);
  const CoolingRates h0 = apply_anomalous_heating(r0, HeatingSpec{100.0});
  CHECK(h0.mode[2].W == doctest::Approx(-50.0).epsilon(1e-12));
  CHECK_FALSE(h0.mode[2].net_cooling);
  CHECK(std::isnan(h0.mode[2].nbar));
}

TEST_CASE("shifted detunings at the working point") {
  const Setup s = make_setup(0.15);
  const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
  const double d1 = shifted_detuning(r.mode[0], -k_two_pi * 6.2e6);
  const double d2 = shifted_detuning(r.mode[1], -k_two_pi * 3.2e6);
  const double d3 = shifted_detuning(r.mode[2], k_two_pi * 0.3e6);
  CHECK(d1 / (k_two_pi * 1e6) == doctest::Approx(-6.20375072257).epsilon(1e-9));
  CHECK(d2 / (k_two_pi * 1e6) == doctest::Approx(-3.2).epsilon(1e-12));
  CHECK(d3 / (k_two_pi * 1e6) ==
        doctest::Approx(0.297086591765).epsilon(1e-9));
}

TEST_CASE("coherence ratio endpoints and variants") {
  {
    const Setup s = make_setup(0.15);
    const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
    const double dt = shifted_detuning(r.mode[2], k_two_pi * 0.3e6);
    const double R = coherence_ratio(r.mode[2], dt, RatioVariant::flipflop);
    CHECK(R == doctest::Approx(8.88721342914e-3).epsilon(1e-9));
    const double Ri = coherence_ratio(r.mode[2], dt, RatioVariant::ising);
    CHECK(Ri == doctest::Approx(R * (r.mode[2].nbar + 0.5) /
                                (r.mode[2].nbar + 1.0))
                    .epsilon(1e-12));
  }
  {
    const Setup s = make_setup(2.0);
    const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
    const double dt = shifted_detuning(r.mode[2], k_two_pi * 0.3e6);
    CHECK(coherence_ratio(r.mode[2], dt, RatioVariant::flipflop) ==
          doctest::Approx(2.15372723043).epsilon(1e-9));
  }
}

TEST_CASE("coherence ratio rejects uncooled or resonant modes") {
  // Laser off: W = 0 exactly, no relaxation, the ratio is undefined.
  const Setup off = make_setup(0.0);
  const CoolingRates r0 = mode_cooling_rates(off.laser, off.modes);
  CHECK_THROWS_AS(
      (void)coherence_ratio(r0.mode[2], 1e5, RatioVariant::flipflop),
      NumericalError);

  const Setup s = make_setup(0.15);
  const CoolingRates r = mode_cooling_rates(s.laser, s.modes);
  // delta_tilde = 0: resonant drive, the ratio diverges.
  CHECK_THROWS_AS(
      (void)coherence_ratio(r.mode[2], 0.0, RatioVariant::flipflop),
      NumericalError);
}

} // TEST_SUITE
