#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "ionsim/cooling.hpp"
#include "ionsim/crystal.hpp"
#include "ionsim/generator.hpp"

namespace ionsim {

// Raman drive on the sigma ions, tuned near the blue sidebands of the
// retained modes.  `delta` holds the bare detuning of each retained mode in
// the drive's rotating frame; Lamb shifts from the cooling rates are added
// where the theory calls for the shifted value.
struct RamanDrive {
  double Omega_sigma = 0.0;          // two-photon Rabi frequency, rad/s
  std::vector<int> sigma_positions;  // chain indices of the driven ions
  std::vector<double> phases;        // drive phase per driven ion, rad
  std::vector<int> retained_modes;   // mode indices kept in the description
  std::vector<double> eta_sigma;     // Lamb-Dicke factor per retained mode
  std::vector<double> delta;         // bare detuning per retained mode, rad/s
};

// Spin-only flip-flop model produced by the Schrieffer-Wolff elimination of
// the cooled phonons.  J is Hermitian; Gamma and GammaPrime are Hermitian and
// (up to round-off) positive semidefinite.
struct EffectiveSpinModel {
  Eigen::MatrixXcd J;           // exchange couplings, rad/s
  std::vector<double> B;        // per-ion ac-Stark field (summed over modes)
  Eigen::MatrixXd B_per_mode;   // B contributions, (ion, mode)
  Eigen::MatrixXcd Gamma;       // collective decay strengths
  Eigen::MatrixXcd GammaPrime;  // collective pumping strengths
  Eigen::MatrixXcd F;           // drive-sideband couplings F_in
  std::vector<double> delta_tilde;  // shifted detuning per retained mode
  std::vector<double> W;            // cooling rate per retained mode
  std::vector<double> nbar;         // steady occupation per retained mode
  std::vector<std::string> warnings;
};

struct CollectiveJumps {
  CsrMat lower;  // annihilates the parity-selected dark state
  CsrMat raise;
  double rate_lower = 0.0;  // prefactor already folded into the operators
  double rate_raise = 0.0;
};

// Driven Ising model: strong transverse drive converts the flip-flop exchange
// into sigma^x sigma^x couplings with collective sigma^x dephasing.
struct DrivenIsingModel {
  Eigen::MatrixXd J;   // Ising couplings, rad/s (zero diagonal)
  Eigen::MatrixXd G;   // collective dephasing strengths
  double Omega_d = 0.0;
  std::vector<double> delta_tilde;
  std::vector<double> W;
  std::vector<double> nbar;
  std::vector<std::string> warnings;
};

struct DressedNoise {
  double Omega_d_tilde = 0.0;  // residual coherent term, rad/s
  double Gamma_d_tilde = 0.0;  // residual dephasing rate, 1/s
  bool weak_driving_warning = false;
};

// Sideband couplings F_in = (i Omega_sigma/2) eta_n M_in e^{i phi_i},
// indexed (driven ion, retained mode).
Eigen::MatrixXcd drive_couplings(const RamanDrive& drive,
                                 const NormalModes& modes);

// Second-order elimination of the retained modes.  Requires W > 0 for every
// retained mode (the phonons must actually relax for the expansion to hold).
EffectiveSpinModel sw_flipflop_params(const RamanDrive& drive,
                                      const CoolingRates& rates,
                                      const NormalModes& modes);

// Spin-space generator: flip-flop Hamiltonian plus the collective dissipator
// in Lindblad form via eigendecomposition of the coefficient matrices.
// Eigenvalues below -1e-10 * max trigger an unphysical-model error; smaller
// negatives are clipped to zero.
Generator build_effective_liouvillian(const EffectiveSpinModel& model);

// Two-ion symmetric jump operators L_-/L_+ for geometric parity p.  Refuses
// configurations where the diagonal decay strengths differ.
CollectiveJumps collective_jump_operators(const EffectiveSpinModel& model,
                                          int parity);

DrivenIsingModel sw_ising_params(const RamanDrive& drive,
                                 const CoolingRates& rates,
                                 const NormalModes& modes, double Omega_d);

Generator build_ising_liouvillian(const DrivenIsingModel& model);

// Residual noise parameters after the continuous drive filters an OU field of
// strength Gamma_d and correlation time tau_c.
DressedNoise dressed_noise_params(double B_eff, double delta_tilde,
                                  double tau_c, double Gamma_d,
                                  double Omega_d);

// Appends the dressed residual dephasing channels (sigma^y and sigma^z on
// each spin at rate Gamma_d_tilde / 2) to a spin-only generator.
void add_dressed_dephasing(Generator& gen, double Gamma_d_tilde);

// Markovian limit of the dephasing noise: sigma^z channels at rate Gamma_d,
// so single-spin coherences decay at 2 * Gamma_d.
void add_markovian_dephasing(Generator& gen, double Gamma_d);

// OU noise Hamiltonian pattern: H_n = F(t)/2 * sum_i sigma_i^z registered as
// one stochastic source on the generator.
void add_ou_dephasing_pattern(Generator& gen);

} // namespace ionsim
