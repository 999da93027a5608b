#pragma once

#include <complex>
#include <vector>

#include "ionsim/crystal.hpp"

namespace ionsim {

struct CoolingLaser {
  double Omega_tau = 0.0;  // standing-wave Rabi frequency (rad/s)
  double Delta_tau = 0.0;  // detuning (rad/s, signed)
  double Gamma_tau = 0.0;  // atomic linewidth (rad/s)
  std::vector<double> eta_tau;       // per-mode Lamb-Dicke parameters
  std::vector<int> coolant_indices;  // chain positions of the coolant ions
};

struct HeatingSpec {
  double Gamma_ah = 0.0; // anomalous heating rate, phonons per second
};

struct ModeRates {
  std::complex<double> gamma_minus{0.0, 0.0}; // cooling rate (rad/s)
  std::complex<double> gamma_plus{0.0, 0.0};  // heating rate (rad/s)
  double W = 0.0;          // net cooling rate Re{gamma_minus - gamma_plus}
  double nbar = 0.0;       // steady occupation Re(gamma_plus)/W (if cooling)
  double lamb_shift = 0.0; // Im{gamma_plus - conj(gamma_minus)}
  bool net_cooling = false;
};

struct CoolingRates {
  std::vector<ModeRates> mode;
};

// Per-mode complex rates
//   gamma_minus,n = sum_l (Omega_tau/2 * eta_tau,n * M_ln)^2
//                    / (Gamma_tau/2 + i(-Delta_tau - omega_n))
//   gamma_plus,n  = same with +omega_n in the denominator,
// summed over the coolant ions l.  The pairing makes Delta_tau = -omega_n the
// cooling resonance, so red detuning cools.
CoolingRates mode_cooling_rates(const CoolingLaser& laser,
                                const NormalModes& modes);

// gamma_plus,n += Gamma_ah/2 (real), so that without cooling the phonon
// number grows at exactly Gamma_ah phonons/s; W and nbar are recomputed.
CoolingRates apply_anomalous_heating(const CoolingRates& rates,
                                     const HeatingSpec& heating);

// delta_tilde = delta + Im{gamma_plus - conj(gamma_minus)}
double shifted_detuning(const ModeRates& mode, double delta_n);

enum class RatioVariant { flipflop, ising };

// W (nbar + 1) / |delta_tilde|  (flipflop)   or   W (nbar + 1/2) / |dt| (ising)
double coherence_ratio(const ModeRates& mode, double delta_tilde,
                       RatioVariant variant);

} // namespace ionsim
