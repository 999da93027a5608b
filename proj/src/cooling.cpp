#include "ionsim/cooling.hpp"

#include <cmath>
#include <limits>

#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

void refresh_derived(ModeRates& m) {
  m.W = m.gamma_minus.real() - m.gamma_plus.real();
  m.net_cooling = m.W > 0.0;
  m.nbar = m.net_cooling ? m.gamma_plus.real() / m.W
                         : std::numeric_limits<double>::quiet_NaN();
  m.lamb_shift = m.gamma_plus.imag() + m.gamma_minus.imag();
}

} // namespace

CoolingRates mode_cooling_rates(const CoolingLaser& laser,
                                const NormalModes& modes) {
  const int n_modes = static_cast<int>(modes.omega.size());
  if (static_cast<int>(laser.eta_tau.size()) != n_modes)
    throw ConfigError("mode_cooling_rates: eta_tau needs one entry per mode");
  if (!(laser.Gamma_tau > 0))
    throw ConfigError("mode_cooling_rates: Gamma_tau must be positive");
  for (int l : laser.coolant_indices)
    if (l < 0 || l >= modes.M.rows())
      throw ConfigError("mode_cooling_rates: coolant index out of range");

  CoolingRates out;
  out.mode.resize(static_cast<std::size_t>(n_modes));
  for (int n = 0; n < n_modes; ++n) {
    ModeRates& m = out.mode[static_cast<std::size_t>(n)];
    const double wn = modes.omega[static_cast<std::size_t>(n)];
    const std::complex<double> den_minus(0.5 * laser.Gamma_tau,
                                         -laser.Delta_tau - wn);
    const std::complex<double> den_plus(0.5 * laser.Gamma_tau,
                                        -laser.Delta_tau + wn);
    std::complex<double> gm(0.0), gp(0.0);
    for (int l : laser.coolant_indices) {
      const double g = 0.5 * laser.Omega_tau *
                       laser.eta_tau[static_cast<std::size_t>(n)] *
                       modes.M(l, n);
      gm += g * g / den_minus;
      gp += g * g / den_plus;
    }
    m.gamma_minus = gm;
    m.gamma_plus = gp;
    refresh_derived(m);
  }
  return out;
}

CoolingRates apply_anomalous_heating(const CoolingRates& rates,
                                     const HeatingSpec& heating) {
  if (heating.Gamma_ah < 0)
    throw ConfigError("anomalous heating rate must be non-negative");
  CoolingRates out = rates;
  for (ModeRates& m : out.mode) {
    m.gamma_plus += 0.5 * heating.Gamma_ah;
    refresh_derived(m);
  }
  return out;
}

double shifted_detuning(const ModeRates& mode, double delta_n) {
  return delta_n + mode.lamb_shift;
}

double coherence_ratio(const ModeRates& mode, double delta_tilde,
                       RatioVariant variant) {
  if (!(mode.W > 0))
    throw NumericalError("coherence_ratio: mode is not net-cooled (W <= 0)");
  if (delta_tilde == 0.0)
    throw NumericalError("coherence_ratio: delta_tilde is zero (resonant "
                         "configuration outside validity)");
  const double occ =
      variant == RatioVariant::flipflop ? mode.nbar + 1.0 : mode.nbar + 0.5;
  return mode.W * occ / std::abs(delta_tilde);
}

} // namespace ionsim
