#include "ionsim/fullmodel.hpp"

#include <cmath>
#include <sstream>

#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

void validate_cutoff(const FockCutoff& cutoff, const NormalModes& modes) {
  if (cutoff.retained_modes.empty())
    throw ConfigError("cutoff: no retained modes");
  if (cutoff.n_max < 1) throw ConfigError("cutoff: n_max must be >= 1");
  for (int m : cutoff.retained_modes)
    if (m < 0 || m >= static_cast<int>(modes.omega.size()))
      throw ConfigError("cutoff: retained mode index out of range");
}

} // namespace

CsrMat build_hamiltonian_rf(const SpaceLayout& sl, const RamanDrive& drive,
                            const NormalModes& modes,
                            const std::vector<double>& mode_detunings,
                            std::vector<std::string>* warnings) {
  const int ns = static_cast<int>(drive.sigma_positions.size());
  const int nm = static_cast<int>(drive.retained_modes.size());
  if (sl.n_spins != ns || sl.n_modes() != nm)
    throw ConfigError("layout does not match drive geometry");
  if (static_cast<int>(mode_detunings.size()) != nm)
    throw ConfigError("one detuning per retained mode required");

  CsrMat H = CsrMat::zero(sl.dim(), sl.dim());
  for (int k = 0; k < nm; ++k)
    if (mode_detunings[static_cast<std::size_t>(k)] != 0.0)
      H = H.plus(number_op(sl, k), mode_detunings[static_cast<std::size_t>(k)]);

  if (drive.Omega_sigma != 0.0) {
    const Eigen::MatrixXcd F = drive_couplings(drive, modes);
    for (int i = 0; i < ns; ++i) {
      const CsrMat sp = sigma_plus(sl, i);
      for (int k = 0; k < nm; ++k) {
        if (F(i, k) == cplx(0.0)) continue;
        const CsrMat spb = sp.matmul(annihilate(sl, k));
        H = H.plus(spb, F(i, k));
        H = H.plus(spb.dagger(), std::conj(F(i, k)));
        const double dk = std::abs(mode_detunings[static_cast<std::size_t>(k)]);
        if (warnings && std::abs(F(i, k)) >= 0.1 * dk) {
          std::ostringstream os;
          os << "strong sideband coupling: |F| = " << std::abs(F(i, k))
             << " for ion " << drive.sigma_positions[static_cast<std::size_t>(i)] + 1
             << ", mode " << drive.retained_modes[static_cast<std::size_t>(k)] + 1
             << " is not small against |detuning| = " << dk
             << "; perturbative picture unreliable";
          warnings->push_back(os.str());
        }
      }
    }
  }
  return H;
}

std::vector<Channel> build_dissipator(const SpaceLayout& sl,
                                      const CoolingRates& rates,
                                      const HeatingSpec& heating,
                                      const FockCutoff& cutoff) {
  if (sl.n_modes() != static_cast<int>(cutoff.retained_modes.size()))
    throw ConfigError("layout does not match cutoff");
  if (heating.Gamma_ah < 0)
    throw ConfigError("anomalous heating rate must be >= 0");
  std::vector<Channel> out;
  for (int k = 0; k < sl.n_modes(); ++k) {
    const int n = cutoff.retained_modes[static_cast<std::size_t>(k)];
    if (n < 0 || n >= static_cast<int>(rates.mode.size()))
      throw ConfigError("cutoff: retained mode has no cooling rates");
    const ModeRates& mr = rates.mode[static_cast<std::size_t>(n)];
    const double down = 2.0 * mr.gamma_minus.real();
    const double up = 2.0 * mr.gamma_plus.real() + heating.Gamma_ah;
    if (down < 0 || up < 0) {
      std::ostringstream os;
      os << "unphysical cooling rates for mode " << n + 1 << ": ("
         << down << ", " << up << ")";
      throw NumericalError(os.str());
    }
    if (down != 0.0) out.push_back(Channel{annihilate(sl, k), down});
    if (up != 0.0) out.push_back(Channel{create(sl, k), up});
  }
  return out;
}

Generator build_full_generator(const RamanDrive& drive,
                               const CoolingRates& rates,
                               const HeatingSpec& heating,
                               const NormalModes& modes,
                               const FockCutoff& cutoff) {
  validate_cutoff(cutoff, modes);
  if (drive.retained_modes != cutoff.retained_modes)
    throw ConfigError("drive and cutoff must retain the same modes");

  SpaceLayout sl;
  sl.n_spins = static_cast<int>(drive.sigma_positions.size());
  sl.fock_dims.assign(cutoff.retained_modes.size(), cutoff.n_max + 1);
  for (int n : cutoff.retained_modes) sl.mode_labels.push_back(n + 1);

  // The dissipator keeps the real parts of the Lorentzian rates; their
  // imaginary parts shift the mode frequencies, so the Hamiltonian gets the
  // shifted detunings.
  std::vector<double> shifted(cutoff.retained_modes.size());
  for (std::size_t k = 0; k < cutoff.retained_modes.size(); ++k) {
    const int n = cutoff.retained_modes[k];
    if (n >= static_cast<int>(rates.mode.size()))
      throw ConfigError("retained mode has no cooling rates");
    shifted[k] = shifted_detuning(rates.mode[static_cast<std::size_t>(n)],
                                  drive.delta[k]);
  }

  Generator gen;
  gen.layout = sl;
  gen.leak_threshold = cutoff.leak_threshold;
  gen.H = build_hamiltonian_rf(sl, drive, modes, shifted, &gen.warnings);
  gen.channels = build_dissipator(sl, rates, heating, cutoff);
  gen.finalize();
  return gen;
}

} // namespace ionsim
