#pragma once

#include <string>
#include <vector>

#include "ionsim/cooling.hpp"
#include "ionsim/crystal.hpp"
#include "ionsim/effective.hpp"
#include "ionsim/generator.hpp"

namespace ionsim {

// Fock-space truncation of the retained modes.  The modes listed here must
// match the drive's retained modes when both enter the same generator.
struct FockCutoff {
  std::vector<int> retained_modes;
  int n_max = 8;                 // highest Fock level kept per mode
  double leak_threshold = 1e-6;  // top-level population that voids a run
};

// Rotating-frame spin-phonon Hamiltonian
//   H = sum_n delta_n b_n^dag b_n + sum_{i,n} (F_in sigma_i^+ b_n + H.c.)
// on a layout of |sigma ions| spins and the retained modes.
// `mode_detunings` holds one rotating-frame detuning per retained mode; pass
// the Lamb-shifted values when cooling is attached.  Appends a warning per
// (ion, mode) pair whose coupling is not small against its detuning.
CsrMat build_hamiltonian_rf(const SpaceLayout& sl, const RamanDrive& drive,
                            const NormalModes& modes,
                            const std::vector<double>& mode_detunings,
                            std::vector<std::string>* warnings = nullptr);

// Cooling channels for the retained modes: (b_n, 2 Re Gamma_n^-) and
// (b_n^dag, 2 Re Gamma_n^+ + Gamma_ah).  Pass rates without anomalous
// heating already applied; the heating spec enters here.
std::vector<Channel> build_dissipator(const SpaceLayout& sl,
                                      const CoolingRates& rates,
                                      const HeatingSpec& heating,
                                      const FockCutoff& cutoff);

// Full spin-phonon generator: Lamb-shifted Hamiltonian plus cooling
// dissipator, finalized and ready for matrix-free application.
Generator build_full_generator(const RamanDrive& drive,
                               const CoolingRates& rates,
                               const HeatingSpec& heating,
                               const NormalModes& modes,
                               const FockCutoff& cutoff);

} // namespace ionsim
