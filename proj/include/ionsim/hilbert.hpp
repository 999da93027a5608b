#pragma once

#include <string>
#include <vector>

#include "ionsim/ops.hpp"

namespace ionsim {

// Basis layout of the truncated spin ⊗ Fock space.
//
// Index convention: idx = spin_index * fock_dim + fock_index.
//  - spin_index: qubit 0 is the most significant bit, bit value 1 = |up>,
//    0 = |down>.  So for two qubits |ud> has spin_index 0b10 = 2.
//  - fock_index: mixed radix over retained modes, first retained mode most
//    significant, occupation ascending within each mode.
struct SpaceLayout {
  int n_spins = 0;
  std::vector<int> fock_dims;   // per retained mode: n_max + 1
  std::vector<int> mode_labels; // 1-based original mode numbers (for output)

  int spin_dim() const { return 1 << n_spins; }
  int fock_dim() const {
    int f = 1;
    for (int d : fock_dims) f *= d;
    return f;
  }
  int dim() const { return spin_dim() * fock_dim(); }
  int n_modes() const { return static_cast<int>(fock_dims.size()); }
  int fock_stride(int m) const {
    int s = 1;
    for (int k = m + 1; k < n_modes(); ++k) s *= fock_dims[k];
    return s;
  }
  int spin_bit(int spin_index, int qubit) const {
    return (spin_index >> (n_spins - 1 - qubit)) & 1;
  }
  int fock_digit(int fock_index, int m) const {
    return (fock_index / fock_stride(m)) % fock_dims[m];
  }
};

using DensityMatrix = DenseMat;

// Spin operators on qubit q (identity on every other factor).
CsrMat sigma_minus(const SpaceLayout& sl, int q);
CsrMat sigma_plus(const SpaceLayout& sl, int q);
CsrMat sigma_x(const SpaceLayout& sl, int q);
CsrMat sigma_y(const SpaceLayout& sl, int q);
CsrMat sigma_z(const SpaceLayout& sl, int q);

// Mode operators on retained mode m.
CsrMat annihilate(const SpaceLayout& sl, int m);
CsrMat create(const SpaceLayout& sl, int m);
CsrMat number_op(const SpaceLayout& sl, int m);

// |pattern> over qubits, e.g. "ud"; 'u' = up, 'd' = down, 'x' = (|u>+|d>)/√2.
std::vector<cplx> spin_ket(const SpaceLayout& sl, const std::string& pattern);

// Named two-qubit states on the spin factor:
//   psi_bell  = (|ud> - i|du>)/√2
//   phi_minus = (|ud> - |du>)/√2
//   phi_plus  = (|ud> + |du>)/√2
std::vector<cplx> named_target(const SpaceLayout& sl, const std::string& name);

// Thermal occupation-probability diagonal over the Fock factor, one nbar per
// retained mode, normalized within the truncated space.
std::vector<double> thermal_fock_diag(const SpaceLayout& sl,
                                      const std::vector<double>& nbar);

// rho = |spin><spin| ⊗ diag(fock_diag)
DensityMatrix assemble_rho(const SpaceLayout& sl,
                           const std::vector<cplx>& spin,
                           const std::vector<double>& fock_diag);

// Partial trace over all Fock factors.
DensityMatrix reduce_spins(const SpaceLayout& sl, const DensityMatrix& rho);

// Total population with any retained mode at its top Fock level.
double fock_leak(const SpaceLayout& sl, const DensityMatrix& rho);

double p_up(const SpaceLayout& sl, const DensityMatrix& rho, int qubit);
double mode_occupation(const SpaceLayout& sl, const DensityMatrix& rho, int m);

} // namespace ionsim
