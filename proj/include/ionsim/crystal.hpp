#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace ionsim {

struct IonSpecies {
  double mass_kg = 0.0;
  std::string label;
  enum class Role { sigma, tau } role = Role::sigma;
};

struct IonChain {
  std::vector<IonSpecies> ions;
  double omega_z = 0.0;          // axial trap angular frequency (rad/s),
  double reference_mass_kg = 0.0; // defined for this reference mass
  double charge = 1.0;           // elementary charges per ion
};

// Dimensionless equilibrium positions in units of the Coulomb length
// l = (e^2 q^2 / (4 pi eps0 k_trap))^(1/3) with the mass-independent trap
// spring constant k_trap = M_ref * omega_z^2.
struct EquilibriumConfig {
  std::vector<double> u; // strictly increasing
  double length_unit = 0.0; // l in meters
};

// Axial normal modes: frequencies ascending; columns of M are the
// mass-weighted orthonormal mode vectors (largest-magnitude entry positive).
struct NormalModes {
  std::vector<double> omega; // rad/s
  Eigen::MatrixXd M;
};

EquilibriumConfig solve_equilibrium(const IonChain& chain);
NormalModes compute_modes(const IonChain& chain, const EquilibriumConfig& eq);

// eta = k * projection * sqrt(hbar / (2 m omega_n))
double lamb_dicke(double k, double projection, double mass_kg, double omega_n);

std::vector<int> sigma_indices(const IonChain& chain);
std::vector<int> tau_indices(const IonChain& chain);

} // namespace ionsim
