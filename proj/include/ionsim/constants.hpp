#pragma once

namespace ionsim {

// CODATA 2018 values, SI units.
inline constexpr double k_hbar = 1.054571817e-34;        // J s
inline constexpr double k_elem_charge = 1.602176634e-19; // C
inline constexpr double k_eps0 = 8.8541878128e-12;       // F/m
inline constexpr double k_amu = 1.66053906660e-27;       // kg

inline constexpr double k_pi = 3.14159265358979323846;
inline constexpr double k_two_pi = 2.0 * k_pi;

} // namespace ionsim
