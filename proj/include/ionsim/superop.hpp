#pragma once

#include <Eigen/Core>

#include "ionsim/generator.hpp"

namespace ionsim {

// Dense superoperator of the generator in the column-stacking convention
// vec(A rho B) = (B^T ⊗ A) vec(rho).  Only assembled when dim(rho)^2 <= 4096;
// larger models must use the matrix-free path.
Eigen::MatrixXcd assemble_superop(const Generator& gen);

// rho(t) = unvec( expm(S t) vec(rho0) ), dense matrix-exponential reference
// propagation for oracle-style comparisons.
DensityMatrix expm_propagate(const Eigen::MatrixXcd& S,
                             const DensityMatrix& rho0, double t);

} // namespace ionsim
