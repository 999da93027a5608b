#include "ionsim/superop.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

// kron(A, B) for modest dense matrices.
Eigen::MatrixXcd kron(const Eigen::MatrixXcd& A, const Eigen::MatrixXcd& B) {
  Eigen::MatrixXcd K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

} // namespace

Eigen::MatrixXcd assemble_superop(const Generator& gen) {
  const int d = gen.dim();
  if (static_cast<long>(d) * d > 4096)
    throw NumericalError("assemble_superop: dim(rho)^2 exceeds 4096; use the "
                         "matrix-free path");
  if (!gen.noise_patterns.empty())
    throw NumericalError("assemble_superop: stochastic generators are not "
                         "representable as a single superoperator");

  const Eigen::MatrixXcd I = Eigen::MatrixXcd::Identity(d, d);
  const Eigen::MatrixXcd H = gen.H.to_dense();
  const cplx im(0.0, 1.0);

  Eigen::MatrixXcd S = -im * (kron(I, H) - kron(H.transpose(), I));
  for (const Channel& ch : gen.channels) {
    const Eigen::MatrixXcd L = ch.L.to_dense();
    const Eigen::MatrixXcd G = (L.adjoint() * L).eval();
    S += ch.rate * (kron(L.conjugate(), L) -
                    0.5 * (kron(I, G) + kron(G.transpose(), I)));
  }
  return S;
}

DensityMatrix expm_propagate(const Eigen::MatrixXcd& S,
                             const DensityMatrix& rho0, double t) {
  const int d = rho0.n;
  if (S.rows() != static_cast<long>(d) * d)
    throw NumericalError("expm_propagate: dimension mismatch");
  // Column-stacking uses the column-major layout of the Eigen copy.
  Eigen::MatrixXcd r0 = rho0.to_eigen();
  Eigen::Map<Eigen::VectorXcd> v(r0.data(), S.rows());
  const Eigen::MatrixXcd P = (S * t).exp();
  Eigen::VectorXcd vt = P * v;
  Eigen::MatrixXcd rt = Eigen::Map<Eigen::MatrixXcd>(vt.data(), d, d);
  return DensityMatrix::from_eigen(rt);
}

} // namespace ionsim
