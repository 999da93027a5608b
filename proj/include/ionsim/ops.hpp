#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "ionsim/kernels.hpp"

namespace ionsim {

using cplx = std::complex<double>;

struct Triplet {
  int r, c;
  cplx v;
};

// Compressed sparse row complex matrix.  Columns within a row are sorted;
// duplicate triplets are summed and exact zeros dropped on construction.
struct CsrMat {
  int rows = 0, cols = 0;
  std::vector<int> ptr{0};
  std::vector<int> col;
  std::vector<cplx> val;

  static CsrMat zero(int r, int c);
  static CsrMat identity(int n);
  static CsrMat from_triplets(int r, int c, std::vector<Triplet> t);

  std::size_t nnz() const { return val.size(); }
  CsrMat dagger() const;
  CsrMat matmul(const CsrMat& o) const;
  CsrMat plus(const CsrMat& o, cplx alpha = cplx(1.0)) const;
  CsrMat scaled(cplx a) const;
  double inf_norm() const; // max absolute row sum
  bool is_hermitian(double tol) const;
  Eigen::MatrixXcd to_dense() const;

  // C += alpha * (*this) * B, with B (cols x ncols) and C (rows x ncols)
  // dense row-major.
  void mm_acc(cplx alpha, const cplx* B, int ldb, cplx* C, int ldc,
              int ncols) const;
  std::vector<cplx> apply_vec(const std::vector<cplx>& x) const;
};

// Dense square complex matrix, row-major contiguous storage.
struct DenseMat {
  int n = 0;
  std::vector<cplx> a;

  static DenseMat zero(int n);
  static DenseMat identity(int n);
  cplx& operator()(int i, int j) {
    return a[static_cast<std::size_t>(i) * n + j];
  }
  const cplx& operator()(int i, int j) const {
    return a[static_cast<std::size_t>(i) * n + j];
  }
  cplx trace() const;
  void hermitize(); // A <- (A + A†)/2
  double max_abs_diff(const DenseMat& o) const;
  Eigen::MatrixXcd to_eigen() const;
  static DenseMat from_eigen(const Eigen::MatrixXcd& m);
};

// B = A†  (n x n, row-major)
void adjoint_into(int n, const cplx* A, cplx* B);
// B += alpha * A†
void adjoint_acc(int n, double alpha, const cplx* A, cplx* B);
// A <- A + A†
void self_plus_adjoint(int n, cplx* A);

} // namespace ionsim
