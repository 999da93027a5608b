#include "ionsim/ops.hpp"

#include <algorithm>
#include <cmath>

#include "ionsim/errors.hpp"

namespace ionsim {

CsrMat CsrMat::zero(int r, int c) {
  CsrMat m;
  m.rows = r;
  m.cols = c;
  m.ptr.assign(static_cast<std::size_t>(r) + 1, 0);
  return m;
}

CsrMat CsrMat::identity(int n) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back({i, i, cplx(1.0)});
  return from_triplets(n, n, std::move(t));
}

CsrMat CsrMat::from_triplets(int r, int c, std::vector<Triplet> t) {
  for (const Triplet& x : t) {
    if (x.r < 0 || x.r >= r || x.c < 0 || x.c >= c)
      throw NumericalError("CsrMat: triplet index out of range");
  }
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  CsrMat m = zero(r, c);
  m.col.reserve(t.size());
  m.val.reserve(t.size());
  std::size_t i = 0;
  for (int row = 0; row < r; ++row) {
    while (i < t.size() && t[i].r == row) {
      cplx v = t[i].v;
      const int cc = t[i].c;
      ++i;
      while (i < t.size() && t[i].r == row && t[i].c == cc) {
        v += t[i].v;
        ++i;
      }
      if (v != cplx(0.0)) {
        m.col.push_back(cc);
        m.val.push_back(v);
      }
    }
    m.ptr[static_cast<std::size_t>(row) + 1] = static_cast<int>(m.col.size());
  }
  return m;
}

CsrMat CsrMat::dagger() const {
  std::vector<Triplet> t;
  t.reserve(nnz());
  for (int i = 0; i < rows; ++i)
    for (int k = ptr[i]; k < ptr[i + 1]; ++k)
      t.push_back({col[k], i, std::conj(val[k])});
  return from_triplets(cols, rows, std::move(t));
}

CsrMat CsrMat::matmul(const CsrMat& o) const {
  if (cols != o.rows) throw NumericalError("CsrMat::matmul: dimension mismatch");
  std::vector<Triplet> t;
  for (int i = 0; i < rows; ++i) {
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) {
      const int m = col[k];
      const cplx v = val[k];
      for (int q = o.ptr[m]; q < o.ptr[m + 1]; ++q)
        t.push_back({i, o.col[q], v * o.val[q]});
    }
  }
  return from_triplets(rows, o.cols, std::move(t));
}

CsrMat CsrMat::plus(const CsrMat& o, cplx alpha) const {
  if (rows != o.rows || cols != o.cols)
    throw NumericalError("CsrMat::plus: dimension mismatch");
  std::vector<Triplet> t;
  t.reserve(nnz() + o.nnz());
  for (int i = 0; i < rows; ++i)
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) t.push_back({i, col[k], val[k]});
  for (int i = 0; i < o.rows; ++i)
    for (int k = o.ptr[i]; k < o.ptr[i + 1]; ++k)
      t.push_back({i, o.col[k], alpha * o.val[k]});
  return from_triplets(rows, cols, std::move(t));
}

CsrMat CsrMat::scaled(cplx a) const {
  CsrMat m = *this;
  for (cplx& v : m.val) v *= a;
  return m;
}

double CsrMat::inf_norm() const {
  double best = 0.0;
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) s += std::abs(val[k]);
    best = std::max(best, s);
  }
  return best;
}

bool CsrMat::is_hermitian(double tol) const {
  if (rows != cols) return false;
  const CsrMat d = dagger();
  const CsrMat diff = plus(d, cplx(-1.0));
  double scale = std::max(inf_norm(), 1e-300);
  return diff.inf_norm() <= tol * scale;
}

Eigen::MatrixXcd CsrMat::to_dense() const {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) m(i, col[k]) += val[k];
  return m;
}

void CsrMat::mm_acc(cplx alpha, const cplx* B, int ldb, cplx* C, int ldc,
                    int ncols) const {
  kern::csr_mm_acc(rows, ncols, ptr.data(), col.data(), val.data(), alpha, B,
                   ldb, C, ldc);
}

std::vector<cplx> CsrMat::apply_vec(const std::vector<cplx>& x) const {
  if (static_cast<int>(x.size()) != cols)
    throw NumericalError("CsrMat::apply_vec: dimension mismatch");
  std::vector<cplx> y(static_cast<std::size_t>(rows), cplx(0.0));
  mm_acc(cplx(1.0), x.data(), 1, y.data(), 1, 1);
  return y;
}

DenseMat DenseMat::zero(int n) {
  DenseMat m;
  m.n = n;
  m.a.assign(static_cast<std::size_t>(n) * n, cplx(0.0));
  return m;
}

DenseMat DenseMat::identity(int n) {
  DenseMat m = zero(n);
  for (int i = 0; i < n; ++i) m(i, i) = cplx(1.0);
  return m;
}

cplx DenseMat::trace() const {
  cplx s(0.0);
  for (int i = 0; i < n; ++i) s += (*this)(i, i);
  return s;
}

void DenseMat::hermitize() {
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const cplx v = 0.5 * ((*this)(i, j) + std::conj((*this)(j, i)));
      (*this)(i, j) = v;
      (*this)(j, i) = std::conj(v);
    }
  }
}

double DenseMat::max_abs_diff(const DenseMat& o) const {
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    best = std::max(best, std::abs(a[i] - o.a[i]));
  return best;
}

Eigen::MatrixXcd DenseMat::to_eigen() const {
  Eigen::MatrixXcd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = (*this)(i, j);
  return m;
}

DenseMat DenseMat::from_eigen(const Eigen::MatrixXcd& e) {
  DenseMat m = zero(static_cast<int>(e.rows()));
  for (int i = 0; i < m.n; ++i)
    for (int j = 0; j < m.n; ++j) m(i, j) = e(i, j);
  return m;
}

void adjoint_into(int n, const cplx* A, cplx* B) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      B[static_cast<std::size_t>(i) * n + j] =
          std::conj(A[static_cast<std::size_t>(j) * n + i]);
}

void adjoint_acc(int n, double alpha, const cplx* A, cplx* B) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      B[static_cast<std::size_t>(i) * n + j] +=
          alpha * std::conj(A[static_cast<std::size_t>(j) * n + i]);
}

void self_plus_adjoint(int n, cplx* A) {
  for (int i = 0; i < n; ++i) {
    cplx& d = A[static_cast<std::size_t>(i) * n + i];
    d = cplx(2.0 * d.real(), 0.0);
    for (int j = i + 1; j < n; ++j) {
      cplx& u = A[static_cast<std::size_t>(i) * n + j];
      cplx& l = A[static_cast<std::size_t>(j) * n + i];
      const cplx nu = u + std::conj(l);
      const cplx nl = l + std::conj(u);
      u = nu;
      l = nl;
    }
  }
}

} // namespace ionsim
