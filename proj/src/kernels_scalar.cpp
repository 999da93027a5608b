#include "ionsim/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace ionsim::kern::detail {

namespace {

void zaxpy_s(std::size_t n, cplx a, const cplx* x, cplx* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void zscal_s(std::size_t n, cplx a, cplx* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void csr_mm_acc_s(int rows, int ncols, const int* ptr, const int* col,
                  const cplx* val, cplx alpha, const cplx* B, int ldb, cplx* C,
                  int ldc) {
  for (int i = 0; i < rows; ++i) {
    cplx* c = C + static_cast<std::size_t>(i) * ldc;
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) {
      const cplx a = alpha * val[k];
      const cplx* b = B + static_cast<std::size_t>(col[k]) * ldb;
      for (int j = 0; j < ncols; ++j) c[j] += a * b[j];
    }
  }
}

void diag_mm_acc_s(int rows, int ncols, const double* d, cplx alpha,
                   const cplx* B, int ldb, cplx* C, int ldc) {
  for (int i = 0; i < rows; ++i) {
    const cplx a = alpha * d[i];
    const cplx* b = B + static_cast<std::size_t>(i) * ldb;
    cplx* c = C + static_cast<std::size_t>(i) * ldc;
    for (int j = 0; j < ncols; ++j) c[j] += a * b[j];
  }
}

double rk_err_norm_s(std::size_t n, const cplx* e, const cplx* a,
                     const cplx* b, double atol, double rtol) {
  const double* ed = reinterpret_cast<const double*>(e);
  const double* ad = reinterpret_cast<const double*>(a);
  const double* bd = reinterpret_cast<const double*>(b);
  const std::size_t n2 = 2 * n;
  double acc = 0.0;
  for (std::size_t i = 0; i < n2; ++i) {
    const double sc =
        atol + rtol * std::max(std::abs(ad[i]), std::abs(bd[i]));
    const double q = ed[i] / sc;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(n2));
}

} // namespace

const Vtab scalar_vtab = {zaxpy_s, zscal_s, csr_mm_acc_s, diag_mm_acc_s,
                          rk_err_norm_s};

} // namespace ionsim::kern::detail
