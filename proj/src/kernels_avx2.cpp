#include "ionsim/kernels.hpp"

#include <algorithm>
#include <cmath>

// This translation unit is compiled with -mavx2 -mfma on x86-64; elsewhere it
// degrades to forwarding stubs so the dispatch table always links.

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace ionsim::kern::detail {

namespace {

// y[0:ncols] += a * x[0:ncols], two complex doubles per 256-bit lane.
// Complex multiply: for packed [re, im], a*x = fmaddsub(x, ar, swap(x)*ai).
inline void axpy_row(std::size_t ncols, cplx a, const cplx* x, cplx* y) {
  const double* xd = reinterpret_cast<const double*>(x);
  double* yd = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  const std::size_t n2 = 2 * ncols;
  std::size_t i = 0;
  for (; i + 4 <= n2; i += 4) {
    const __m256d xv = _mm256_loadu_pd(xd + i);
    const __m256d yv = _mm256_loadu_pd(yd + i);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);
    const __m256d t = _mm256_mul_pd(xs, ai);
    const __m256d r = _mm256_fmaddsub_pd(xv, ar, t);
    _mm256_storeu_pd(yd + i, _mm256_add_pd(yv, r));
  }
  if (i < n2) y[i / 2] += a * x[i / 2];
}

void zaxpy_v(std::size_t n, cplx a, const cplx* x, cplx* y) {
  axpy_row(n, a, x, y);
}

void zscal_v(std::size_t n, cplx a, cplx* x) {
  double* xd = reinterpret_cast<double*>(x);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  const std::size_t n2 = 2 * n;
  std::size_t i = 0;
  for (; i + 4 <= n2; i += 4) {
    const __m256d xv = _mm256_loadu_pd(xd + i);
    const __m256d xs = _mm256_permute_pd(xv, 0x5);
    const __m256d t = _mm256_mul_pd(xs, ai);
    _mm256_storeu_pd(xd + i, _mm256_fmaddsub_pd(xv, ar, t));
  }
  if (i < n2) x[i / 2] *= a;
}

void csr_mm_acc_v(int rows, int ncols, const int* ptr, const int* col,
                  const cplx* val, cplx alpha, const cplx* B, int ldb, cplx* C,
                  int ldc) {
  for (int i = 0; i < rows; ++i) {
    cplx* c = C + static_cast<std::size_t>(i) * ldc;
    for (int k = ptr[i]; k < ptr[i + 1]; ++k) {
      axpy_row(static_cast<std::size_t>(ncols), alpha * val[k],
               B + static_cast<std::size_t>(col[k]) * ldb, c);
    }
  }
}

void diag_mm_acc_v(int rows, int ncols, const double* d, cplx alpha,
                   const cplx* B, int ldb, cplx* C, int ldc) {
  for (int i = 0; i < rows; ++i) {
    axpy_row(static_cast<std::size_t>(ncols), alpha * d[i],
             B + static_cast<std::size_t>(i) * ldb,
             C + static_cast<std::size_t>(i) * ldc);
  }
}

double rk_err_norm_v(std::size_t n, const cplx* e, const cplx* a,
                     const cplx* b, double atol, double rtol) {
  const double* ed = reinterpret_cast<const double*>(e);
  const double* ad = reinterpret_cast<const double*>(a);
  const double* bd = reinterpret_cast<const double*>(b);
  const std::size_t n2 = 2 * n;
  const __m256d absmask = _mm256_castsi256_pd(
      _mm256_set1_epi64x(0x7fffffffffffffffLL));
  const __m256d vatol = _mm256_set1_pd(atol);
  const __m256d vrtol = _mm256_set1_pd(rtol);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n2; i += 4) {
    const __m256d ev = _mm256_loadu_pd(ed + i);
    const __m256d av = _mm256_and_pd(_mm256_loadu_pd(ad + i), absmask);
    const __m256d bv = _mm256_and_pd(_mm256_loadu_pd(bd + i), absmask);
    const __m256d sc =
        _mm256_fmadd_pd(vrtol, _mm256_max_pd(av, bv), vatol);
    const __m256d q = _mm256_div_pd(ev, sc);
    acc = _mm256_fmadd_pd(q, q, acc);
  }
  double buf[4];
  _mm256_storeu_pd(buf, acc);
  double sum = buf[0] + buf[1] + buf[2] + buf[3];
  for (; i < n2; ++i) {
    const double sc =
        atol + rtol * std::max(std::abs(ad[i]), std::abs(bd[i]));
    const double q = ed[i] / sc;
    sum += q * q;
  }
  return std::sqrt(sum / static_cast<double>(n2));
}

} // namespace

const Vtab avx2_vtab = {zaxpy_v, zscal_v, csr_mm_acc_v, diag_mm_acc_v,
                        rk_err_norm_v};

bool avx2_compiled() { return true; }

} // namespace ionsim::kern::detail

#else // no AVX2 at compile time: keep the table linkable

namespace ionsim::kern::detail {

const Vtab avx2_vtab = scalar_vtab;

bool avx2_compiled() { return false; }

} // namespace ionsim::kern::detail

#endif
