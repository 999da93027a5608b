#pragma once

#include <complex>
#include <cstddef>

// Low-level array kernels behind the density-matrix hot path.  Every entry
// point has a scalar reference implementation and an AVX2+FMA variant; the
// active backend is chosen at runtime (CPU detection, overridable through the
// IONSIM_KERNELS environment variable or set_backend()).  Backends agree to
// floating-point rounding differences only: FMA contraction makes bitwise
// equality across backends impossible, so equivalence tests use relative
// tolerances, while reruns on a fixed backend are bit-identical.

namespace ionsim::kern {

using cplx = std::complex<double>;

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();
bool backend_available(Backend b);
// Selects a backend; returns false (and leaves the selection unchanged) if
// the requested backend is not available on this machine/build.
bool set_backend(Backend b);

// y[i] += a * x[i]
void zaxpy(std::size_t n, cplx a, const cplx* x, cplx* y);

// x[i] *= a
void zscal(std::size_t n, cplx a, cplx* x);

// Row-major dense accumulate of a CSR product:
//   C[i, 0:ncols] += alpha * sum_k val[k] * B[col[k], 0:ncols]
// where k runs over row i's nonzeros.  B has leading dimension ldb, C ldc.
void csr_mm_acc(int rows, int ncols, const int* ptr, const int* col,
                const cplx* val, cplx alpha, const cplx* B, int ldb, cplx* C,
                int ldc);

// C[i, 0:ncols] += (alpha * d[i]) * B[i, 0:ncols]  with real diagonal d.
void diag_mm_acc(int rows, int ncols, const double* d, cplx alpha,
                 const cplx* B, int ldb, cplx* C, int ldc);

// Scaled-RMS error norm over the real view (2n doubles) of a complex array:
//   sqrt( (1/2n) * sum_i ( e_i / (atol + rtol*max(|a_i|, |b_i|)) )^2 )
// Used by the adaptive integrator's step controller.
double rk_err_norm(std::size_t n, const cplx* e, const cplx* a, const cplx* b,
                   double atol, double rtol);

namespace detail {

struct Vtab {
  void (*zaxpy)(std::size_t, cplx, const cplx*, cplx*);
  void (*zscal)(std::size_t, cplx, cplx*);
  void (*csr_mm_acc)(int, int, const int*, const int*, const cplx*, cplx,
                     const cplx*, int, cplx*, int);
  void (*diag_mm_acc)(int, int, const double*, cplx, const cplx*, int, cplx*,
                      int);
  double (*rk_err_norm)(std::size_t, const cplx*, const cplx*, const cplx*,
                        double, double);
};

extern const Vtab scalar_vtab;
extern const Vtab avx2_vtab; // forwards to scalar when built without AVX2
bool avx2_compiled();

} // namespace detail

} // namespace ionsim::kern
