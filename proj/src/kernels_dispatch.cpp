#include "ionsim/kernels.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace ionsim::kern {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

struct Selection {
  const detail::Vtab* tab;
  Backend id;
};

Selection pick_default() {
  Backend want = Backend::scalar;
  if (detail::avx2_compiled() && cpu_has_avx2_fma()) want = Backend::avx2;

  if (const char* env = std::getenv("IONSIM_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) {
      want = Backend::scalar;
    } else if (std::strcmp(env, "avx2") == 0) {
      if (detail::avx2_compiled() && cpu_has_avx2_fma()) {
        want = Backend::avx2;
      } else {
        std::fprintf(stderr,
                     "ionsim: IONSIM_KERNELS=avx2 requested but AVX2 is "
                     "unavailable; using scalar kernels\n");
        want = Backend::scalar;
      }
    } else {
      std::fprintf(stderr,
                   "ionsim: unknown IONSIM_KERNELS value '%s' ignored\n", env);
    }
  }
  return {want == Backend::avx2 ? &detail::avx2_vtab : &detail::scalar_vtab,
          want};
}

Selection& current() {
  static Selection sel = pick_default();
  return sel;
}

} // namespace

Backend active_backend() { return current().id; }

const char* backend_name() {
  return current().id == Backend::avx2 ? "avx2" : "scalar";
}

bool backend_available(Backend b) {
  if (b == Backend::scalar) return true;
  return detail::avx2_compiled() && cpu_has_avx2_fma();
}

bool set_backend(Backend b) {
  if (!backend_available(b)) return false;
  current() = {b == Backend::avx2 ? &detail::avx2_vtab : &detail::scalar_vtab,
               b};
  return true;
}

void zaxpy(std::size_t n, cplx a, const cplx* x, cplx* y) {
  current().tab->zaxpy(n, a, x, y);
}

void zscal(std::size_t n, cplx a, cplx* x) { current().tab->zscal(n, a, x); }

void csr_mm_acc(int rows, int ncols, const int* ptr, const int* col,
                const cplx* val, cplx alpha, const cplx* B, int ldb, cplx* C,
                int ldc) {
  current().tab->csr_mm_acc(rows, ncols, ptr, col, val, alpha, B, ldb, C, ldc);
}

void diag_mm_acc(int rows, int ncols, const double* d, cplx alpha,
                 const cplx* B, int ldb, cplx* C, int ldc) {
  current().tab->diag_mm_acc(rows, ncols, d, alpha, B, ldb, C, ldc);
}

double rk_err_norm(std::size_t n, const cplx* e, const cplx* a, const cplx* b,
                   double atol, double rtol) {
  return current().tab->rk_err_norm(n, e, a, b, atol, rtol);
}

} // namespace ionsim::kern
