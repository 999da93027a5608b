#include "doctest.h"

#include <complex>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "ionsim/kernels.hpp"
#include "ionsim/ops.hpp"

using ionsim::cplx;
using ionsim::CsrMat;
using ionsim::Triplet;
namespace kern = ionsim::kern;

namespace {

std::vector<cplx> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> v(n);
  for (auto& x : v) x = cplx(u(rng), u(rng));
  return v;
}

CsrMat random_csr(int rows, int cols, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> p(0.0, 1.0);
  std::vector<Triplet> t;
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (p(rng) < density) t.push_back({i, j, cplx(u(rng), u(rng))});
  if (t.empty()) t.push_back({0, 0, cplx(1.0, 0.0)});
  return CsrMat::from_triplets(rows, cols, std::move(t));
}

double max_rel_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  REQUIRE(a.size() == b.size());
  double scale = 1e-300;
  for (const auto& x : a) scale = std::max(scale, std::abs(x));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]) / scale);
  return m;
}

// Restores the previously active backend when leaving a scope.
struct BackendGuard {
  kern::Backend saved;
  BackendGuard() : saved(kern::active_backend()) {}
  ~BackendGuard() { kern::set_backend(saved); }
};

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("backend selection and naming") {
  BackendGuard guard;
  CHECK(kern::backend_available(kern::Backend::scalar));
  CHECK(kern::set_backend(kern::Backend::scalar));
  CHECK(kern::active_backend() == kern::Backend::scalar);
  CHECK(std::string(kern::backend_name()) == "scalar");

  const bool avx2 = kern::backend_available(kern::Backend::avx2);
  if (avx2) {
    CHECK(kern::set_backend(kern::Backend::avx2));
    CHECK(kern::active_backend() == kern::Backend::avx2);
    CHECK(std::string(kern::backend_name()) == "avx2");
  } else {
    // Unavailable backends are refused and leave the selection unchanged.
    CHECK_FALSE(kern::set_backend(kern::Backend::avx2));
    CHECK(kern::active_backend() == kern::Backend::scalar);
  }
}

TEST_CASE("zaxpy and zscal agree across backends") {
  if (!kern::backend_available(kern::Backend::avx2)) return;
  BackendGuard guard;
  const cplx alpha(0.73, -1.21);
  for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 17u, 33u, 100u}) {
    const auto x = random_vec(n, 11 + n);
    auto y0 = random_vec(n, 23 + n);
    auto ys = y0, ya = y0;

    kern::set_backend(kern::Backend::scalar);
    kern::zaxpy(n, alpha, x.data(), ys.data());
    kern::set_backend(kern::Backend::avx2);
    kern::zaxpy(n, alpha, x.data(), ya.data());
    CHECK(max_rel_diff(ys, ya) <= 1e-12);

    auto zs = x, za = x;
    kern::set_backend(kern::Backend::scalar);
    kern::zscal(n, alpha, zs.data());
    kern::set_backend(kern::Backend::avx2);
    kern::zscal(n, alpha, za.data());
    CHECK(max_rel_diff(zs, za) <= 1e-12);
  }
}

TEST_CASE("csr_mm_acc agrees across backends, including padded leading dims") {
  if (!kern::backend_available(kern::Backend::avx2)) return;
  BackendGuard guard;
  for (int ncols : {1, 3, 4, 7, 13}) {
    const CsrMat A = random_csr(9, 6, 0.35, 91 + ncols);
    for (int pad : {0, 3}) {
      const int ld = ncols + pad;
      const auto B = random_vec(static_cast<std::size_t>(6) * ld, 7 + ncols);
      auto Cs = random_vec(static_cast<std::size_t>(9) * ld, 77 + ncols);
      auto Ca = Cs;
      const cplx alpha(-0.4, 0.9);

      kern::set_backend(kern::Backend::scalar);
      kern::csr_mm_acc(9, ncols, A.ptr.data(), A.col.data(), A.val.data(),
                       alpha, B.data(), ld, Cs.data(), ld);
      kern::set_backend(kern::Backend::avx2);
      kern::csr_mm_acc(9, ncols, A.ptr.data(), A.col.data(), A.val.data(),
                       alpha, B.data(), ld, Ca.data(), ld);
      CHECK(max_rel_diff(Cs, Ca) <= 1e-12);
    }
  }
}

TEST_CASE("diag_mm_acc agrees across backends") {
  if (!kern::backend_available(kern::Backend::avx2)) return;
  BackendGuard guard;
  for (int ncols : {1, 2, 5, 8, 11}) {
    const int rows = 7;
    std::mt19937_64 rng(5 + ncols);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> d(rows);
    for (auto& x : d) x = u(rng);
    const auto B = random_vec(static_cast<std::size_t>(rows) * ncols, 13 + ncols);
    auto Cs = random_vec(static_cast<std::size_t>(rows) * ncols, 17 + ncols);
    auto Ca = Cs;
    const cplx alpha(0.0, -1.0);

    kern::set_backend(kern::Backend::scalar);
    kern::diag_mm_acc(rows, ncols, d.data(), alpha, B.data(), ncols, Cs.data(),
                      ncols);
    kern::set_backend(kern::Backend::avx2);
    kern::diag_mm_acc(rows, ncols, d.data(), alpha, B.data(), ncols, Ca.data(),
                      ncols);
    CHECK(max_rel_diff(Cs, Ca) <= 1e-12);
  }
}

TEST_CASE("rk_err_norm matches the direct formula and agrees across backends") {
  BackendGuard guard;
  const std::size_t n = 37;
  const auto e = random_vec(n, 1);
  const auto a = random_vec(n, 2);
  const auto b = random_vec(n, 3);
  const double atol = 1e-10, rtol = 1e-6;

  // Direct evaluation over the interleaved real view.
  const double* er = reinterpret_cast<const double*>(e.data());
  const double* ar = reinterpret_cast<const double*>(a.data());
  const double* br = reinterpret_cast<const double*>(b.data());
  double acc = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const double sc = atol + rtol * std::max(std::abs(ar[i]), std::abs(br[i]));
    const double q = er[i] / sc;
    acc += q * q;
  }
  const double direct = std::sqrt(acc / static_cast<double>(2 * n));

  kern::set_backend(kern::Backend::scalar);
  const double vs = kern::rk_err_norm(n, e.data(), a.data(), b.data(), atol, rtol);
  CHECK(vs == doctest::Approx(direct).epsilon(1e-13));

  if (kern::backend_available(kern::Backend::avx2)) {
    kern::set_backend(kern::Backend::avx2);
    const double va =
        kern::rk_err_norm(n, e.data(), a.data(), b.data(), atol, rtol);
    CHECK(va == doctest::Approx(vs).epsilon(1e-12));
  }
}

TEST_CASE("fixed backend reruns are bit-identical") {
  BackendGuard guard;
  const std::size_t n = 64;
  const auto x = random_vec(n, 41);
  const auto y0 = random_vec(n, 42);
  const cplx alpha(1.7, -0.3);
  for (kern::Backend be : {kern::Backend::scalar, kern::Backend::avx2}) {
    if (!kern::backend_available(be)) continue;
    kern::set_backend(be);
    auto y1 = y0, y2 = y0;
    kern::zaxpy(n, alpha, x.data(), y1.data());
    kern::zaxpy(n, alpha, x.data(), y2.data());
    CHECK(std::memcmp(y1.data(), y2.data(), n * sizeof(cplx)) == 0);
  }
}

} // TEST_SUITE
