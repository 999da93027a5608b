#include "ionsim/generator.hpp"

#include <algorithm>
#include <cstring>

#include "ionsim/errors.hpp"

namespace ionsim {

void Generator::finalize() {
  const int d = dim();
  if (H.rows == 0) H = CsrMat::zero(d, d);
  if (H.rows != d || H.cols != d)
    throw NumericalError("Generator: Hamiltonian dimension mismatch");
  if (!H.is_hermitian(1e-12))
    throw NumericalError("Generator: Hamiltonian is not Hermitian to 1e-12");
  for (const Channel& ch : channels) {
    if (ch.L.rows != d || ch.L.cols != d)
      throw NumericalError("Generator: channel dimension mismatch");
    if (ch.rate < 0)
      throw NumericalError("Generator: negative channel rate (unphysical)");
  }
  for (const std::vector<double>& p : noise_patterns)
    if (static_cast<int>(p.size()) != d)
      throw NumericalError("Generator: noise pattern dimension mismatch");

  drift = H.scaled(cplx(0.0, -1.0));
  for (const Channel& ch : channels) {
    const CsrMat g = ch.L.dagger().matmul(ch.L);
    drift = drift.plus(g, cplx(-0.5 * ch.rate, 0.0));
  }
  finalized = true;
}

void Generator::apply(const cplx* rho, cplx* drho, Workspace& ws,
                      const double* noise) const {
  if (!finalized) throw NumericalError("Generator::apply before finalize");
  const int d = dim();
  const std::size_t nn = static_cast<std::size_t>(d) * d;
  ws.s1.resize(nn);
  ws.s2.resize(nn);

  // drho = drift*rho + rho*drift† (+ noise commutator).  The right factor
  // is formed as (drift*rho†)† so the map is exact for arbitrary matrices:
  // the Hermitian-only shortcut A + A† acts anti-dissipatively on the
  // anti-Hermitian component and amplifies roundoff at the channel-rate
  // scale over long integrations.
  std::fill(drho, drho + nn, cplx(0.0));
  drift.mm_acc(cplx(1.0), rho, d, drho, d, d);
  adjoint_into(d, rho, ws.s2.data());
  std::fill(ws.s1.begin(), ws.s1.end(), cplx(0.0));
  drift.mm_acc(cplx(1.0), ws.s2.data(), d, ws.s1.data(), d, d);
  if (!noise_patterns.empty()) {
    if (!noise)
      throw NumericalError("Generator::apply: noise values required");
    ws.diag.assign(static_cast<std::size_t>(d), 0.0);
    for (std::size_t s = 0; s < noise_patterns.size(); ++s) {
      const std::vector<double>& p = noise_patterns[s];
      const double v = noise[s];
      for (int i = 0; i < d; ++i) ws.diag[static_cast<std::size_t>(i)] += v * p[static_cast<std::size_t>(i)];
    }
    kern::diag_mm_acc(d, d, ws.diag.data(), cplx(0.0, -1.0), rho, d, drho, d);
    kern::diag_mm_acc(d, d, ws.diag.data(), cplx(0.0, -1.0), ws.s2.data(), d, ws.s1.data(), d);
  }
  adjoint_acc(d, 1.0, ws.s1.data(), drho);

  // Sandwich terms: rate * L rho L† = rate * (L (L rho)†)†.
  for (const Channel& ch : channels) {
    if (ch.rate == 0.0) continue;
    std::fill(ws.s1.begin(), ws.s1.end(), cplx(0.0));
    ch.L.mm_acc(cplx(1.0), rho, d, ws.s1.data(), d, d);
    adjoint_into(d, ws.s1.data(), ws.s2.data());
    std::fill(ws.s1.begin(), ws.s1.end(), cplx(0.0));
    ch.L.mm_acc(cplx(1.0), ws.s2.data(), d, ws.s1.data(), d, d);
    adjoint_acc(d, ch.rate, ws.s1.data(), drho);
  }
}

double Generator::scale() const {
  double s = H.inf_norm();
  for (const Channel& ch : channels) {
    const double ln = ch.L.inf_norm();
    s = std::max(s, ch.rate * ln * ln);
  }
  return std::max(s, 1e-300);
}

} // namespace ionsim
