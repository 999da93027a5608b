#include "ionsim/hilbert.hpp"

#include <cmath>

#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

// Builds a spin operator from its single-qubit action: entries
// act(bit) -> list of (new_bit, amplitude).
CsrMat spin_op(const SpaceLayout& sl, int q,
               const cplx amp[2][2] /* amp[new_bit][old_bit] */) {
  if (q < 0 || q >= sl.n_spins) throw NumericalError("spin_op: bad qubit");
  const int F = sl.fock_dim();
  const int S = sl.spin_dim();
  std::vector<Triplet> t;
  for (int s = 0; s < S; ++s) {
    const int b = sl.spin_bit(s, q);
    for (int nb = 0; nb < 2; ++nb) {
      const cplx v = amp[nb][b];
      if (v == cplx(0.0)) continue;
      const int s2 = nb == b ? s : (s ^ (1 << (sl.n_spins - 1 - q)));
      for (int f = 0; f < F; ++f)
        t.push_back({s2 * F + f, s * F + f, v});
    }
  }
  return CsrMat::from_triplets(sl.dim(), sl.dim(), std::move(t));
}

} // namespace

CsrMat sigma_minus(const SpaceLayout& sl, int q) {
  const cplx a[2][2] = {{cplx(0), cplx(1)}, {cplx(0), cplx(0)}};
  return spin_op(sl, q, a);
}

CsrMat sigma_plus(const SpaceLayout& sl, int q) {
  const cplx a[2][2] = {{cplx(0), cplx(0)}, {cplx(1), cplx(0)}};
  return spin_op(sl, q, a);
}

CsrMat sigma_x(const SpaceLayout& sl, int q) {
  const cplx a[2][2] = {{cplx(0), cplx(1)}, {cplx(1), cplx(0)}};
  return spin_op(sl, q, a);
}

CsrMat sigma_y(const SpaceLayout& sl, int q) {
  // Basis order within the block is (down, up): sigma_y = -i(s+ - s-).
  const cplx a[2][2] = {{cplx(0), cplx(0, 1)}, {cplx(0, -1), cplx(0)}};
  return spin_op(sl, q, a);
}

CsrMat sigma_z(const SpaceLayout& sl, int q) {
  const cplx a[2][2] = {{cplx(-1), cplx(0)}, {cplx(0), cplx(1)}};
  return spin_op(sl, q, a);
}

CsrMat annihilate(const SpaceLayout& sl, int m) {
  if (m < 0 || m >= sl.n_modes()) throw NumericalError("annihilate: bad mode");
  const int F = sl.fock_dim();
  const int S = sl.spin_dim();
  const int stride = sl.fock_stride(m);
  std::vector<Triplet> t;
  for (int f = 0; f < F; ++f) {
    const int nph = sl.fock_digit(f, m);
    if (nph == 0) continue;
    const cplx v = std::sqrt(static_cast<double>(nph));
    for (int s = 0; s < S; ++s)
      t.push_back({s * F + (f - stride), s * F + f, v});
  }
  return CsrMat::from_triplets(sl.dim(), sl.dim(), std::move(t));
}

CsrMat create(const SpaceLayout& sl, int m) { return annihilate(sl, m).dagger(); }

CsrMat number_op(const SpaceLayout& sl, int m) {
  const int F = sl.fock_dim();
  const int S = sl.spin_dim();
  std::vector<Triplet> t;
  for (int f = 0; f < F; ++f) {
    const int nph = sl.fock_digit(f, m);
    if (nph == 0) continue;
    for (int s = 0; s < S; ++s)
      t.push_back({s * F + f, s * F + f, cplx(static_cast<double>(nph))});
  }
  return CsrMat::from_triplets(sl.dim(), sl.dim(), std::move(t));
}

std::vector<cplx> spin_ket(const SpaceLayout& sl, const std::string& pattern) {
  if (static_cast<int>(pattern.size()) != sl.n_spins)
    throw ConfigError("spin pattern '" + pattern + "' must have " +
                      std::to_string(sl.n_spins) + " characters");
  const int S = sl.spin_dim();
  const double s2 = 1.0 / std::sqrt(2.0);
  std::vector<cplx> psi(static_cast<std::size_t>(S));
  for (int s = 0; s < S; ++s) {
    cplx amp(1.0);
    for (int q = 0; q < sl.n_spins; ++q) {
      const char c = pattern[static_cast<std::size_t>(q)];
      const int bit = sl.spin_bit(s, q);
      double w;
      if (c == 'd') {
        w = bit ? 0.0 : 1.0;
      } else if (c == 'u') {
        w = bit ? 1.0 : 0.0;
      } else if (c == 'x') {
        w = s2;
      } else {
        throw ConfigError(std::string("bad spin pattern character '") + c +
                          "'");
      }
      amp *= w;
    }
    psi[static_cast<std::size_t>(s)] = amp;
  }
  return psi;
}

std::vector<cplx> named_target(const SpaceLayout& sl, const std::string& name) {
  if (sl.n_spins != 2)
    throw ConfigError("named target '" + name + "' requires two qubits");
  std::vector<cplx> psi(4, cplx(0.0));
  const double s2 = 1.0 / std::sqrt(2.0);
  // |ud> = index 2, |du> = index 1.
  if (name == "psi_bell") {
    psi[2] = cplx(s2, 0.0);
    psi[1] = cplx(0.0, -s2);
  } else if (name == "phi_minus") {
    psi[2] = cplx(s2, 0.0);
    psi[1] = cplx(-s2, 0.0);
  } else if (name == "phi_plus") {
    psi[2] = cplx(s2, 0.0);
    psi[1] = cplx(s2, 0.0);
  } else {
    throw ConfigError("unknown target state '" + name + "'");
  }
  return psi;
}

std::vector<double> thermal_fock_diag(const SpaceLayout& sl,
                                      const std::vector<double>& nbar) {
  if (static_cast<int>(nbar.size()) != sl.n_modes())
    throw ConfigError("thermal_fock_diag: one nbar per retained mode required");
  std::vector<double> diag(static_cast<std::size_t>(sl.fock_dim()), 1.0);
  for (int m = 0; m < sl.n_modes(); ++m) {
    const double nb = nbar[static_cast<std::size_t>(m)];
    if (nb < 0) throw ConfigError("thermal_fock_diag: negative nbar");
    const double r = nb / (1.0 + nb);
    std::vector<double> p(static_cast<std::size_t>(sl.fock_dims[m]));
    double sum = 0.0;
    for (int k = 0; k < sl.fock_dims[m]; ++k) {
      p[static_cast<std::size_t>(k)] = std::pow(r, k);
      sum += p[static_cast<std::size_t>(k)];
    }
    for (double& x : p) x /= sum;
    for (int f = 0; f < sl.fock_dim(); ++f)
      diag[static_cast<std::size_t>(f)] *=
          p[static_cast<std::size_t>(sl.fock_digit(f, m))];
  }
  return diag;
}

DensityMatrix assemble_rho(const SpaceLayout& sl, const std::vector<cplx>& spin,
                           const std::vector<double>& fock_diag) {
  const int S = sl.spin_dim();
  const int F = sl.fock_dim();
  if (static_cast<int>(spin.size()) != S)
    throw ConfigError("assemble_rho: spin ket dimension mismatch");
  if (static_cast<int>(fock_diag.size()) != F)
    throw ConfigError("assemble_rho: fock diagonal dimension mismatch");
  DensityMatrix rho = DensityMatrix::zero(sl.dim());
  for (int s1 = 0; s1 < S; ++s1) {
    for (int s2 = 0; s2 < S; ++s2) {
      const cplx w = spin[static_cast<std::size_t>(s1)] *
                     std::conj(spin[static_cast<std::size_t>(s2)]);
      if (w == cplx(0.0)) continue;
      for (int f = 0; f < F; ++f)
        rho(s1 * F + f, s2 * F + f) = w * fock_diag[static_cast<std::size_t>(f)];
    }
  }
  return rho;
}

DensityMatrix reduce_spins(const SpaceLayout& sl, const DensityMatrix& rho) {
  const int S = sl.spin_dim();
  const int F = sl.fock_dim();
  if (rho.n != sl.dim()) throw NumericalError("reduce_spins: dimension mismatch");
  DensityMatrix out = DensityMatrix::zero(S);
  for (int s1 = 0; s1 < S; ++s1)
    for (int s2 = 0; s2 < S; ++s2) {
      cplx acc(0.0);
      for (int f = 0; f < F; ++f) acc += rho(s1 * F + f, s2 * F + f);
      out(s1, s2) = acc;
    }
  return out;
}

double fock_leak(const SpaceLayout& sl, const DensityMatrix& rho) {
  const int S = sl.spin_dim();
  const int F = sl.fock_dim();
  double leak = 0.0;
  for (int f = 0; f < F; ++f) {
    bool top = false;
    for (int m = 0; m < sl.n_modes(); ++m)
      if (sl.fock_digit(f, m) == sl.fock_dims[m] - 1) top = true;
    if (!top) continue;
    for (int s = 0; s < S; ++s) leak += rho(s * F + f, s * F + f).real();
  }
  return leak;
}

double p_up(const SpaceLayout& sl, const DensityMatrix& rho, int qubit) {
  const int S = sl.spin_dim();
  const int F = sl.fock_dim();
  double p = 0.0;
  for (int s = 0; s < S; ++s) {
    if (!sl.spin_bit(s, qubit)) continue;
    for (int f = 0; f < F; ++f) p += rho(s * F + f, s * F + f).real();
  }
  return p;
}

double mode_occupation(const SpaceLayout& sl, const DensityMatrix& rho, int m) {
  const int S = sl.spin_dim();
  const int F = sl.fock_dim();
  double occ = 0.0;
  for (int f = 0; f < F; ++f) {
    const double nph = sl.fock_digit(f, m);
    if (nph == 0) continue;
    for (int s = 0; s < S; ++s) occ += nph * rho(s * F + f, s * F + f).real();
  }
  return occ;
}

} // namespace ionsim
