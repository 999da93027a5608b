#pragma once

#include <string>
#include <vector>

#include "ionsim/hilbert.hpp"
#include "ionsim/ops.hpp"

namespace ionsim {

struct Channel {
  CsrMat L;
  double rate = 0.0; // GKSL rate, >= 0
};

// Time-independent GKSL generator
//   d rho/dt = -i[H, rho] + sum_k rate_k (L rho L† - 1/2 {L†L, rho}),
// applied matrix-free via sparse-operator products.  Optional real diagonal
// noise patterns add a stochastic Hamiltonian term sum_s F_s(t) * diag_s.
struct Generator {
  SpaceLayout layout;
  CsrMat H;
  std::vector<Channel> channels;
  std::vector<std::vector<double>> noise_patterns; // per source, length dim
  double leak_threshold = 1e-6;
  std::vector<std::string> warnings;

  // Built by finalize(): drift = -iH - 1/2 sum_k rate_k L_k†L_k.  apply()
  // forms drift*rho + rho*drift† (the second factor as (drift*rho†)†), which
  // reproduces the Hamiltonian and anticommutator parts exactly for arbitrary
  // matrices, keeping the map stable on the anti-Hermitian roundoff subspace.
  CsrMat drift;
  bool finalized = false;

  int dim() const { return layout.dim(); }
  void finalize();

  struct Workspace {
    std::vector<cplx> s1, s2;
    std::vector<double> diag;
  };

  // drho must not alias rho.  noise holds one value per noise pattern (may be
  // null when there are no patterns).
  void apply(const cplx* rho, cplx* drho, Workspace& ws,
             const double* noise = nullptr) const;

  // Magnitude scale of the generator in rad/s, used for relative convergence
  // thresholds: max(|H|_inf, max_k rate_k * |L_k|_inf^2).
  double scale() const;
};

} // namespace ionsim
