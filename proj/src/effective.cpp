#include "ionsim/effective.hpp"

#include <cmath>
#include <complex>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

void validate_drive(const RamanDrive& drive, const CoolingRates& rates,
                    const NormalModes& modes) {
  const std::size_t ns = drive.sigma_positions.size();
  if (ns == 0) throw ConfigError("drive: no sigma ions");
  if (drive.phases.size() != ns)
    throw ConfigError("drive: phases must match sigma ion count");
  const std::size_t nm = drive.retained_modes.size();
  if (nm == 0) throw ConfigError("drive: no retained modes");
  if (drive.eta_sigma.size() != nm || drive.delta.size() != nm)
    throw ConfigError("drive: eta_sigma and delta must match retained modes");
  for (int m : drive.retained_modes)
    if (m < 0 || m >= static_cast<int>(modes.omega.size()) ||
        m >= static_cast<int>(rates.mode.size()))
      throw ConfigError("drive: retained mode index out of range");
  for (int p : drive.sigma_positions)
    if (p < 0 || p >= modes.M.rows())
      throw ConfigError("drive: sigma position out of range");
}

struct ModeEnv {
  std::vector<double> delta_tilde, W, nbar;
};

ModeEnv mode_environment(const RamanDrive& drive, const CoolingRates& rates,
                         bool require_cooling) {
  ModeEnv env;
  const std::size_t nm = drive.retained_modes.size();
  env.delta_tilde.resize(nm);
  env.W.resize(nm);
  env.nbar.resize(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    const int n = drive.retained_modes[k];
    const ModeRates& mr = rates.mode[static_cast<std::size_t>(n)];
    env.delta_tilde[k] = shifted_detuning(mr, drive.delta[k]);
    env.W[k] = mr.W;
    env.nbar[k] = mr.nbar;
    if (require_cooling && !(mr.W > 0)) {
      // A mode the cooling laser does not see at all (symmetry-decoupled
      // coolant) is a purely coherent spectator: W = 0, no thermal
      // population pumped, elimination reduces to virtual exchange.
      const bool spectator = mr.W == 0.0 && mr.gamma_minus == cplx(0.0) &&
                             mr.gamma_plus == cplx(0.0);
      if (!spectator) {
        std::ostringstream os;
        os << "retained mode " << n + 1
           << " is not cooled (W = " << mr.W << "); elimination invalid";
        throw NumericalError(os.str());
      }
      env.nbar[k] = 0.0;
    }
    if (env.delta_tilde[k] == 0.0 && env.W[k] == 0.0)
      throw NumericalError("singular configuration: delta_tilde = W = 0");
  }
  return env;
}

// D = sum_ij K_ij (A_i mu A_j^dag - 1/2 {A_j^dag A_i, mu}) with K Hermitian
// PSD up to round-off.  Channels come from K's eigendecomposition; each
// kept eigenpair contributes L_k = sum_i U_ik A_i at rate lambda_k.
std::vector<Channel> kossakowski_channels(const Eigen::MatrixXcd& K,
                                          const std::vector<CsrMat>& ops) {
  Eigen::MatrixXcd Kh = 0.5 * (K + K.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Kh);
  if (es.info() != Eigen::Success)
    throw NumericalError("Kossakowski eigendecomposition failed");
  const auto& lam = es.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  std::vector<Channel> out;
  if (scale == 0.0) return out;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam[k] < -1e-10 * scale) {
      std::ostringstream os;
      os << "unphysical model: negative Kossakowski eigenvalue " << lam[k];
      throw NumericalError(os.str());
    }
    if (std::abs(lam[k]) < 1e-10 * scale) continue;
    CsrMat L = CsrMat::zero(ops.front().rows, ops.front().cols);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(ops.size()); ++i) {
      const cplx u = es.eigenvectors()(i, k);
      if (u != cplx(0.0))
        L = L.plus(ops[static_cast<std::size_t>(i)], u);
    }
    out.push_back(Channel{std::move(L), lam[k]});
  }
  return out;
}

} // namespace

Eigen::MatrixXcd drive_couplings(const RamanDrive& drive,
                                 const NormalModes& modes) {
  const int ns = static_cast<int>(drive.sigma_positions.size());
  const int nm = static_cast<int>(drive.retained_modes.size());
  Eigen::MatrixXcd F(ns, nm);
  for (int i = 0; i < ns; ++i) {
    const cplx phase =
        cplx(0.0, 0.5 * drive.Omega_sigma) *
        std::exp(cplx(0.0, drive.phases[static_cast<std::size_t>(i)]));
    for (int k = 0; k < nm; ++k) {
      const int n = drive.retained_modes[static_cast<std::size_t>(k)];
      F(i, k) = phase * drive.eta_sigma[static_cast<std::size_t>(k)] *
                modes.M(drive.sigma_positions[static_cast<std::size_t>(i)], n);
    }
  }
  return F;
}

EffectiveSpinModel sw_flipflop_params(const RamanDrive& drive,
                                      const CoolingRates& rates,
                                      const NormalModes& modes) {
  validate_drive(drive, rates, modes);
  const int ns = static_cast<int>(drive.sigma_positions.size());
  const int nm = static_cast<int>(drive.retained_modes.size());

  EffectiveSpinModel m;
  m.F = drive_couplings(drive, modes);
  ModeEnv env = mode_environment(drive, rates, /*require_cooling=*/true);
  m.delta_tilde = env.delta_tilde;
  m.W = env.W;
  m.nbar = env.nbar;

  m.J = Eigen::MatrixXcd::Zero(ns, ns);
  m.Gamma = Eigen::MatrixXcd::Zero(ns, ns);
  m.GammaPrime = Eigen::MatrixXcd::Zero(ns, ns);
  m.B_per_mode = Eigen::MatrixXd::Zero(ns, nm);
  m.B.assign(static_cast<std::size_t>(ns), 0.0);

  for (int k = 0; k < nm; ++k) {
    const double dt = env.delta_tilde[static_cast<std::size_t>(k)];
    const double W = env.W[static_cast<std::size_t>(k)];
    const double nb = env.nbar[static_cast<std::size_t>(k)];
    const double den = dt * dt + W * W;
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < ns; ++j) {
        const cplx ff = m.F(i, k) * std::conj(m.F(j, k));
        if (i != j) m.J(i, j) += -ff * (dt / den);
        m.Gamma(i, j) += ff * (W / den);
        m.GammaPrime(i, j) += ff * (W * nb / den);
      }
      const double f2 = std::norm(m.F(i, k));
      m.B_per_mode(i, k) = -f2 * dt * (2.0 * nb + 1.0) / den;
      m.B[static_cast<std::size_t>(i)] += m.B_per_mode(i, k);
    }
  }
  return m;
}

Generator build_effective_liouvillian(const EffectiveSpinModel& model) {
  const int ns = static_cast<int>(model.B.size());
  SpaceLayout sl;
  sl.n_spins = ns;

  Generator gen;
  gen.layout = sl;

  CsrMat H = CsrMat::zero(sl.dim(), sl.dim());
  std::vector<CsrMat> low, rai;
  for (int i = 0; i < ns; ++i) {
    low.push_back(sigma_minus(sl, i));
    rai.push_back(sigma_plus(sl, i));
  }
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < ns; ++j) {
      if (i == j) continue;
      if (model.J(i, j) == cplx(0.0)) continue;
      H = H.plus(rai[static_cast<std::size_t>(i)].matmul(
                     low[static_cast<std::size_t>(j)]),
                 model.J(i, j));
    }
    if (model.B[static_cast<std::size_t>(i)] != 0.0)
      H = H.plus(sigma_z(sl, i), 0.5 * model.B[static_cast<std::size_t>(i)]);
  }
  gen.H = H;

  const Eigen::MatrixXcd K_low = 2.0 * (model.Gamma + model.GammaPrime);
  const Eigen::MatrixXcd K_raise = 2.0 * model.GammaPrime;
  for (auto& ch : kossakowski_channels(K_low, low))
    gen.channels.push_back(std::move(ch));
  for (auto& ch : kossakowski_channels(K_raise, rai))
    gen.channels.push_back(std::move(ch));
  gen.warnings = model.warnings;
  gen.finalize();
  return gen;
}

CollectiveJumps collective_jump_operators(const EffectiveSpinModel& model,
                                          int parity) {
  const int ns = static_cast<int>(model.B.size());
  if (ns != 2)
    throw ConfigError("collective jump operators require exactly two ions");
  const double g0 = model.Gamma(0, 0).real();
  const double g1 = model.Gamma(1, 1).real();
  const double tol = 1e-8 * std::max({std::abs(g0), std::abs(g1), 1e-300});
  if (std::abs(g0 - g1) > tol)
    throw NumericalError("asymmetric configuration: Gamma_11 != Gamma_33, "
                         "collective jump-operator form invalid");
  const double gamma_eff = 0.5 * (g0 + g1);
  const double gp = 0.5 * (model.GammaPrime(0, 0) + model.GammaPrime(1, 1)).real();
  const double nbar = gamma_eff > 0 ? gp / gamma_eff : 0.0;
  const double sgn = (parity % 2 == 0) ? 1.0 : -1.0;

  SpaceLayout sl;
  sl.n_spins = 2;
  CollectiveJumps cj;
  cj.rate_lower = gamma_eff * (nbar + 1.0);
  cj.rate_raise = gamma_eff * nbar;
  const double amp_low = std::sqrt(std::max(cj.rate_lower, 0.0));
  const double amp_rai = std::sqrt(std::max(cj.rate_raise, 0.0));
  cj.lower = sigma_minus(sl, 0).scaled(amp_low).plus(sigma_minus(sl, 1),
                                                     sgn * amp_low);
  cj.raise = sigma_plus(sl, 0).scaled(amp_rai).plus(sigma_plus(sl, 1),
                                                    sgn * amp_rai);
  return cj;
}

DrivenIsingModel sw_ising_params(const RamanDrive& drive,
                                 const CoolingRates& rates,
                                 const NormalModes& modes, double Omega_d) {
  validate_drive(drive, rates, modes);
  if (!(Omega_d > 0)) throw ConfigError("Omega_d must be positive");
  const int ns = static_cast<int>(drive.sigma_positions.size());
  const int nm = static_cast<int>(drive.retained_modes.size());

  DrivenIsingModel m;
  m.Omega_d = Omega_d;
  const Eigen::MatrixXcd F = drive_couplings(drive, modes);
  ModeEnv env = mode_environment(drive, rates, /*require_cooling=*/true);
  m.delta_tilde = env.delta_tilde;
  m.W = env.W;
  m.nbar = env.nbar;

  m.J = Eigen::MatrixXd::Zero(ns, ns);
  m.G = Eigen::MatrixXd::Zero(ns, ns);
  double env_scale = 0.0;
  for (int k = 0; k < nm; ++k) {
    const double dt = env.delta_tilde[static_cast<std::size_t>(k)];
    const double W = env.W[static_cast<std::size_t>(k)];
    const double nb = env.nbar[static_cast<std::size_t>(k)];
    const double den = dt * dt + W * W;
    env_scale = std::max(env_scale, std::sqrt(den));
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < ns; ++j) {
        const double ff = std::abs(F(i, k) * std::conj(F(j, k)));
        if (i != j) m.J(i, j) += -ff * dt / (2.0 * den);
        m.G(i, j) += ff * W * (nb + 0.5) / den;
      }
    }
  }
  if (env_scale > 0.1 * Omega_d) {
    std::ostringstream os;
    os << "driving not strong: max sqrt(delta_tilde^2 + W^2) = " << env_scale
       << " exceeds 0.1 * Omega_d = " << 0.1 * Omega_d
       << "; secular approximation degraded";
    m.warnings.push_back(os.str());
  }
  return m;
}

Generator build_ising_liouvillian(const DrivenIsingModel& model) {
  const int ns = static_cast<int>(model.J.rows());
  SpaceLayout sl;
  sl.n_spins = ns;

  Generator gen;
  gen.layout = sl;
  gen.warnings = model.warnings;

  std::vector<CsrMat> sx;
  for (int i = 0; i < ns; ++i) sx.push_back(sigma_x(sl, i));

  CsrMat H = CsrMat::zero(sl.dim(), sl.dim());
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < i; ++j)
      if (model.J(i, j) != 0.0)
        H = H.plus(sx[static_cast<std::size_t>(i)].matmul(
                       sx[static_cast<std::size_t>(j)]),
                   model.J(i, j));
    if (model.Omega_d != 0.0)
      H = H.plus(sx[static_cast<std::size_t>(i)], 0.5 * model.Omega_d);
  }
  gen.H = H;

  const Eigen::MatrixXcd K = 2.0 * model.G.cast<cplx>();
  for (auto& ch : kossakowski_channels(K, sx))
    gen.channels.push_back(std::move(ch));
  gen.finalize();
  return gen;
}

DressedNoise dressed_noise_params(double B_eff, double delta_tilde,
                                  double tau_c, double Gamma_d,
                                  double Omega_d) {
  if (!(tau_c > 0)) throw ConfigError("tau_c must be positive");
  if (!(Omega_d > 0)) throw ConfigError("Omega_d must be positive");
  if (Gamma_d < 0) throw ConfigError("Gamma_d must be >= 0");
  DressedNoise out;
  out.Omega_d_tilde =
      (B_eff * delta_tilde * tau_c + Gamma_d) / (2.0 * Omega_d * tau_c);
  const double x = Omega_d * tau_c;
  out.Gamma_d_tilde = Gamma_d / (x * x);
  out.weak_driving_warning = x < 10.0;
  return out;
}

void add_dressed_dephasing(Generator& gen, double Gamma_d_tilde) {
  if (Gamma_d_tilde < 0) throw ConfigError("Gamma_d_tilde must be >= 0");
  if (Gamma_d_tilde == 0.0) return;
  if (!gen.layout.fock_dims.empty())
    throw ConfigError("dressed dephasing applies to spin-only generators");
  for (int i = 0; i < gen.layout.n_spins; ++i) {
    gen.channels.push_back(Channel{sigma_y(gen.layout, i), 0.5 * Gamma_d_tilde});
    gen.channels.push_back(Channel{sigma_z(gen.layout, i), 0.5 * Gamma_d_tilde});
  }
  gen.finalized = false;
}

void add_markovian_dephasing(Generator& gen, double Gamma_d) {
  if (Gamma_d < 0) throw ConfigError("Gamma_d must be >= 0");
  if (Gamma_d == 0.0) return;
  for (int i = 0; i < gen.layout.n_spins; ++i)
    gen.channels.push_back(Channel{sigma_z(gen.layout, i), Gamma_d});
  gen.finalized = false;
}

void add_ou_dephasing_pattern(Generator& gen) {
  std::vector<double> diag(static_cast<std::size_t>(gen.dim()), 0.0);
  for (int i = 0; i < gen.layout.n_spins; ++i) {
    const CsrMat sz = sigma_z(gen.layout, i);
    // sigma_z is diagonal; accumulate 1/2 * diag entries.
    for (int r = 0; r < sz.rows; ++r)
      for (int k = sz.ptr[r]; k < sz.ptr[r + 1]; ++k)
        diag[static_cast<std::size_t>(r)] +=
            0.5 * sz.val[static_cast<std::size_t>(k)].real();
  }
  gen.noise_patterns.push_back(std::move(diag));
  gen.finalized = false;
}

} // namespace ionsim
