#include "ionsim/crystal.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ionsim/constants.hpp"
#include "ionsim/errors.hpp"

namespace ionsim {

namespace {

// Dimensionless net force component: g_i = u_i - sum_{j!=i} sgn(u_i-u_j)/(u_i-u_j)^2.
Eigen::VectorXd residual(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::VectorXd g = u;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = u[i] - u[j];
      g[i] -= (d > 0 ? 1.0 : -1.0) / (d * d);
    }
  }
  return g;
}

// Jacobian of the residual = dimensionless Hessian of the potential.
Eigen::MatrixXd hessian(const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    double diag = 1.0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = std::abs(u[i] - u[j]);
      const double w = 2.0 / (d * d * d);
      diag += w;
      A(i, j) = -w;
    }
    A(i, i) = diag;
  }
  return A;
}

void validate_chain(const IonChain& chain) {
  if (chain.ions.empty()) throw ConfigError("chain must contain at least one ion");
  if (!(chain.omega_z > 0)) throw ConfigError("omega_z must be positive");
  if (!(chain.reference_mass_kg > 0))
    throw ConfigError("reference mass must be positive");
  for (const IonSpecies& ion : chain.ions)
    if (!(ion.mass_kg > 0)) throw ConfigError("ion masses must be positive");
}

} // namespace

EquilibriumConfig solve_equilibrium(const IonChain& chain) {
  validate_chain(chain);
  const int n = static_cast<int>(chain.ions.size());

  const double q = chain.charge * k_elem_charge;
  const double k_trap = chain.reference_mass_kg * chain.omega_z * chain.omega_z;
  const double ell =
      std::cbrt(q * q / (4.0 * k_pi * k_eps0 * k_trap));

  EquilibriumConfig eq;
  eq.length_unit = ell;
  if (n == 1) {
    eq.u = {0.0};
    return eq;
  }

  // Equally spaced seed roughly matching the equilibrium extent.
  Eigen::VectorXd u(n);
  const double half_span = 1.1 * std::pow(static_cast<double>(n), 0.56);
  for (int i = 0; i < n; ++i)
    u[i] = -half_span + 2.0 * half_span * i / (n - 1);

  const double tol = 1e-12;
  bool converged = false;
  double res_norm = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd g = residual(u);
    res_norm = g.cwiseAbs().maxCoeff();
    if (res_norm < tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd step = hessian(u).partialPivLu().solve(g);
    // Backtracking keeps the ordering intact and the residual decreasing.
    double lambda = 1.0;
    for (int bt = 0; bt < 40; ++bt) {
      Eigen::VectorXd trial = u - lambda * step;
      bool ordered = true;
      for (int i = 0; i + 1 < n; ++i)
        if (!(trial[i] < trial[i + 1])) ordered = false;
      if (ordered &&
          residual(trial).cwiseAbs().maxCoeff() < res_norm * (1.0 - 1e-4 * lambda)) {
        u = trial;
        break;
      }
      lambda *= 0.5;
      if (bt == 39) u = u - lambda * step; // last resort: tiny step
    }
  }
  if (!converged) {
    const double final_res = residual(u).cwiseAbs().maxCoeff();
    if (final_res >= tol) {
      std::ostringstream os;
      os << "equilibrium solve did not converge; final residual " << final_res;
      throw NumericalError(os.str());
    }
  }
  eq.u.assign(u.data(), u.data() + n);
  return eq;
}

NormalModes compute_modes(const IonChain& chain, const EquilibriumConfig& eq) {
  validate_chain(chain);
  const int n = static_cast<int>(chain.ions.size());
  if (static_cast<int>(eq.u.size()) != n)
    throw ConfigError("equilibrium size does not match chain size");

  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) u[i] = eq.u[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd A = hessian(u);

  // Mass-weighted dynamical matrix D_ij = k_trap A_ij / sqrt(m_i m_j).
  const double k_trap = chain.reference_mass_kg * chain.omega_z * chain.omega_z;
  Eigen::MatrixXd D(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      D(i, j) = k_trap * A(i, j) /
                std::sqrt(chain.ions[static_cast<std::size_t>(i)].mass_kg *
                          chain.ions[static_cast<std::size_t>(j)].mass_kg);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
  if (es.info() != Eigen::Success)
    throw NumericalError("mode eigensolve failed");

  NormalModes modes;
  modes.omega.resize(static_cast<std::size_t>(n));
  modes.M = es.eigenvectors(); // ascending eigenvalues
  for (int k = 0; k < n; ++k) {
    const double lam = es.eigenvalues()[k];
    if (!(lam > 0))
      throw NumericalError("unstable configuration: non-positive mode "
                           "eigenvalue");
    modes.omega[static_cast<std::size_t>(k)] = std::sqrt(lam);
    // Sign fix: largest-magnitude entry of each column positive.
    int imax = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(modes.M(i, k)) > std::abs(modes.M(imax, k))) imax = i;
    if (modes.M(imax, k) < 0) modes.M.col(k) *= -1.0;
  }
  return modes;
}

double lamb_dicke(double k, double projection, double mass_kg, double omega_n) {
  if (!(k > 0) || !(mass_kg > 0) || !(omega_n > 0))
    throw ConfigError("lamb_dicke: k, mass and omega must be positive");
  if (projection < -1.0 || projection > 1.0)
    throw ConfigError("lamb_dicke: projection must lie in [-1, 1]");
  return k * projection * std::sqrt(k_hbar / (2.0 * mass_kg * omega_n));
}

std::vector<int> sigma_indices(const IonChain& chain) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(chain.ions.size()); ++i)
    if (chain.ions[static_cast<std::size_t>(i)].role == IonSpecies::Role::sigma)
      idx.push_back(i);
  return idx;
}

std::vector<int> tau_indices(const IonChain& chain) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(chain.ions.size()); ++i)
    if (chain.ions[static_cast<std::size_t>(i)].role == IonSpecies::Role::tau)
      idx.push_back(i);
  return idx;
}

} // namespace ionsim
