#include "ionsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ionsim/errors.hpp"
#include "ionsim/superop.hpp"

namespace ionsim {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA2[1] = {1.0 / 5};
constexpr double kA3[2] = {3.0 / 40, 9.0 / 40};
constexpr double kA4[3] = {44.0 / 45, -56.0 / 15, 32.0 / 9};
constexpr double kA5[4] = {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561,
                           -212.0 / 729};
constexpr double kA6[5] = {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247,
                           49.0 / 176, -5103.0 / 18656};
constexpr double kB[7] = {35.0 / 384,    0.0, 500.0 / 1113, 125.0 / 192,
                          -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double kE[7] = {71.0 / 57600,      0.0,        -71.0 / 16695,
                          71.0 / 1920,       -17253.0 / 339200,
                          22.0 / 525,        -1.0 / 40};

class Dp5 {
public:
  Dp5(const Generator& gen, const SolverConfig& cfg)
      : gen_(gen), cfg_(cfg), scale_(gen.scale()) {
    const std::size_t nn =
        static_cast<std::size_t>(gen.dim()) * static_cast<std::size_t>(gen.dim());
    for (auto& k : k_) k.assign(nn, cplx(0.0));
    ytmp_.assign(nn, cplx(0.0));
    err_.assign(nn, cplx(0.0));
    ynew_.assign(nn, cplx(0.0));
  }

  void set_state(const std::vector<cplx>& y, double t) {
    y_ = y;
    t_ = t;
    have_k1_ = false;
    h_ = 0.0;
  }

  std::vector<cplx>& state() { return y_; }
  double t() const { return t_; }

  void invalidate_fsal() { have_k1_ = false; }

  void advance_to(double target, const double* noise) {
    const std::size_t nn = y_.size();
    if (target < t_) throw NumericalError("integrator: backward step requested");
    while (t_ < target) {
      if (!have_k1_) {
        gen_.apply(y_.data(), k_[0].data(), ws_, noise);
        have_k1_ = true;
      }
      if (h_ <= 0.0) h_ = initial_step(target);
      double h = std::min(h_, target - t_);
      if (cfg_.max_step > 0) h = std::min(h, cfg_.max_step);
      const double hmin =
          16.0 * 2.220446049250313e-16 * std::max(std::abs(t_), std::abs(target));
      if (h <= hmin) {
        std::ostringstream os;
        os << "integrator step size underflow at t=" << t_ << " (h=" << h
           << ", err_norm=" << last_err_ << "); tolerances unreachable";
        throw NumericalError(os.str());
      }

      stage(1, h, kA2, 1, noise);
      stage(2, h, kA3, 2, noise);
      stage(3, h, kA4, 3, noise);
      stage(4, h, kA5, 4, noise);
      stage(5, h, kA6, 5, noise);

      // 5th-order solution.
      std::memcpy(ynew_.data(), y_.data(), nn * sizeof(cplx));
      for (int j = 0; j < 7; ++j)
        if (kB[j] != 0.0)
          kern::zaxpy(nn, cplx(h * kB[j]), k_[j].data(), ynew_.data());
      // FSAL stage k7 = f(t+h, ynew).
      gen_.apply(ynew_.data(), k_[6].data(), ws_, noise);

      std::fill(err_.begin(), err_.end(), cplx(0.0));
      for (int j = 0; j < 7; ++j)
        if (kE[j] != 0.0)
          kern::zaxpy(nn, cplx(h * kE[j]), k_[j].data(), err_.data());
      double enorm = kern::rk_err_norm(nn, err_.data(), y_.data(), ynew_.data(),
                                       cfg_.abs_tol, cfg_.rel_tol);
      last_err_ = enorm;

      if (!std::isfinite(enorm)) {
        h_ = 0.2 * h;
        rejected_ = true;
        continue;
      }
      if (enorm <= 1.0) {
        y_.swap(ynew_);
        k_[0].swap(k_[6]);
        t_ += h;
        double fac = 0.9 * std::pow(std::max(enorm, 1e-10), -0.2);
        fac = std::clamp(fac, 0.2, 5.0);
        if (rejected_) fac = std::min(fac, 1.0);
        rejected_ = false;
        h_ = h * fac;
      } else {
        const double fac =
            std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 1.0);
        h_ = h * fac;
        rejected_ = true;
      }
    }
  }

private:
  double initial_step(double target) const {
    const double span = std::max(target - t_, 0.0);
    double h0 = 0.05 / scale_;
    if (span > 0) h0 = std::min(h0, span);
    return std::max(h0, 1e-300);
  }

  // Builds ytmp = y + h * sum_j a[j] k_j and evaluates k_[s] there.  The last
  // stage (s = 5) is evaluated at t + h, matching c6 = 1.
  void stage(int s, double h, const double* a, int na, const double* noise) {
    const std::size_t nn = y_.size();
    std::memcpy(ytmp_.data(), y_.data(), nn * sizeof(cplx));
    for (int j = 0; j < na; ++j)
      if (a[j] != 0.0)
        kern::zaxpy(nn, cplx(h * a[j]), k_[j].data(), ytmp_.data());
    gen_.apply(ytmp_.data(), k_[s].data(), ws_, noise);
  }

  const Generator& gen_;
  SolverConfig cfg_;
  double scale_;
  std::vector<cplx> y_, ytmp_, err_, ynew_;
  std::vector<cplx> k_[7];
  mutable Generator::Workspace ws_;
  double t_ = 0.0;
  double h_ = 0.0;
  double last_err_ = 0.0;
  bool have_k1_ = false;
  bool rejected_ = false;
};

double min_eigenvalue(const DensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.to_eigen(),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_monitors(const Generator& gen, const DensityMatrix& rho, double t,
                    const Monitors& mon, double* leak_out) {
  const double tr = rho.trace().real();
  double leak = 0.0;
  if (!gen.layout.fock_dims.empty()) leak = fock_leak(gen.layout, rho);
  if (leak_out) *leak_out = leak;
  if (!mon.enforce) return;
  if (std::abs(tr - 1.0) > mon.trace_tol) {
    std::ostringstream os;
    os << "trace drift |tr-1| = " << std::abs(tr - 1.0) << " at t = " << t;
    throw NumericalError(os.str());
  }
  const double me = min_eigenvalue(rho);
  if (me < mon.min_eig_tol) {
    std::ostringstream os;
    os << "negative density-matrix eigenvalue " << me << " at t = " << t;
    throw NumericalError(os.str());
  }
  if (!gen.layout.fock_dims.empty() && leak > gen.leak_threshold) {
    std::ostringstream os;
    os << "Fock truncation leak " << leak << " exceeds threshold "
       << gen.leak_threshold << " at t = " << t;
    throw NumericalError(os.str());
  }
}

DensityMatrix wrap_state(const Generator& gen, const std::vector<cplx>& y) {
  DensityMatrix rho;
  rho.n = gen.dim();
  rho.a = y;
  return rho;
}

void init_series(const Generator& gen, const ObservableSpec& obs,
                 std::size_t nt, TimeSeries& ts) {
  ts.p_up.assign(static_cast<std::size_t>(gen.layout.n_spins), {});
  ts.mode_occ.assign(static_cast<std::size_t>(gen.layout.n_modes()), {});
  for (auto& v : ts.p_up) v.reserve(nt);
  for (auto& v : ts.mode_occ) v.reserve(nt);
  ts.fidelity_names.clear();
  ts.expect_names.clear();
  for (const auto& f : obs.fidelity_targets) ts.fidelity_names.push_back(f.first);
  for (const auto& e : obs.expectations) ts.expect_names.push_back(e.first);
  ts.fidelity.assign(obs.fidelity_targets.size(), {});
  ts.expect.assign(obs.expectations.size(), {});
  ts.trace.reserve(nt);
  ts.min_eig.reserve(nt);
  ts.leak.reserve(nt);
}

double expectation(const CsrMat& op, const DensityMatrix& rho) {
  // Re tr(Op rho) = Re sum_{i,k} Op_ik rho_ki
  double acc = 0.0;
  for (int i = 0; i < op.rows; ++i)
    for (int k = op.ptr[i]; k < op.ptr[i + 1]; ++k)
      acc += (op.val[static_cast<std::size_t>(k)] * rho(op.col[static_cast<std::size_t>(k)], i)).real();
  return acc;
}

// Appends one output point's observables; returns the leak value.
void eval_point(const Generator& gen, const DensityMatrix& rho, double t,
                const ObservableSpec& obs, const Monitors& mon,
                TimeSeries& ts) {
  double leak = 0.0;
  check_monitors(gen, rho, t, mon, &leak);
  ts.t.push_back(t);
  ts.trace.push_back(rho.trace().real());
  ts.min_eig.push_back(min_eigenvalue(rho));
  ts.leak.push_back(leak);
  const bool has_modes = !gen.layout.fock_dims.empty();
  DensityMatrix rs;
  if (!obs.fidelity_targets.empty() && has_modes)
    rs = reduce_spins(gen.layout, rho);
  for (int q = 0; q < gen.layout.n_spins; ++q)
    ts.p_up[static_cast<std::size_t>(q)].push_back(p_up(gen.layout, rho, q));
  for (int m = 0; m < gen.layout.n_modes(); ++m)
    ts.mode_occ[static_cast<std::size_t>(m)].push_back(
        mode_occupation(gen.layout, rho, m));
  for (std::size_t i = 0; i < obs.fidelity_targets.size(); ++i)
    ts.fidelity[i].push_back(
        fidelity(has_modes ? rs : rho, obs.fidelity_targets[i].second));
  for (std::size_t i = 0; i < obs.expectations.size(); ++i)
    ts.expect[i].push_back(expectation(obs.expectations[i].second, rho));
  if (obs.record_states) ts.states.push_back(rho);
}

void validate_grid(const std::vector<double>& grid) {
  if (grid.size() < 2) throw ConfigError("output grid needs at least 2 points");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i] < grid[i + 1]))
      throw ConfigError("output grid must be strictly increasing");
  if (grid.front() < 0) throw ConfigError("output grid must start at t >= 0");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream) {
  // Deterministic (master, stream) -> seed splitting.
  const std::uint64_t s =
      splitmix64(splitmix64(master) ^ splitmix64(0xA3C59AC2ULL + stream));
  return std::mt19937_64(s);
}

} // namespace

TimeSeries evolve(const Generator& gen, const DensityMatrix& rho0,
                  const std::vector<double>& grid, const SolverConfig& cfg,
                  const ObservableSpec& obs, const Monitors& mon) {
  validate_grid(grid);
  if (rho0.n != gen.dim()) throw NumericalError("evolve: dimension mismatch");
  if (!gen.noise_patterns.empty())
    throw NumericalError("evolve: generator has stochastic noise patterns; "
                         "use trajectory_average");

  TimeSeries ts;
  init_series(gen, obs, grid.size(), ts);

  Dp5 solver(gen, cfg);
  solver.set_state(rho0.a, grid.front());
  eval_point(gen, rho0, grid.front(), obs, mon, ts);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    solver.advance_to(grid[i], nullptr);
    const DensityMatrix rho = wrap_state(gen, solver.state());
    eval_point(gen, rho, grid[i], obs, mon, ts);
  }
  return ts;
}

DensityMatrix evolve_to(const Generator& gen, const DensityMatrix& rho0,
                        double t0, double t1, const SolverConfig& cfg,
                        const double* noise) {
  if (rho0.n != gen.dim()) throw NumericalError("evolve_to: dimension mismatch");
  Dp5 solver(gen, cfg);
  solver.set_state(rho0.a, t0);
  solver.advance_to(t1, noise);
  return wrap_state(gen, solver.state());
}

double fidelity(const DensityMatrix& rho, const std::vector<cplx>& psi) {
  if (static_cast<int>(psi.size()) != rho.n)
    throw NumericalError("fidelity: dimension mismatch");
  cplx acc(0.0);
  for (int i = 0; i < rho.n; ++i) {
    if (psi[static_cast<std::size_t>(i)] == cplx(0.0)) continue;
    for (int j = 0; j < rho.n; ++j)
      acc += std::conj(psi[static_cast<std::size_t>(i)]) * rho(i, j) *
             psi[static_cast<std::size_t>(j)];
  }
  return std::abs(acc);
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.n != b.n) throw NumericalError("trace_distance: dimension mismatch");
  Eigen::MatrixXcd d = a.to_eigen() - b.to_eigen();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(d, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

SteadyResult steady_state(const Generator& gen, const SolverConfig& cfg) {
  SteadyResult out;
  const int d = gen.dim();
  if (!gen.noise_patterns.empty())
    throw NumericalError("steady_state: stochastic generator has no "
                         "deterministic steady state");

  if (gen.layout.fock_dims.empty() && d <= 16) {
    out.method = "nullspace";
    const Eigen::MatrixXcd S = assemble_superop(gen);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(S);
    if (es.info() != Eigen::Success)
      throw NumericalError("steady_state: superoperator eigensolve failed");
    const auto& lam = es.eigenvalues();
    const double sc = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
    const double tol_null = 1e-10 * sc;
    double slowest = 0.0;
    bool have_slowest = false;
    for (Eigen::Index k = 0; k < lam.size(); ++k) {
      if (std::abs(lam[k]) <= tol_null) {
        Eigen::VectorXcd v = es.eigenvectors().col(k);
        Eigen::MatrixXcd m = Eigen::Map<Eigen::MatrixXcd>(v.data(), d, d);
        DensityMatrix rho = DensityMatrix::from_eigen(m);
        rho.hermitize();
        const double tr = rho.trace().real();
        if (std::abs(tr) > 1e-8) {
          for (cplx& x : rho.a) x /= tr;
        }
        out.states.push_back(std::move(rho));
      } else {
        const double rate = -lam[k].real();
        if (rate > tol_null && (!have_slowest || rate < slowest)) {
          slowest = rate;
          have_slowest = true;
        }
      }
    }
    if (out.states.empty())
      throw NumericalError("steady_state: no null vector found");
    out.degenerate = out.states.size() > 1;
    out.slowest_rate = have_slowest ? slowest : 0.0;
    return out;
  }

  // Long-time evolution from the maximally mixed state with a relative
  // derivative-norm convergence check.
  out.method = "longtime";
  const double sc = gen.scale();
  const double thresh = 1e-10 * sc;
  DensityMatrix rho = DensityMatrix::identity(d);
  for (cplx& x : rho.a) x /= static_cast<double>(d);
  Generator::Workspace ws;
  std::vector<cplx> deriv(rho.a.size());
  double T = 1.0 / sc;
  for (int iter = 0; iter < 48; ++iter) {
    rho = evolve_to(gen, rho, 0.0, T, cfg);
    rho.hermitize();
    gen.apply(rho.a.data(), deriv.data(), ws);
    DensityMatrix dmat;
    dmat.n = d;
    dmat.a = deriv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dmat.to_eigen(),
                                                       Eigen::EigenvaluesOnly);
    const double dnorm = es.eigenvalues().cwiseAbs().sum();
    if (dnorm <= thresh) {
      const double tr = rho.trace().real();
      for (cplx& x : rho.a) x /= tr;
      out.states.push_back(std::move(rho));
      return out;
    }
    T *= 2.0;
  }
  throw NumericalError("steady_state: long-time evolution did not converge");
}

std::vector<double> ou_sample(const OUNoise& noise, double dt,
                              std::size_t n_steps, std::uint64_t stream) {
  if (!(noise.tau_c > 0)) throw ConfigError("ou_sample: tau_c must be positive");
  if (noise.Gamma_d < 0) throw ConfigError("ou_sample: Gamma_d must be >= 0");
  if (!(dt > 0)) throw ConfigError("ou_sample: dt must be positive");
  if (dt > noise.tau_c / 10.0)
    std::fprintf(stderr,
                 "ionsim: ou_sample dt = %g exceeds tau_c/10 = %g; correlation "
                 "undersampled\n",
                 dt, noise.tau_c / 10.0);
  const double sigma = std::sqrt(2.0 * noise.Gamma_d / noise.tau_c);
  const double alpha = std::exp(-dt / noise.tau_c);
  const double beta = sigma * std::sqrt(1.0 - alpha * alpha);
  std::mt19937_64 rng = make_rng(noise.seed, stream);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> f(n_steps);
  double x = sigma * nd(rng);
  for (std::size_t i = 0; i < n_steps; ++i) {
    f[i] = x;
    x = alpha * x + beta * nd(rng);
  }
  return f;
}

TimeSeries trajectory_average(const Generator& gen, const OUNoise& noise,
                              const DensityMatrix& rho0, int n_traj,
                              const std::vector<double>& grid,
                              const SolverConfig& cfg,
                              const ObservableSpec& obs, const Monitors& mon) {
  validate_grid(grid);
  if (n_traj < 2)
    throw ConfigError("trajectory_average: n_traj must be at least 2");
  if (gen.noise_patterns.empty())
    throw ConfigError("trajectory_average: generator has no noise patterns");
  if (!(noise.tau_c > 0))
    throw ConfigError("trajectory_average: tau_c must be positive");
  const std::size_t n_src = gen.noise_patterns.size();
  const std::size_t nt = grid.size();

  // Welford accumulators per (observable, time).
  struct Acc {
    std::vector<double> mean, m2;
  };
  auto make_acc = [nt]() { return Acc{std::vector<double>(nt, 0.0), std::vector<double>(nt, 0.0)}; };
  std::vector<Acc> acc_pup(static_cast<std::size_t>(gen.layout.n_spins));
  for (auto& a : acc_pup) a = make_acc();
  std::vector<Acc> acc_fid(obs.fidelity_targets.size());
  for (auto& a : acc_fid) a = make_acc();
  std::vector<Acc> acc_exp(obs.expectations.size());
  for (auto& a : acc_exp) a = make_acc();
  std::vector<Acc> acc_occ(static_cast<std::size_t>(gen.layout.n_modes()));
  for (auto& a : acc_occ) a = make_acc();

  std::vector<DensityMatrix> mean_rho(nt, DensityMatrix::zero(gen.dim()));

  const double sigma = std::sqrt(2.0 * noise.Gamma_d / noise.tau_c);
  const double dt_macro_max = noise.tau_c / 10.0;

  Dp5 solver(gen, cfg);
  std::vector<double> fvals(n_src, 0.0);

  const bool has_modes = !gen.layout.fock_dims.empty();
  for (int traj = 0; traj < n_traj; ++traj) {
    std::mt19937_64 rng = make_rng(noise.seed, static_cast<std::uint64_t>(traj));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t s = 0; s < n_src; ++s) fvals[s] = sigma * nd(rng);

    solver.set_state(rho0.a, grid.front());
    const double kinv = 1.0 / static_cast<double>(traj + 1);

    for (std::size_t gi = 0; gi < nt; ++gi) {
      if (gi > 0) {
        const double t0 = grid[gi - 1], t1 = grid[gi];
        const int nsub = std::max(
            1, static_cast<int>(std::ceil((t1 - t0) / dt_macro_max)));
        const double dt = (t1 - t0) / nsub;
        const double alpha = std::exp(-dt / noise.tau_c);
        const double beta = sigma * std::sqrt(1.0 - alpha * alpha);
        for (int ss = 0; ss < nsub; ++ss) {
          solver.invalidate_fsal();
          solver.advance_to(t0 + (ss + 1) * dt, fvals.data());
          for (std::size_t s = 0; s < n_src; ++s)
            fvals[s] = alpha * fvals[s] + beta * nd(rng);
        }
      }
      const DensityMatrix rho = wrap_state(gen, solver.state());
      double leak = 0.0;
      check_monitors(gen, rho, grid[gi], mon, &leak);

      DensityMatrix rs;
      if (!obs.fidelity_targets.empty() && has_modes)
        rs = reduce_spins(gen.layout, rho);
      auto welford = [&](Acc& a, std::size_t ti, double x) {
        const double d1 = x - a.mean[ti];
        a.mean[ti] += d1 * kinv;
        a.m2[ti] += d1 * (x - a.mean[ti]);
      };
      for (int q = 0; q < gen.layout.n_spins; ++q)
        welford(acc_pup[static_cast<std::size_t>(q)], gi,
                p_up(gen.layout, rho, q));
      for (int m = 0; m < gen.layout.n_modes(); ++m)
        welford(acc_occ[static_cast<std::size_t>(m)], gi,
                mode_occupation(gen.layout, rho, m));
      for (std::size_t fi = 0; fi < obs.fidelity_targets.size(); ++fi)
        welford(acc_fid[fi], gi,
                fidelity(has_modes ? rs : rho, obs.fidelity_targets[fi].second));
      for (std::size_t ei = 0; ei < obs.expectations.size(); ++ei)
        welford(acc_exp[ei], gi, expectation(obs.expectations[ei].second, rho));
      kern::zaxpy(mean_rho[gi].a.size(), cplx(1.0 / n_traj), rho.a.data(),
                  mean_rho[gi].a.data());
    }
  }

  TimeSeries ts;
  init_series(gen, obs, nt, ts);
  ts.n_traj = n_traj;
  const double se_norm =
      1.0 / (static_cast<double>(n_traj) * (static_cast<double>(n_traj) - 1.0));
  auto se_of = [&](const Acc& a, std::size_t ti) {
    return std::sqrt(std::max(a.m2[ti], 0.0) * se_norm);
  };
  ts.p_up_se.assign(acc_pup.size(), std::vector<double>(nt, 0.0));
  ts.fidelity_se.assign(acc_fid.size(), std::vector<double>(nt, 0.0));
  ts.expect_se.assign(acc_exp.size(), std::vector<double>(nt, 0.0));
  for (std::size_t gi = 0; gi < nt; ++gi) {
    ts.t.push_back(grid[gi]);
    ts.trace.push_back(mean_rho[gi].trace().real());
    ts.min_eig.push_back(min_eigenvalue(mean_rho[gi]));
    ts.leak.push_back(has_modes ? fock_leak(gen.layout, mean_rho[gi]) : 0.0);
    for (std::size_t q = 0; q < acc_pup.size(); ++q) {
      ts.p_up[q].push_back(acc_pup[q].mean[gi]);
      ts.p_up_se[q][gi] = se_of(acc_pup[q], gi);
    }
    for (std::size_t m = 0; m < acc_occ.size(); ++m)
      ts.mode_occ[m].push_back(acc_occ[m].mean[gi]);
    for (std::size_t fi = 0; fi < acc_fid.size(); ++fi) {
      ts.fidelity[fi].push_back(acc_fid[fi].mean[gi]);
      ts.fidelity_se[fi][gi] = se_of(acc_fid[fi], gi);
    }
    for (std::size_t ei = 0; ei < acc_exp.size(); ++ei) {
      ts.expect[ei].push_back(acc_exp[ei].mean[gi]);
      ts.expect_se[ei][gi] = se_of(acc_exp[ei], gi);
    }
  }
  return ts;
}

std::pair<double, double> refine_fidelity_max(
    const Generator& gen, const DensityMatrix& rho_at_a, double t_a,
    double t_b, const std::vector<cplx>& target_spin, const SolverConfig& cfg) {
  if (!(t_b > t_a)) throw ConfigError("refine_fidelity_max: empty window");
  const bool has_modes = !gen.layout.fock_dims.empty();
  auto eval = [&](double t) {
    if (t <= t_a) t = t_a;
    DensityMatrix r = evolve_to(gen, rho_at_a, t_a, t, cfg);
    if (has_modes) {
      DensityMatrix rs = reduce_spins(gen.layout, r);
      return fidelity(rs, target_spin);
    }
    return fidelity(r, target_spin);
  };

  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = t_a, b = t_b;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = eval(x1), f2 = eval(x2);
  const double tol = std::max(1e-6 * (t_b - t_a), 1e-12);
  int iter = 0;
  while (b - a > tol && iter++ < 80) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = eval(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = eval(x1);
    }
  }
  const double t_opt = 0.5 * (a + b);
  return {t_opt, eval(t_opt)};
}

} // namespace ionsim
