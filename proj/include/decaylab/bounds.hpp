#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "decaylab/check_result.hpp"
#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/integrals.hpp"
#include "decaylab/mode_solver.hpp"
#include "decaylab/numerics/parallel.hpp"
#include "decaylab/stabilization.hpp"

namespace decaylab {

/// gamma(t;m) = int_0^t (1+s)^{-m} ds.
inline double gamma_tm(double t, double m) {
  const double L = std::log1p(t);
  if (m == 1.0) return L;
  return std::expm1((1.0 - m) * L) / (1.0 - m);
}

/// Constant with ((1+t)^{-1} gamma(t;m))^2 <= C_m (1+t)^{-min(2,m)} for m >= 1 branches and
/// (1+t)^{-m} for m < 1.
inline double C_m(double m) {
  if (!(m > 0.0)) throw PreconditionError("C_m needs m > 0");
  if (m > 1.0) return 1.0 / ((m - 1.0) * (m - 1.0));
  if (m == 1.0) return 4.0 * std::exp(-2.0);
  return 1.0 / ((1.0 - m) * (1.0 - m));
}

/// Largest admissible decay exponent: min{2,m} for the non-negative regime, m otherwise.
inline double m_bar0(Regime r, double m) { return r == Regime::NonNegative ? std::min(2.0, m) : m; }

struct BoundConstants {
  DissipativeCoefficient coeff;
  Regime regime = Regime::NonNegative;
  double m = 0.0;
  double N = 1.0;
  double eps = 1.0;
  double kappa = 0.0;
  double tau_N_kappa = 0.0;
  double mu_tau = 0.0;  // mu(tau_{N,kappa})
  double A1 = 0.0;
  double b1 = 0.0;
  double B0_cert = 0.0;
  double omega0 = 1.0, omega1 = 1.0, omega_at_0 = 1.0;
  double K_H = 1.0, K_H_gevrey = 1.0;
  double K1 = 0.0, K2 = 0.0;
  double K_D = 0.0;
  double C_m = 0.0;
  double m_bar0 = 0.0;
  double K_D_tilde = 0.0;  // at m_bar0
  double zeta_2N_eps = 0.0;
  double nu = 0.0;
  // logs of the large constants; these are what the checks use
  double log_K_H = 0.0, log_K_H_gevrey = 0.0, log_K_D = 0.0, log_K1 = 0.0, log_K2 = 0.0;
  B0Estimate b0;
  OmegaBand omega;

  /// log of K_D max{N^{m_bar}, 1 + N^2 C_m}
  double log_K_D_tilde(double m_bar) const {
    return log_K_D + std::max(m_bar * std::log(N), std::log1p(N * N * C_m));
  }
  /// log C for the composed estimates, C = K_H * K_D_tilde(m_bar)
  double log_C(double m_bar) const { return log_K_H + log_K_D_tilde(m_bar); }

  std::map<std::string, double> table() const {
    return {{"m", m},
            {"N", N},
            {"eps", eps},
            {"kappa", kappa},
            {"tau_N_kappa", tau_N_kappa},
            {"mu_tau_N_kappa", mu_tau},
            {"A1", A1},
            {"b1", b1},
            {"B0_cert", B0_cert},
            {"omega0", omega0},
            {"omega1", omega1},
            {"omega_at_0", omega_at_0},
            {"log_K_H", log_K_H},
            {"log_K_H_gevrey", log_K_H_gevrey},
            {"log_K1", log_K1},
            {"log_K2", log_K2},
            {"log_K_D", log_K_D},
            {"C_m", C_m},
            {"m_bar0", m_bar0},
            {"log_K_D_tilde", log_K_D_tilde(m_bar0)},
            {"zeta_gevrey_2N_eps", zeta_2N_eps},
            {"nu", nu}};
  }
};

/// log K_H = B0 + (b1+2)(2m+A1)/N + 4 A1 (b1+2)/kappa + 2 kappa A1 mu_tau; the last two
/// terms vanish when A1 = 0.
inline double log_K_H_formula(double B0, double b1, double m, double A1, double N, double eps, double mu_tau) {
  double r = B0 + (b1 + 2.0) * (2.0 * m + A1) / N;
  if (A1 > 0.0) {
    const double kappa = eps / (2.0 * A1);
    r += 4.0 * A1 * (b1 + 2.0) / kappa + 2.0 * kappa * A1 * mu_tau;
  }
  return r;
}

/// Assembles every constant. `horizon` bounds the integration used for B0 and the omega band.
inline BoundConstants assemble_constants(const DissipativeCoefficient& c, double N, double eps, double horizon = 1e7,
                                         double tail_tol = 1e-4) {
  if (!(c.sigma.mean_m > 0.0)) throw PreconditionError("bounds need m > 0");
  if (!(N >= 1.0)) throw PreconditionError("zone parameter N must be >= 1");
  if (!(eps > 0.0)) throw PreconditionError("eps must be positive");
  c.validate();
  BoundConstants k;
  k.coeff = c;
  k.regime = c.sigma.regime;
  k.m = c.sigma.mean_m;
  k.N = N;
  k.eps = eps;
  k.A1 = c.sigma.A1();
  k.b1 = c.sigma.b1();
  k.b0 = estimate_B0(c, horizon, 1, tail_tol);
  k.B0_cert = k.b0.certified;
  if (k.A1 > 0.0) {
    k.kappa = eps / (2.0 * k.A1);
    k.tau_N_kappa = tau_N_kappa(c.phase, N, k.kappa);
    k.mu_tau = c.phase.mu(k.tau_N_kappa);
  }
  k.log_K_H = log_K_H_formula(k.B0_cert, k.b1, k.m, k.A1, N, eps, k.mu_tau);
  k.K_H = std::exp(k.log_K_H);
  k.log_K_H_gevrey = k.B0_cert + (k.b1 + 2.0) * (2.0 * k.m + k.A1) / N;
  k.K_H_gevrey = std::exp(k.log_K_H_gevrey);
  k.zeta_2N_eps = c.phase.zeta_gevrey(2.0 * N + eps);
  k.nu = k.A1 > 0.0 ? 2.0 * k.A1 * (k.b1 + 2.0) / (eps * k.zeta_2N_eps) + eps * k.A1 * k.zeta_2N_eps : 0.0;
  k.C_m = C_m(k.m);
  k.m_bar0 = m_bar0(k.regime, k.m);
  if (k.regime == Regime::NonNegative) {
    k.log_K_D = std::log(2.0) + 2.0 * k.B0_cert;
  } else {
    k.omega = compute_omega_band(c, horizon, tail_tol);
    k.omega0 = k.omega.omega0;
    k.omega1 = k.omega.omega1;
    k.omega_at_0 = k.omega.omega_at_0;
    const double r10 = k.omega.ratio_1_0;
    k.log_K1 = std::log(N) + 2.0 * std::log(r10) + std::sqrt(r10) * N;
    k.K1 = std::exp(k.log_K1);
    k.log_K2 = std::log(k.omega.ratio_1_at0) + std::log1p(N * k.K1 / (1.0 - k.m));
    k.K2 = std::exp(k.log_K2);
    k.log_K_D = std::log(4.0) + 2.0 * std::max(k.log_K1, k.log_K2);
  }
  k.K_D = std::exp(k.log_K_D);
  k.K_D_tilde = std::exp(k.log_K_D_tilde(k.m_bar0));
  return k;
}

/// Omega band with the horizon check, as exposed to callers.
inline OmegaBand omega_band(const DissipativeCoefficient& c, double horizon, double tol) {
  return compute_omega_band(c, horizon, tol);
}

// ---------------------------------------------------------------------------
// Per-mode zone checks

namespace detail {
inline void require_zone(const ModeTrajectory& tr, const ZonePartition& zp, unsigned zone) {
  for (double t : tr.times)
    if (!(classify_zone(zp, t, tr.xi) & zone))
      throw PreconditionError("sample t=" + std::to_string(t) + ", xi=" + std::to_string(tr.xi) + " is not in " +
                              zone_names(zone));
}
}  // namespace detail

/// Z_H1: E(t) <= K_H ((1+t)/(1+T0))^{-m} E(T0), first sample must sit at T0.
/// Z_H2: E(t) <= K_H exp(eps mu(t)) (1+t)^{-m} E(0), first sample must sit at 0.
inline CheckResult hyperbolic_bound_check(const ModeTrajectory& tr, const BoundConstants& k, unsigned zone,
                                          double rel_slack = 1e-7) {
  if (!(k.m > 0.0)) throw PreconditionError("hyperbolic bound needs m > 0");
  if (zone != ZoneH1 && zone != ZoneH2) throw PreconditionError("zone must be Z_H1 or Z_H2");
  CheckResult r;
  r.bound_id = zone == ZoneH1 ? "hyperbolic_ZH1" : "hyperbolic_ZH2";
  r.zone = zone_names(zone);
  if (tr.size() == 0) return r;
  const ZonePartition zp{k.N};
  detail::require_zone(tr, zp, zone);
  const double T0 = zp.threshold(tr.xi);
  if (std::abs(tr.times.front() - T0) > 1e-12 * (1.0 + T0))
    throw PreconditionError("first sample must be at T0 = " + std::to_string(T0));
  const double logE0 = std::log(tr.energy.front());
  std::vector<double> mus;
  if (zone == ZoneH2) mus = k.coeff.phase.mu_sequence(tr.times);
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.times[i];
    double lr = k.log_K_H + logE0 - k.m * (std::log1p(t) - std::log1p(T0));
    if (zone == ZoneH2) lr += k.eps * mus[i];
    const double le = tr.energy[i] > 0.0 ? std::log(tr.energy[i]) : -std::numeric_limits<double>::infinity();
    if (!std::isfinite(tr.energy[i])) {
      r.record(tr.energy[i], 0.0, t, tr.xi);
      continue;
    }
    r.record_log(le, lr, t, tr.xi, rel_slack);
  }
  r.constants_used["log_K_H"] = k.log_K_H;
  return r;
}

/// Non-negative: E <= K_D (xi^2 v0^2 + ((1+t)^{-2m} + xi^2 gamma^2) v1^2).
/// Non-effective: E <= K_D (xi^2 v0^2 + (1+t)^{-2m} v1^2). First sample must be t = 0.
inline CheckResult dissipative_bound_check(const ModeTrajectory& tr, const BoundConstants& k, Regime regime,
                                           double rel_slack = 1e-7) {
  if (regime != k.regime) throw PreconditionError("regime does not match the constants");
  CheckResult r;
  r.bound_id = regime == Regime::NonNegative ? "dissipative_nonneg" : "dissipative_noneff";
  r.zone = "Z_D";
  if (tr.size() == 0) return r;
  detail::require_zone(tr, ZonePartition{k.N}, ZoneD);
  if (tr.times.front() != 0.0) throw PreconditionError("first sample must be at t = 0");
  const double xi = tr.xi, v0 = tr.v.front(), v1 = tr.v_t.front();
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const double t = tr.times[i];
    const double decay = std::exp(-2.0 * k.m * std::log1p(t));
    double w = xi * xi * v0 * v0 + decay * v1 * v1;
    if (regime == Regime::NonNegative) {
      const double g = gamma_tm(t, k.m);
      w += xi * xi * g * g * v1 * v1;
    }
    if (!std::isfinite(tr.energy[i])) {
      r.record(tr.energy[i], 0.0, t, xi);
      continue;
    }
    const double le = tr.energy[i] > 0.0 ? std::log(tr.energy[i]) : -std::numeric_limits<double>::infinity();
    const double lr = w > 0.0 ? k.log_K_D + std::log(w) : -std::numeric_limits<double>::infinity();
    r.record_log(le, lr, t, xi, rel_slack);
  }
  r.constants_used["log_K_D"] = k.log_K_D;
  return r;
}

// ---------------------------------------------------------------------------
// decay envelopes

inline void check_m_bar(const BoundConstants& k, double m_bar) {
  if (!(m_bar > 0.0 && m_bar <= k.m_bar0 * (1.0 + 1e-15)))
    throw PreconditionError("m_bar must lie in (0, " + std::to_string(k.m_bar0) + "]");
}

/// log of C (1 + exp(eps mu)/(1+t)^{m - m_bar}) (1+t)^{-m_bar}, without the data factor.
inline double log_thm1_factor(double t, double mu_t, const BoundConstants& k, double m_bar) {
  check_m_bar(k, m_bar);
  const double L = std::log1p(t);
  const double a = k.eps * mu_t - (k.m - m_bar) * L;  // log of the second summand
  const double log_sum = a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
  return k.log_C(m_bar) + log_sum - m_bar * L;
}

/// Envelope value for data with E(0) = E0 and ||u0||^2 in the homogeneous Sobolev space of
/// order 1 - m_bar/2 equal to hdot_sq.
inline double thm1_envelope(double t, double E0, double hdot_sq, const BoundConstants& k, double m_bar) {
  return std::exp(log_thm1_factor(t, k.coeff.phase.mu(t), k, m_bar)) * (E0 + hdot_sq);
}

/// C (1+t)^{-m_bar0} * weighted, with C = K_H K_D_tilde(m_bar0).
inline double log_thm2_factor(double t, const BoundConstants& k) {
  return k.log_C(k.m_bar0) - k.m_bar0 * std::log1p(t);
}
inline double thm2_envelope(double t, double weighted_data_integral, const BoundConstants& k) {
  return std::exp(log_thm2_factor(t, k)) * weighted_data_integral;
}

/// Per-mode Gevrey weight exp(2 nu zeta(2 xi + eps)), as a log.
inline double log_gevrey_weight(double xi, const BoundConstants& k) {
  return 2.0 * k.nu * k.coeff.phase.zeta_gevrey(2.0 * xi + k.eps);
}

// ---------------------------------------------------------------------------
// Lattice checks

struct LatticeSpec {
  int n_xi = 32;
  int n_t = 512;
  double t_end = 200.0;
  double xi_min = 1e-3;
  double xi_max = 50.0;
  double tol = 1e-9;
  std::vector<std::array<double, 2>> data = {{1.0, 0.0}, {0.0, 1.0}, {0.7, -0.7}};
  unsigned jobs = numerics::default_jobs();
};

inline std::vector<double> log_space(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : std::exp(std::log(a) + (std::log(b) - std::log(a)) * i / (n - 1));
  return v;
}

/// n points from t0 to t1 equally spaced in log(1+t), endpoints exact.
inline std::vector<double> log1p_space(double t0, double t1, int n) {
  std::vector<double> v(n);
  const double a = std::log1p(t0), b = std::log1p(t1);
  for (int i = 0; i < n; ++i) v[i] = std::expm1(a + (b - a) * i / std::max(1, n - 1));
  v.front() = t0;
  v.back() = t1;
  return v;
}

/// Upper end of Z_D in t for frequency xi: N/xi - 1 (clamped at 0).
inline double N_over(double N, double xi) {
  if (!(xi > 0.0)) return 1e300;
  double t = std::max(N / xi - 1.0, 0.0);
  // rounding can land one ulp outside (1+t)xi <= N
  while (t > 0.0 && (1.0 + t) * xi > N) t = std::nextafter(t, 0.0);
  return t;
}

/// Frequencies used for one zone's lattice.
inline std::vector<double> zone_frequencies(unsigned zone, double N, const LatticeSpec& s) {
  if (zone == ZoneD) return log_space(std::min(s.xi_min, N * 1e-3), N * (1.0 - 1e-9), s.n_xi);
  if (zone == ZoneH1) {
    // need T0 = N/xi - 1 well inside [0, t_end]
    const double lo = N / (1.0 + 0.5 * s.t_end);
    return log_space(lo, N * (1.0 - 1e-6), s.n_xi);
  }
  return log_space(N, std::max(s.xi_max, 2.0 * N), s.n_xi);
}

/// Zone bound over the (t, xi) lattice for every data vector.
inline CheckResult zone_lattice_check(const BoundConstants& k, unsigned zone, const LatticeSpec& s) {
  const auto xis = zone_frequencies(zone, k.N, s);
  const ZonePartition zp{k.N};
  auto one = [&](std::size_t i) {
    const double xi = xis[i];
    const double T0 = zp.threshold(xi);
    std::vector<double> grid;
    double t_lo = 0.0, t_hi = s.t_end;
    if (zone == ZoneD) {
      t_hi = std::min(s.t_end, N_over(k.N, xi));
    } else if (zone == ZoneH1) {
      t_lo = T0;
    }
    grid = log1p_space(t_lo, t_hi, s.n_t);
    std::vector<double> solve_grid = grid;
    if (zone == ZoneH1 && T0 > 0.0) solve_grid.insert(solve_grid.begin(), 0.0);
    CheckResult acc;
    for (const auto& d : s.data) {
      ModeProblem p;
      p.coeff = k.coeff;
      p.xi = xi;
      p.v0 = d[0];
      p.v1 = d[1];
      p.t_end = t_hi;
      p.tol = s.tol;
      auto tr = solve_direct(p, solve_grid);
      if (zone == ZoneH1 && T0 > 0.0) {
        // drop the t = 0 sample used only to start the solve
        tr.times.erase(tr.times.begin());
        tr.v.erase(tr.v.begin());
        tr.v_t.erase(tr.v_t.begin());
        tr.energy.erase(tr.energy.begin());
      }
      const auto r = zone == ZoneD ? dissipative_bound_check(tr, k, k.regime, 100 * s.tol)
                                   : hyperbolic_bound_check(tr, k, zone, 100 * s.tol);
      acc.merge(r);
      acc.bound_id = r.bound_id;
      acc.zone = r.zone;
    }
    return acc;
  };
  auto parts = numerics::parallel_map(xis.size(), s.jobs, one);
  CheckResult all;
  for (const auto& r : parts) {
    all.merge(r);
    all.bound_id = r.bound_id;
    all.zone = r.zone;
  }
  all.constants_used = k.table();
  return all;
}

/// Per-mode polynomial decay envelope over a (t, xi) lattice spanning every zone:
/// E(t,xi) <= C (1 + e^{eps mu}/(1+t)^{m-m_bar}) (1+t)^{-m_bar} (E(0,xi) + xi^{2-m_bar} v0^2).
inline CheckResult thm1_mode_lattice_check(const BoundConstants& k, double m_bar, const LatticeSpec& s) {
  check_m_bar(k, m_bar);
  const auto xis = log_space(s.xi_min, s.xi_max, s.n_xi);
  const auto grid = log1p_space(0.0, s.t_end, s.n_t);
  const auto mus = k.coeff.phase.mu_sequence(grid);
  std::vector<double> logf(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) logf[j] = log_thm1_factor(grid[j], mus[j], k, m_bar);
  auto one = [&](std::size_t i) {
    CheckResult acc;
    for (const auto& d : s.data) {
      ModeProblem p;
      p.coeff = k.coeff;
      p.xi = xis[i];
      p.v0 = d[0];
      p.v1 = d[1];
      p.t_end = s.t_end;
      p.tol = s.tol;
      const auto tr = solve_direct(p, grid);
      const double data = tr.energy.front() + std::pow(p.xi, 2.0 - m_bar) * p.v0 * p.v0;
      for (std::size_t j = 0; j < tr.size(); ++j) {
        if (!std::isfinite(tr.energy[j])) {
          acc.record(tr.energy[j], 0.0, grid[j], p.xi);
          continue;
        }
        const double le = tr.energy[j] > 0.0 ? std::log(tr.energy[j]) : -std::numeric_limits<double>::infinity();
        acc.record_log(le, logf[j] + std::log(data), grid[j], p.xi, 100 * s.tol);
      }
    }
    return acc;
  };
  auto parts = numerics::parallel_map(xis.size(), s.jobs, one);
  CheckResult all;
  for (const auto& r : parts) all.merge(r);
  all.bound_id = "thm1_mode";
  all.zone = "all";
  all.constants_used = k.table();
  all.constants_used["m_bar"] = m_bar;
  return all;
}

/// Bounds for the fundamental matrix in Z_D (non-effective regime):
/// |w_j1| <= K1 and |w_j2| <= K2 (1+t)^{-m}.
inline CheckResult w_matrix_bound_check(const BoundConstants& k, const std::vector<double>& xis, int n_t,
                                        double t_cap = 1e300) {
  if (k.regime != Regime::NonEffective) throw PreconditionError("w-matrix bounds apply to the non-effective regime");
  CheckResult r;
  r.bound_id = "w_matrix";
  r.zone = "Z_D";
  for (double xi : xis) {
    const double t_hi = std::min(t_cap, N_over(k.N, xi));
    if (t_hi <= 0.0) continue;
    const auto ts = log1p_space(0.0, t_hi, n_t);
    const auto w = measure_wjk(k.coeff, xi, ts);
    for (std::size_t i = 0; i < w.times.size(); ++i) {
      const double t = w.times[i];
      const double lim2 = k.log_K2 - k.m * std::log1p(t);
      for (int j : {0, 2}) {  // w11, w21
        const double a = std::abs(w.w[i][j]);
        r.record_log(a > 0 ? std::log(a) : -INFINITY, k.log_K1, t, xi, 1e-8);
      }
      for (int j : {1, 3}) {  // w12, w22
        const double a = std::abs(w.w[i][j]);
        r.record_log(a > 0 ? std::log(a) : -INFINITY, lim2, t, xi, 1e-8);
      }
    }
    r.constants_used["liouville_rel_error_max"] =
        std::max(r.constants_used["liouville_rel_error_max"], w.liouville_rel_error);
  }
  r.constants_used["log_K1"] = k.log_K1;
  r.constants_used["log_K2"] = k.log_K2;
  return r;
}

// ---------------------------------------------------------------------------
// Direct versus polar

/// Admissible random mode problem: m in [0.3, 2.8], one sine term below m, PowerLaw or
/// LogPower phase, xi in [e^-2, e^2], data in [-1, 1]^2.
inline ModeProblem random_mode_problem(std::mt19937_64& rng, double t_end = 60.0, double tol = 1e-9) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ModeProblem p;
  p.coeff.sigma.mean_m = 0.3 + 2.5 * U(rng);
  p.coeff.sigma.sin_coeffs = {p.coeff.sigma.mean_m * 0.9 * U(rng)};
  p.coeff.phase = U(rng) < 0.5 ? PhaseFunction::power_law(1.5 + 2.0 * U(rng)) : PhaseFunction::log_power(0.5 + U(rng));
  p.xi = std::exp(-2.0 + 4.0 * U(rng));
  p.v0 = 2.0 * U(rng) - 1.0;
  p.v1 = 2.0 * U(rng) - 1.0;
  p.t_end = t_end;
  p.tol = tol;
  return p;
}

/// |E_direct - E_polar| <= rel * E_direct at every default-grid sample of `count` seeded problems.
inline CheckResult cross_solver_sweep(std::uint64_t seed, int count, double rel = 1e-6, double t_end = 60.0,
                                      double tol = 1e-9) {
  std::mt19937_64 rng(seed);
  CheckResult r;
  r.bound_id = "cross_solver";
  r.zone = "all";
  for (int i = 0; i < count; ++i) {
    const auto p = random_mode_problem(rng, t_end, tol);
    const auto d = solve_direct(p), q = solve_polar(p);
    for (std::size_t j = 0; j < d.size(); ++j)
      r.record(std::abs(d.energy[j] - q.energy[j]), rel * d.energy[j], d.times[j], p.xi);
  }
  r.constants_used["problems"] = count;
  r.constants_used["seed"] = static_cast<double>(seed);
  r.constants_used["relative_tolerance"] = rel;
  return r;
}

}  // namespace decaylab
