#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "decaylab/check_result.hpp"
#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/mode_solver.hpp"
#include "decaylab/numerics/dormand_prince.hpp"
#include "decaylab/numerics/parallel.hpp"
#include "decaylab/numerics/quadrature.hpp"
#include "decaylab/stabilization.hpp"

namespace decaylab {

using RealFn = std::function<double(double)>;

// ---------------------------------------------------------------------------
// Phase breakpoints

/// Points in (a,b) where a monotone phase P crosses multiples of `step`, with a and b
/// added at the ends. Safeguarded Newton per crossing.
template <class P, class DP>
std::vector<double> phase_breakpoints(P&& phase, DP&& dphase, double a, double b, double step,
                                      std::size_t max_points = 4000000) {
  std::vector<double> pts{a};
  if (!(b > a)) return pts;
  const double Pa = phase(a), Pb = phase(b);
  const double sgn = Pb >= Pa ? 1.0 : -1.0;
  auto g = [&](double s) { return sgn * phase(s); };
  auto dg = [&](double s) { return sgn * dphase(s); };
  const double ga = sgn * Pa, gb = sgn * Pb;
  const double k0 = std::floor(ga / step) + 1.0, k1 = std::ceil(gb / step) - 1.0;
  if (k1 - k0 + 1.0 > static_cast<double>(max_points))
    throw QuadratureError("phase_breakpoints: too many oscillations on [" + std::to_string(a) + "," +
                          std::to_string(b) + "]");
  for (double k = k0; k <= k1; k += 1.0) {
    const double target = k * step;
    double lo = pts.back(), hi = b;
    double x = lo;
    for (int it = 0; it < 100; ++it) {
      const double r = g(x) - target;
      if (r < 0.0)
        lo = x;
      else
        hi = x;
      const double d = dg(x);
      double xn = (d > 0.0) ? x - r / d : 0.5 * (lo + hi);
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x)) || hi - lo <= 1e-15 * (1.0 + std::abs(lo))) {
        x = xn;
        break;
      }
      x = xn;
    }
    if (x > pts.back() && x < b) pts.push_back(x);
  }
  pts.push_back(b);
  return pts;
}

namespace detail {
/// Sum of GK15 panels over consecutive breakpoints, falling back to adaptive GK on
/// panels whose estimate exceeds their share of the tolerance.
template <class F>
numerics::QuadResult panel_sum(F&& f, const std::vector<double>& pts, double abs_tol,
                               std::vector<double>* cumulative = nullptr) {
  numerics::QuadResult out;
  if (cumulative) cumulative->assign(1, 0.0);
  if (pts.size() < 2) return out;
  const double share = abs_tol / static_cast<double>(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    auto [v, e] = numerics::gk15(f, pts[i], pts[i + 1]);
    out.evaluations += 15;
    if (e > share) {
      const auto r = numerics::integrate_adaptive(f, pts[i], pts[i + 1], share);
      v = r.value;
      e = r.abs_error;
      out.evaluations += r.evaluations;
    }
    out.value += v;
    out.abs_error += e;
    if (cumulative) cumulative->push_back(out.value);
  }
  return out;
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Oscillatory integrals  int s_j(n phi) s_k(psi) / (1+s)

struct OscIntegralCase {
  RealFn phi, phi_p, phi_pp;
  RealFn psi, psi_p;
  int n = 1;
  double tau_minus = 0.0, tau_plus = 0.0;
  double phi0 = 1.0;  // lower bound of |phi'|
  double Psi0 = 0.0;  // bound of (1+t)|psi'|
  double t0 = 0.0;
  std::string label;
};

inline double trig_select(int j, double x) { return j == 1 ? std::cos(x) : std::sin(x); }

/// Grid check of the case hypotheses; InadmissibleCase on failure.
inline void check_osc_case(const OscIntegralCase& c, int samples = 257) {
  if (c.n < 1) throw InadmissibleCase("n must be a positive integer");
  if (!(c.phi0 > 0.0)) throw InadmissibleCase("phi0 must be positive");
  if (!(c.t0 >= 0.0 && c.t0 <= c.tau_minus && c.tau_minus <= c.tau_plus))
    throw InadmissibleCase("need 0 <= t0 <= tau_minus <= tau_plus");
  if (c.tau_minus == c.tau_plus) return;
  double sign = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double s = c.tau_minus + (c.tau_plus - c.tau_minus) * i / (samples - 1);
    const double dp = c.phi_p(s);
    if (std::abs(dp) < c.phi0 * (1.0 - 1e-12)) throw InadmissibleCase(c.label + ": |phi'| below phi0 at " + std::to_string(s));
    if (sign == 0.0) sign = dp > 0 ? 1.0 : -1.0;
    if (dp * sign < 0.0) throw InadmissibleCase(c.label + ": phi' changes sign");
    if (c.phi_pp(s) < -1e-12 * (1.0 + std::abs(dp))) throw InadmissibleCase(c.label + ": phi'' negative");
    if ((1.0 + s) * std::abs(c.psi_p(s)) > c.Psi0 * (1.0 + 1e-12) + 1e-15)
      throw InadmissibleCase(c.label + ": (1+t)|psi'| exceeds Psi0");
  }
}

inline numerics::QuadResult ossint_lhs(const OscIntegralCase& c, int j, int k, double abs_tol = 1e-10) {
  if (j < 1 || j > 2 || k < 1 || k > 2) throw PreconditionError("j, k must be 1 or 2");
  if (c.tau_plus <= c.tau_minus) return {};
  const double n = c.n;
  auto f = [&](double s) { return trig_select(j, n * c.phi(s)) * trig_select(k, c.psi(s)) / (1.0 + s); };
  const auto pts = phase_breakpoints([&](double s) { return n * c.phi(s); }, [&](double s) { return n * c.phi_p(s); },
                                     c.tau_minus, c.tau_plus, std::numbers::pi / 4);
  return detail::panel_sum(f, pts, abs_tol);
}

inline double ossint_bound_rhs(const OscIntegralCase& c) { return (c.Psi0 + 4.0) / (c.n * c.phi0 * (1.0 + c.t0)); }

inline CheckResult ossint_bound_check(const OscIntegralCase& c, int j, int k) {
  check_osc_case(c);
  const auto lhs = ossint_lhs(c, j, k);
  CheckResult r;
  r.bound_id = "osc_integral";
  const double rhs = ossint_bound_rhs(c);
  r.record(std::abs(lhs.value), rhs + lhs.abs_error, c.tau_plus, c.n);
  r.constants_used["lhs"] = lhs.value;
  r.constants_used["rhs"] = rhs;
  return r;
}

/// The shipped sweep: j,k in {1,2}, n in {1,3,10,100}, three phase families, three psi
/// choices and one (small) or two (full) windows.
inline std::vector<std::pair<OscIntegralCase, std::array<int, 2>>> ossint_sweep_cases(bool full) {
  std::vector<std::pair<OscIntegralCase, std::array<int, 2>>> out;
  const auto logp2 = PhaseFunction::log_power(2.0);
  struct PsiChoice {
    RealFn psi, psi_p;
    double Psi0;
    const char* name;
  };
  const std::vector<PsiChoice> psis = {
      {[](double) { return 0.3; }, [](double) { return 0.0; }, 0.0, "const"},
      {[](double s) { return 0.5 * std::log1p(s); }, [](double s) { return 0.5 / (1 + s); }, 0.5, "log"},
      {[](double s) { return 2 * std::log1p(s) + 0.2 * std::sin(std::log1p(s)); },
       [](double s) { return (2 + 0.2 * std::cos(std::log1p(s))) / (1 + s); }, 2.2, "log+sin"},
  };
  const int windows = full ? 2 : 1;
  for (int n : {1, 3, 10, 100}) {
    for (int fam = 0; fam < 3; ++fam) {
      for (const auto& ps : psis) {
        for (int w = 0; w < windows; ++w) {
          OscIntegralCase c;
          c.n = n;
          c.psi = ps.psi;
          c.psi_p = ps.psi_p;
          c.Psi0 = ps.Psi0;
          double base = 0.0;
          if (fam == 0) {
            c.phi = [](double s) { return s; };
            c.phi_p = [](double) { return 1.0; };
            c.phi_pp = [](double) { return 0.0; };
          } else if (fam == 1) {
            // power-law phase plus a drift 2*lambda*s/n, lambda = 1
            const double d = 2.0 / n;
            c.phi = [d](double s) { return (1 + s) * (1 + s) + d * s; };
            c.phi_p = [d](double s) { return 2 * (1 + s) + d; };
            c.phi_pp = [](double) { return 2.0; };
          } else {
            // log-power phase minus 2*lambda*s/n right of the stationary split, lambda = 3, kappa = 1
            const double d = 6.0 / n, r = 7.0 / n;
            c.phi = [logp2, d](double s) { return logp2.eta(s) - d * s; };
            c.phi_p = [logp2, d](double s) { return logp2.eta_prime(s) - d; };
            c.phi_pp = [logp2](double s) { return logp2.eta_second(s); };
            base = logp2.eta_prime(0.0) >= r ? 0.0 : logp2.eta_prime_inverse(r);
          }
          c.t0 = base + (w == 0 ? 0.0 : 3.0);
          c.tau_minus = c.t0;
          c.tau_plus = c.t0 + (w == 0 ? 2 * std::numbers::pi : 37.0);
          c.phi0 = std::abs(c.phi_p(c.tau_minus));  // phi' is increasing and positive on every window
          c.label = "fam" + std::to_string(fam) + "/n" + std::to_string(n) + "/" + ps.name + "/w" + std::to_string(w);
          for (int j = 1; j <= 2; ++j)
            for (int k = 1; k <= 2; ++k) out.push_back({c, {j, k}});
        }
      }
    }
  }
  return out;
}

inline CheckResult ossint_sweep(bool full, unsigned jobs = numerics::default_jobs()) {
  const auto cases = ossint_sweep_cases(full);
  auto res = numerics::parallel_map(cases.size(), jobs, [&](std::size_t i) {
    return ossint_bound_check(cases[i].first, cases[i].second[0], cases[i].second[1]);
  });
  CheckResult all;
  all.bound_id = "osc_integral";
  for (const auto& r : res) all.merge(r);
  all.constants_used["cases"] = static_cast<double>(cases.size());
  return all;
}

// ---------------------------------------------------------------------------
// Stationary split and log ratio

struct TauPair {
  double minus = 0.0, plus = 0.0;
};

/// tau_{n-} (resp. tau_{n+}) is t0 when eta'(t0) already reaches (2 lambda - kappa)/n
/// (resp. (2 lambda + kappa)/n), otherwise the inverse of eta' at that level.
inline TauPair tau_n_pm(const PhaseFunction& ph, int n, double lambda, double kappa, double t0) {
  if (!(kappa > 0.0 && lambda > 0.0 && n >= 1 && t0 >= 0.0)) throw PreconditionError("tau_n_pm: need kappa, lambda > 0, n >= 1");
  const double e0 = ph.eta_prime(t0);
  auto tau = [&](double r) { return e0 >= r ? t0 : std::max(t0, ph.eta_prime_inverse(r)); };
  return {tau((2 * lambda - kappa) / n), tau((2 * lambda + kappa) / n)};
}

/// phi_n' <= -kappa/n on [t0, tau_{n-}] and >= kappa/n on [tau_{n+}, tau_{n+} + span],
/// 1024 samples each side.
inline CheckResult stationary_split_check(const PhaseFunction& ph, int n, double lambda, double kappa, double t0,
                                          double span = 0.0) {
  const auto tp = tau_n_pm(ph, n, lambda, kappa, t0);
  CheckResult r;
  r.bound_id = "stationary_split";
  const double lo_level = (2 * lambda - kappa) / n, hi_level = (2 * lambda + kappa) / n;
  constexpr int K = 1024;
  if (tp.minus > t0 && std::isfinite(tp.minus)) {
    for (int i = 0; i < K; ++i) {
      const double s = t0 + (tp.minus - t0) * i / (K - 1);
      r.record(ph.eta_prime(s), lo_level, s, n, 1e-12 / lo_level);
    }
  }
  if (std::isfinite(tp.plus)) {
    const double w = span > 0.0 ? span : std::max(10.0, 10.0 * tp.plus);
    for (int i = 0; i < K; ++i) {
      const double s = tp.plus + w * i / (K - 1);
      r.record(hi_level, ph.eta_prime(s), s, n, 1e-12 / hi_level);
    }
  }
  r.constants_used["tau_minus"] = tp.minus;
  r.constants_used["tau_plus"] = tp.plus;
  return r;
}

inline CheckResult logratio_bound_check(const PhaseFunction& ph, int n, double lambda, double kappa, double t0,
                                        double tau_minus, double tau_plus) {
  const auto tp = tau_n_pm(ph, n, lambda, kappa, t0);
  const double slack = 1e-12 * (1.0 + tp.plus);
  if (!(tp.minus - slack <= tau_minus && tau_minus <= tau_plus && tau_plus <= tp.plus + slack))
    throw InadmissibleCase("log-ratio check needs tau_{n-} <= tau_minus <= tau_plus <= tau_{n+}");
  CheckResult r;
  r.bound_id = "log_ratio";
  const double lhs = std::log1p(tau_plus) - std::log1p(tau_minus);
  const double rhs = 2.0 * kappa / n * ph.mu(tau_plus);
  r.record(lhs, rhs, tau_plus, n);
  r.constants_used["lhs"] = lhs;
  r.constants_used["rhs"] = rhs;
  return r;
}

/// Sign checks and log-ratio checks over n in {1,3,10}, lambda in {0.5,3,10},
/// kappa in {0.5,1} and the three phase families.
inline std::pair<CheckResult, CheckResult> split_and_logratio_sweep() {
  CheckResult sign, logr;
  sign.bound_id = "stationary_split";
  logr.bound_id = "log_ratio";
  const std::vector<PhaseFunction> fams = {PhaseFunction::power_law(2), PhaseFunction::log_power(2),
                                           PhaseFunction::loglog_power(1)};
  for (const auto& ph : fams)
    for (int n : {1, 3, 10})
      for (double lam : {0.5, 3.0, 10.0})
        for (double kap : {0.5, 1.0}) {
          sign.merge(stationary_split_check(ph, n, lam, kap, 0.0));
          const auto tp = tau_n_pm(ph, n, lam, kap, 0.0);
          if (!std::isfinite(tp.plus)) continue;
          for (double a : {0.0, 0.25, 0.5})
            for (double b : {0.5, 0.75, 1.0}) {
              const double lo = tp.minus + a * (tp.plus - tp.minus), hi = tp.minus + b * (tp.plus - tp.minus);
              logr.merge(logratio_bound_check(ph, n, lam, kap, 0.0, lo, std::max(lo, hi)));
            }
        }
  return {sign, logr};
}

// ---------------------------------------------------------------------------
// int sigma_0(eta) cos(2 lambda s + 2 h) / (1+s)

/// (H0+2)(2m+A1)/(lambda(1+t0)) + 4 A1 (H0+2)/kappa + 2 kappa A1 mu; kappa terms drop when A1 = 0.
inline double theta_integral_rhs(const DissipativeCoefficient& c, double lambda, double t0, double H0, double kappa,
                                 double mu) {
  const double m = c.sigma.mean_m, A1 = c.sigma.A1();
  double r = (H0 + 2.0) * (2.0 * m + A1) / (lambda * (1.0 + t0));
  if (A1 > 0.0) r += 4.0 * A1 * (H0 + 2.0) / kappa + 2.0 * kappa * A1 * mu;
  return r;
}

/// tau_{N,kappa} = max{0, (eta')^{-1}(2N + kappa)}.
inline double tau_N_kappa(const PhaseFunction& ph, double N, double kappa) {
  const double r = 2.0 * N + kappa;
  return ph.eta_prime(0.0) >= r ? 0.0 : ph.eta_prime_inverse(r);
}

struct ThetaIntegralSpec {
  RealFn h, h_p;      // auxiliary phase and its derivative
  double lambda = 1.0;
  double t0 = 0.0;
  double H0 = 0.0;     // claimed sup (1+s)|h'(s)|
  double kappa = 1.0;
  double N = 0.0;      // > 0 enables the lambda <= N variant
  std::vector<double> ends;  // ascending end times > t0
};

inline CheckResult int_b_theta_check(const DissipativeCoefficient& c, const ThetaIntegralSpec& sp,
                                     double abs_tol = 1e-9) {
  CheckResult r;
  r.bound_id = "theta_integral";
  if (sp.ends.empty()) return r;
  const double t_max = sp.ends.back();
  if (t_max <= sp.t0) {
    r.record(0.0, theta_integral_rhs(c, sp.lambda, sp.t0, sp.H0, sp.kappa, c.phase.mu(sp.t0)), sp.t0, sp.lambda);
    return r;
  }
  // certify H0 on a fine grid
  {
    constexpr int K = 4097;
    for (int i = 0; i < K; ++i) {
      const double s = sp.t0 + (t_max - sp.t0) * i / (K - 1);
      if ((1.0 + s) * std::abs(sp.h_p(s)) > sp.H0 * (1.0 + 1e-9) + 1e-15)
        throw InadmissibleCase("theta integral: (1+s)|h'| exceeds H0 at s=" + std::to_string(s));
    }
  }
  const double m = c.sigma.mean_m;
  auto f = [&](double s) {
    return (m + c.sigma_at(s)) * std::cos(2.0 * sp.lambda * s + 2.0 * sp.h(s)) / (1.0 + s);
  };
  // panels: a quarter turn of the fastest phase, at most a quarter of (1+s), plus every end time
  const double wsig = std::numbers::pi / c.sigma.period_T * static_cast<double>(std::max<std::size_t>(1, c.sigma.n_max()));
  std::vector<double> pts{sp.t0};
  std::size_t ei = 0;
  while (ei < sp.ends.size() && sp.ends[ei] <= sp.t0) ++ei;
  for (double s = sp.t0; s < t_max;) {
    const double rate = 2.0 * sp.lambda + 2.0 * sp.H0 / (1.0 + s) + wsig * c.phase.eta_prime(s);
    double next = s + std::min(0.25 * (1.0 + s), (std::numbers::pi / 2) / rate);
    while (ei < sp.ends.size() && sp.ends[ei] <= next) {
      if (sp.ends[ei] > pts.back()) pts.push_back(sp.ends[ei]);
      ++ei;
    }
    if (next >= t_max) break;
    pts.push_back(next);
    s = next;
  }
  if (pts.back() < t_max) pts.push_back(t_max);
  std::vector<double> cum;
  const auto q = detail::panel_sum(f, pts, abs_tol, &cum);
  const double full_mu_tau = sp.N > 0.0 && sp.lambda <= sp.N ? c.phase.mu(tau_N_kappa(c.phase, sp.N, sp.kappa)) : 0.0;
  const auto mus = c.phase.mu_sequence(sp.ends);
  std::size_t k = 0;
  for (std::size_t e = 0; e < sp.ends.size(); ++e) {
    const double t = sp.ends[e];
    if (t <= sp.t0) continue;
    while (k + 1 < pts.size() && pts[k] < t) ++k;
    const double val = std::abs(cum[k]);
    const double rhs = theta_integral_rhs(c, sp.lambda, sp.t0, sp.H0, sp.kappa, mus[e]);
    r.record(val, rhs + q.abs_error, t, sp.lambda);
    if (sp.N > 0.0 && sp.lambda <= sp.N)
      r.record(val, theta_integral_rhs(c, sp.lambda, sp.t0, sp.H0, sp.kappa, full_mu_tau) + q.abs_error, t, sp.lambda);
  }
  r.constants_used["H0"] = sp.H0;
  r.constants_used["kappa"] = sp.kappa;
  r.constants_used["quad_error"] = q.abs_error;
  return r;
}

/// The hyperbolic-zone use: lambda = xi, t0 = T0(xi;N), H0 = b1 and
/// h(s) = -theta(s) - xi s, so 2 xi s + 2h = -2 theta and h' = b sin(theta) cos(theta).
inline CheckResult theta_integral_mode_check(const DissipativeCoefficient& c, double xi, double N, double eps,
                                             double t_end, double tol = 1e-10, int samples = 256) {
  if (!(xi > 0.0)) throw PreconditionError("theta integral check needs xi > 0");
  const double A1 = c.sigma.A1();
  ThetaIntegralSpec sp;
  sp.lambda = xi;
  sp.t0 = ZonePartition{N}.threshold(xi);
  sp.H0 = c.sigma.b1();
  sp.kappa = A1 > 0.0 ? eps / (2.0 * A1) : 1.0;
  sp.N = N;
  if (sp.t0 >= t_end) {
    CheckResult empty;
    empty.bound_id = "theta_integral";
    return empty;
  }
  ModeProblem p;
  p.coeff = c;
  p.xi = xi;
  p.v0 = 1.0;
  p.v1 = 0.0;
  p.t_end = t_end;
  p.tol = tol;
  ThetaPath path;
  solve_polar(p, 0.0, 1.0, {0.0, t_end}, &path);
  sp.h = [&](double s) { return -path(s) - xi * s; };
  sp.h_p = [&](double s) {
    const double th = path(s);
    return c.b(s) * std::sin(th) * std::cos(th);
  };
  for (int i = 1; i <= samples; ++i)
    sp.ends.push_back(std::exp(std::log1p(sp.t0) + (std::log1p(t_end) - std::log1p(sp.t0)) * i / samples) - 1.0);
  sp.ends.back() = std::min(sp.ends.back(), t_end);
  return int_b_theta_check(c, sp);
}

// ---------------------------------------------------------------------------
// Stabilization tail sweep

/// |int_{T0}^{T1} sigma(eta)/(1+s)| against the tail bound at every quarter-turn
/// breakpoint up to max(multiples)*T0, plus the listed T1 exactly.
inline CheckResult stabilization_tail_check(const DissipativeCoefficient& c, double T0,
                                            const std::vector<double>& multiples = {2.0, 4.0, 8.0}) {
  CheckResult r;
  r.bound_id = "stabilization_tail";
  const double bound = stabilization_tail_bound(c, T0);
  r.constants_used["bound"] = bound;
  r.constants_used["T0"] = T0;
  if (c.sigma.n_max() == 0) return r;
  const double scale = std::numbers::pi / c.sigma.period_T * static_cast<double>(c.sigma.n_max());
  const double T1max = T0 * *std::max_element(multiples.begin(), multiples.end());
  auto pts = phase_breakpoints([&](double s) { return scale * c.phase.eta(s); },
                               [&](double s) { return scale * c.phase.eta_prime(s); }, T0, T1max, std::numbers::pi / 4);
  for (double mlt : multiples) pts.push_back(mlt * T0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  std::vector<double> cum;
  auto f = [&](double s) { return c.sigma_at(s) / (1.0 + s); };
  const auto q = detail::panel_sum(f, pts, 1e-12, &cum);
  for (std::size_t i = 1; i < pts.size(); ++i) r.record(std::abs(cum[i]), bound + q.abs_error, pts[i], 0.0);
  return r;
}

// ---------------------------------------------------------------------------
// Volterra series

struct VolterraSystem {
  std::function<double(double)> p;
  std::function<double(double, double)> q;  // q(t, tau)
  int truncation_L = 4;
};

/// l-th iterated term T_l(t) = int_0^t q(t,tau) T_{l-1}(tau) dtau, T_0 = p. Nested adaptive GK;
/// each inner level runs at a third of the tolerance of the level above.
inline double volterra_term(const VolterraSystem& s, int l, double t, double tol = 1e-10) {
  if (l == 0) return s.p(t);
  if (t == 0.0) return 0.0;
  auto f = [&](double tau) { return s.q(t, tau) * volterra_term(s, l - 1, tau, tol / 3.0); };
  return numerics::integrate_adaptive(f, 0.0, t, tol, 1e-13, 50000).value;
}

/// p(t) + sum_{l=1}^{L} T_l(t).
inline double volterra_truncated(const VolterraSystem& s, double t, double tol = 1e-10) {
  if (s.truncation_L < 1) throw PreconditionError("truncation_L must be >= 1");
  double acc = s.p(t);
  for (int l = 1; l <= s.truncation_L; ++l) acc += volterra_term(s, l, t, tol / std::pow(3.0, l - 1));
  return acc;
}

/// beta(t) = exp(-int_0^t b) and I(t) = int_0^t beta on [0, t_max], cubic Hermite on a
/// uniform grid (both derivatives are known exactly).
class BetaCache {
 public:
  BetaCache(const DissipativeCoefficient& c, double t_max, int cells = 8000) : c_(c), t_max_(t_max), n_(cells) {
    DissipationTable tab(c, t_max, true);
    h_ = t_max / cells;
    beta_.resize(cells + 1);
    ib_.resize(cells + 1);
    db_.resize(cells + 1);
    for (int i = 0; i <= cells; ++i) {
      const double t = i * h_;
      beta_[i] = tab.beta(t);
      ib_[i] = tab.beta_integral(t);
      db_[i] = -c.b(t) * beta_[i];
    }
  }
  double beta(double t) const { return herm(beta_, db_, t); }
  double integral(double t) const { return herm(ib_, beta_, t); }
  double t_max() const { return t_max_; }

 private:
  double herm(const std::vector<double>& y, const std::vector<double>& dy, double t) const {
    if (t < 0.0 || t > t_max_ * (1 + 1e-12)) throw PreconditionError("BetaCache: t outside table");
    int i = std::min(static_cast<int>(t / h_), n_ - 1);
    const double x = (t - i * h_) / h_, x2 = x * x, x3 = x2 * x;
    return (2 * x3 - 3 * x2 + 1) * y[i] + (x3 - 2 * x2 + x) * h_ * dy[i] + (-2 * x3 + 3 * x2) * y[i + 1] +
           (x3 - x2) * h_ * dy[i + 1];
  }
  DissipativeCoefficient c_;
  double t_max_, h_;
  int n_;
  std::vector<double> beta_, ib_, db_;
};

/// System for w_1 = xi beta^{-1} w_11 (k=1) or w_2 = beta^{-1} w_12 (k=2):
/// p_1 = xi/beta, p_2 = (xi/beta) int_0^t beta, q(t,tau) = -(xi^2/beta(t)) int_tau^t beta.
inline VolterraSystem w_volterra_system(std::shared_ptr<const BetaCache> cache, double xi, int k, int L = 4) {
  VolterraSystem s;
  s.truncation_L = L;
  if (k == 1)
    s.p = [cache, xi](double t) { return xi / cache->beta(t); };
  else
    s.p = [cache, xi](double t) { return xi / cache->beta(t) * cache->integral(t); };
  s.q = [cache, xi](double t, double tau) {
    return -xi * xi / cache->beta(t) * (cache->integral(t) - cache->integral(tau));
  };
  return s;
}

/// Factorial majorant for the l-th p_1 term:
/// (omega(0)/omega0) xi (1+t)^m (sqrt(omega1/omega0) xi t)^{2l} / (2l)!.
inline double volterra_majorant_p1(const OmegaBand& w, double m, double xi, double t, int l) {
  const double z = std::sqrt(w.ratio_1_0) * xi * t;
  return w.ratio_at0_0 * xi * std::pow(1.0 + t, m) * std::exp(2.0 * l * std::log(z) - std::lgamma(2.0 * l + 1.0));
}

/// Sum of the p_1 majorants for l > L.
inline double volterra_tail_p1(const OmegaBand& w, double m, double xi, double t, int L) {
  double s = 0.0;
  for (int l = L + 1; l < L + 400; ++l) {
    const double v = volterra_majorant_p1(w, m, xi, t, l);
    s += v;
    if (v < 1e-18 * s) break;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Fundamental matrix W: (xi v0, v1) -> (xi v, v_t)

struct WMatrixTrajectory {
  double xi = 0.0;
  std::vector<double> times;
  std::vector<std::array<double, 4>> w;  // w11, w12, w21, w22
  std::vector<double> B;                 // int_0^t b from the same integration
  double identity_residual = 0.0;        // worst residual of the two integral identities
  double liouville_rel_error = 0.0;      // |det W - beta_ref| / beta_ref, beta_ref from an independent table
};

inline WMatrixTrajectory measure_wjk(const DissipativeCoefficient& c, double xi, std::vector<double> t_samples,
                                     double tol = 1e-11, double residual_tol = 1e-6) {
  if (!(xi > 0.0)) throw PreconditionError("measure_wjk needs xi > 0");
  std::sort(t_samples.begin(), t_samples.end());
  if (t_samples.empty() || t_samples.front() < 0.0) throw PreconditionError("measure_wjk: bad sample times");
  const double t_end = t_samples.back();
  WMatrixTrajectory out;
  out.xi = xi;
  // state: w11 w21 w12 w22 B, with B = int_0^t b. The identities are checked with
  // per-step Gauss-Legendre sums over the dense output.
  using S5 = numerics::State<5>;
  auto rhs = [&](double t, const S5& y, S5& dy) {
    const double b = c.b(t);
    for (int k = 0; k < 2; ++k) {
      const double w1 = y[2 * k], w2 = y[2 * k + 1];
      dy[2 * k] = xi * w2;
      dy[2 * k + 1] = -xi * w1 - b * w2;
    }
    dy[4] = b;
  };
  numerics::DopriOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-2;
  std::size_t next = 0;
  double J[2] = {0, 0}, G[2] = {0, 0};
  const auto& gl = numerics::gauss_legendre8();
  auto emit = [&](double t, const S5& y) {
    out.times.push_back(t);
    out.w.push_back({y[0], y[2], y[1], y[3]});
    out.B.push_back(y[4]);
  };
  auto residual = [&](const S5& y, const double* Jt, const double* Gt) {
    const double beta = std::exp(-y[4]);
    double r = 0.0;
    for (int k = 0; k < 2; ++k) {
      const double d1 = k == 0 ? 1.0 : 0.0, d2 = 1.0 - d1;
      r = std::max(r, std::abs(y[2 * k] - d1 - xi * Jt[k]));
      r = std::max(r, std::abs(y[2 * k + 1] - beta * (d2 - xi * Gt[k])));
    }
    return r;
  };
  S5 y0{1, 0, 0, 1, 0};
  while (next < t_samples.size() && t_samples[next] <= 0.0) emit(t_samples[next++], y0);
  if (t_end > 0.0) {
    numerics::dopri5<5>(rhs, 0.0, y0, t_end, opt, [&](const numerics::DenseStep<5>& d) {
      auto partial = [&](double a, double b, double* Jp, double* Gp) {
        for (int k = 0; k < 2; ++k) {
          Jp[k] = gl.integrate([&](double s) { return d.component(2 * k + 1, s); }, a, b);
          Gp[k] = gl.integrate([&](double s) { return std::exp(d.component(4, s)) * d.component(2 * k, s); }, a, b);
        }
      };
      while (next < t_samples.size() && t_samples[next] <= d.t1()) {
        double Jp[2], Gp[2];
        partial(d.t0, t_samples[next], Jp, Gp);
        const double Jt[2] = {J[0] + Jp[0], J[1] + Jp[1]}, Gt[2] = {G[0] + Gp[0], G[1] + Gp[1]};
        const auto y = d(t_samples[next]);
        out.identity_residual = std::max(out.identity_residual, residual(y, Jt, Gt));
        emit(t_samples[next], y);
        ++next;
      }
      double Jp[2], Gp[2];
      partial(d.t0, d.t1(), Jp, Gp);
      for (int k = 0; k < 2; ++k) {
        J[k] += Jp[k];
        G[k] += Gp[k];
      }
      return next < t_samples.size();
    });
  }
  // Liouville: det W = beta, with beta from the cumulative dissipation table
  if (t_end > 0.0) {
    DissipationTable tab(c, t_end);
    for (std::size_t i = 0; i < out.times.size(); ++i) {
      const auto& w = out.w[i];
      const double det = w[0] * w[3] - w[1] * w[2];
      const double ref = tab.beta(out.times[i]);
      out.liouville_rel_error = std::max(out.liouville_rel_error, std::abs(det - ref) / ref);
    }
  }
  if (out.identity_residual > residual_tol)
    throw AccuracyError("w-matrix integral identities: residual " + std::to_string(out.identity_residual));
  return out;
}

}  // namespace decaylab
