#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "decaylab/bounds.hpp"
#include "decaylab/check_result.hpp"
#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/mode_solver.hpp"
#include "decaylab/numerics/parallel.hpp"
#include "decaylab/numerics/quadrature.hpp"

namespace decaylab {

enum class SpectrumShape { Gaussian, CompactBump, PowerTail };

/// Radial profile |v^(xi)| = f(|xi|).
struct RadialSpectrum {
  SpectrumShape shape = SpectrumShape::Gaussian;
  double amplitude = 1.0;
  double scale = 1.0;               // Gaussian
  double r_min = 1.0, r_max = 2.0;  // CompactBump
  double exponent = 2.0, cutoff = 1.0;  // PowerTail

  static RadialSpectrum gaussian(double scale, double amplitude = 1.0) {
    RadialSpectrum s;
    s.shape = SpectrumShape::Gaussian;
    s.scale = scale;
    s.amplitude = amplitude;
    return s;
  }
  static RadialSpectrum compact_bump(double r_min, double r_max, double amplitude = 1.0) {
    RadialSpectrum s;
    s.shape = SpectrumShape::CompactBump;
    s.r_min = r_min;
    s.r_max = r_max;
    s.amplitude = amplitude;
    return s;
  }
  static RadialSpectrum power_tail(double exponent, double cutoff, double amplitude = 1.0) {
    RadialSpectrum s;
    s.shape = SpectrumShape::PowerTail;
    s.exponent = exponent;
    s.cutoff = cutoff;
    s.amplitude = amplitude;
    return s;
  }
  static RadialSpectrum zero() { return gaussian(1.0, 0.0); }

  void validate() const {
    if (!std::isfinite(amplitude)) throw PreconditionError("spectrum amplitude must be finite");
    switch (shape) {
      case SpectrumShape::Gaussian:
        if (!(scale > 0.0)) throw PreconditionError("Gaussian scale must be positive");
        break;
      case SpectrumShape::CompactBump:
        if (!(r_min >= 0.0 && r_max > r_min)) throw PreconditionError("bump needs 0 <= r_min < r_max");
        break;
      case SpectrumShape::PowerTail:
        if (!(cutoff > 0.0) || !(exponent >= 0.0)) throw PreconditionError("power tail needs cutoff > 0, exponent >= 0");
        break;
    }
  }

  bool is_zero() const { return amplitude == 0.0; }

  double operator()(double r) const {
    if (amplitude == 0.0) return 0.0;
    switch (shape) {
      case SpectrumShape::Gaussian: {
        const double x = r / scale;
        return amplitude * std::exp(-x * x);
      }
      case SpectrumShape::CompactBump: {
        if (r <= r_min || r >= r_max) return 0.0;
        const double x = (2.0 * r - r_min - r_max) / (r_max - r_min);
        return amplitude * std::exp(1.0 - 1.0 / (1.0 - x * x));
      }
      case SpectrumShape::PowerTail:
        return amplitude * std::pow(1.0 + r / cutoff, -exponent);
    }
    return 0.0;
  }

  /// log |v^(r)|^2, -inf where the profile vanishes.
  double log_sq(double r) const {
    if (amplitude == 0.0) return -std::numeric_limits<double>::infinity();
    const double la = 2.0 * std::log(std::abs(amplitude));
    switch (shape) {
      case SpectrumShape::Gaussian: {
        const double x = r / scale;
        return la - 2.0 * x * x;
      }
      case SpectrumShape::CompactBump: {
        if (r <= r_min || r >= r_max) return -std::numeric_limits<double>::infinity();
        const double x = (2.0 * r - r_min - r_max) / (r_max - r_min);
        return la + 2.0 * (1.0 - 1.0 / (1.0 - x * x));
      }
      case SpectrumShape::PowerTail:
        return la - 2.0 * exponent * std::log1p(r / cutoff);
    }
    return -std::numeric_limits<double>::infinity();
  }
};

struct SpectralConfig {
  int dimension = 1;
  double xi_min = 1e-4;
  double xi_max = 50.0;
  int count = 96;

  void validate() const {
    if (dimension < 1) throw PreconditionError("dimension must be >= 1");
    if (!(xi_min > 0.0 && xi_max > xi_min)) throw PreconditionError("radial grid needs 0 < xi_min < xi_max");
    if (count < 3) throw PreconditionError("radial grid needs at least 3 points");
  }
  /// omega_{d-1} = 2 pi^{d/2} / Gamma(d/2)
  double surface_factor() const {
    return 2.0 * std::pow(std::numbers::pi, 0.5 * dimension) / std::tgamma(0.5 * dimension);
  }
  std::vector<double> radii() const { return log_space(xi_min, xi_max, count); }
  /// Trapezoid weights in u = log r.
  std::vector<double> log_weights() const {
    const double du = std::log(xi_max / xi_min) / (count - 1);
    std::vector<double> w(count, du);
    w.front() = w.back() = 0.5 * du;
    return w;
  }
};

struct EnergyTrajectory {
  std::vector<double> times, E;
  std::size_t radii_solved = 0, radii_skipped = 0;
  double refinement_rel_change = 0.0;  // max over t of |full - every-other-point| / full
  std::vector<std::string> warnings;
};

struct DecayFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double t_lo = 0.0, t_hi = 0.0;
  double residual_rms = 0.0;
  std::size_t samples = 0;
};

namespace detail {

/// log of int exp(lg(u)) du over [a, b], computed relative to the running max so that huge
/// weights do not overflow. Returns -inf for an identically zero integrand.
template <class LG>
double log_integral(LG&& lg, double a, double b, double step = 0.05) {
  double M = -std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(std::ceil((b - a) / step));
  for (int i = 0; i <= n; ++i) M = std::max(M, lg(a + (b - a) * i / n));
  if (!std::isfinite(M)) {
    if (M > 0) throw AccuracyError("integrand overflowed");
    return M;
  }
  std::vector<double> pts;
  for (double u = a; u < b; u += 1.0) pts.push_back(u);
  pts.push_back(b);
  auto f = [&](double u) {
    const double v = lg(u);
    return v == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(v - M);
  };
  const auto r = numerics::integrate_breakpoints(f, pts, 1e-13);
  return M + std::log(r.value);
}

/// Local slope of lg at u (in u per unit), or NaN where lg is -inf.
template <class LG>
double log_slope(LG&& lg, double u) {
  const double a = lg(u - 0.5), b = lg(u + 0.5);
  if (!std::isfinite(a) || !std::isfinite(b)) return std::numeric_limits<double>::quiet_NaN();
  return b - a;
}

}  // namespace detail

/// Homogeneous Sobolev seminorm (omega_{d-1} int r^{2s} |v^|^2 r^{d-1} dr)^{1/2} over (0, inf).
inline double hdot_seminorm(const SpectralConfig& cfg, const RadialSpectrum& data, double s) {
  cfg.validate();
  data.validate();
  if (data.is_zero()) return 0.0;
  const double d = cfg.dimension;
  auto lg = [&](double u) {
    const double r = std::exp(u);
    return (2.0 * s + d) * u + data.log_sq(r);
  };
  constexpr double lo = -60.0, hi = 60.0;
  const double s_lo = detail::log_slope(lg, lo + 1.0), s_hi = detail::log_slope(lg, hi - 1.0);
  if (std::isfinite(s_lo) && s_lo <= 1e-3)
    throw DomainError("Sobolev seminorm of order " + std::to_string(s) + " diverges at the r -> 0 end");
  if (std::isfinite(s_hi) && s_hi >= -1e-3)
    throw DomainError("Sobolev seminorm of order " + std::to_string(s) + " diverges at the r -> infinity end");
  double L = detail::log_integral(lg, lo, hi);
  // geometric tails past the ends
  double tail = 0.0;
  if (std::isfinite(s_lo)) tail += std::exp(lg(lo) - L) / s_lo;
  if (std::isfinite(s_hi)) tail += std::exp(lg(hi) - L) / -s_hi;
  L += std::log1p(tail);
  return std::sqrt(cfg.surface_factor() * std::exp(L));
}

/// Same seminorm squared, by the trapezoid rule on the configured radial grid (matches the
/// quadrature used by total_energy).
inline double grid_seminorm_sq(const SpectralConfig& cfg, const RadialSpectrum& data, double s) {
  const auto rs = cfg.radii();
  const auto w = cfg.log_weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double v = data(rs[i]);
    acc += w[i] * std::pow(rs[i], 2.0 * s + cfg.dimension) * v * v;
  }
  return cfg.surface_factor() * acc;
}

/// E(t) = omega_{d-1} int E(t, r) r^{d-1} dr by the log-grid trapezoid rule. Radii whose
/// initial mode energy is below skip_rel times the largest one are not solved.
inline EnergyTrajectory total_energy(const SpectralConfig& cfg, const RadialSpectrum& data0,
                                     const RadialSpectrum& data1, const DissipativeCoefficient& coeff,
                                     const std::vector<double>& t_samples, double tol = 1e-8,
                                     unsigned jobs = numerics::default_jobs(), double skip_rel = 1e-30) {
  cfg.validate();
  data0.validate();
  data1.validate();
  if (t_samples.empty()) throw PreconditionError("no time samples");
  const auto rs = cfg.radii();
  const auto w = cfg.log_weights();
  const double d = cfg.dimension;
  std::vector<double> e0(rs.size());
  double e0max = 0.0;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double a = rs[i] * data0(rs[i]), b = data1(rs[i]);
    e0[i] = (a * a + b * b) * std::pow(rs[i], d);
    e0max = std::max(e0max, e0[i]);
  }
  const double t_end = t_samples.back();
  auto solve = [&](std::size_t i) -> std::vector<double> {
    if (!(e0[i] > skip_rel * e0max)) return {};
    if (t_end == 0.0) return std::vector<double>(t_samples.size(), e0[i] / std::pow(rs[i], d));
    ModeProblem p;
    p.coeff = coeff;
    p.xi = rs[i];
    p.v0 = data0(rs[i]);
    p.v1 = data1(rs[i]);
    p.t_end = t_end;
    p.tol = tol;
    return solve_direct(p, t_samples).energy;
  };
  const auto modes = numerics::parallel_map(rs.size(), jobs, solve);
  EnergyTrajectory out;
  out.times = t_samples;
  out.E.assign(t_samples.size(), 0.0);
  std::vector<double> coarse(t_samples.size(), 0.0);
  const double du = std::log(cfg.xi_max / cfg.xi_min) / (cfg.count - 1);
  const std::size_t last = rs.size() - 1;
  const bool odd = last % 2 == 0;  // every-other-point subgrid reaches the last radius
  for (std::size_t i = 0; i < rs.size(); ++i) {  // ascending radius, fixed order
    if (modes[i].empty()) {
      ++out.radii_skipped;
      continue;
    }
    ++out.radii_solved;
    const double rd = std::pow(rs[i], d);
    double wc = 0.0;
    if (i % 2 == 0) wc = (i == 0 || (odd && i == last)) ? du : 2.0 * du;
    for (std::size_t j = 0; j < t_samples.size(); ++j) {
      out.E[j] += w[i] * modes[i][j] * rd;
      coarse[j] += wc * modes[i][j] * rd;
    }
  }
  const double sf = cfg.surface_factor();
  for (std::size_t j = 0; j < t_samples.size(); ++j) {
    out.E[j] *= sf;
    coarse[j] *= sf;
    if (odd && out.E[j] > 0.0)
      out.refinement_rel_change = std::max(out.refinement_rel_change, std::abs(out.E[j] - coarse[j]) / out.E[j]);
  }
  if (out.refinement_rel_change > 0.01)
    out.warnings.push_back("radial grid too coarse: halving the grid changes E by " +
                           std::to_string(100.0 * out.refinement_rel_change) + "%");
  return out;
}

/// Gevrey-weighted data integral
///   int exp(2 nu zeta(2|xi| + eps)) ((1 + |xi|^2)|v0^|^2 + |v1^|^2) dxi, returned as a log.
/// Throws DataNotAdmissible when the integrand still grows at the upper end.
inline double log_gevrey_weighted_energy(const SpectralConfig& cfg, const RadialSpectrum& data0,
                                         const RadialSpectrum& data1, const PhaseFunction& phase, double nu,
                                         double eps, double r_cap = 1e6) {
  cfg.validate();
  const double d = cfg.dimension;
  auto lg = [&](double u) {
    const double r = std::exp(u);
    const double a = std::log1p(r * r) + data0.log_sq(r), b = data1.log_sq(r);
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return 2.0 * nu * phase.zeta_gevrey(2.0 * r + eps) + d * u + m + std::log1p(std::exp(std::min(a, b) - m));
  };
  const double lo = -60.0, hi = std::log(r_cap);
  const double s_hi = detail::log_slope(lg, hi - 1.0);
  if (std::isfinite(s_hi) && s_hi >= -1e-3)
    throw DataNotAdmissible("Gevrey-weighted data integral diverges: integrand is not decaying at |xi| = " +
                            std::to_string(r_cap));
  const double s_lo = detail::log_slope(lg, lo + 1.0);
  if (std::isfinite(s_lo) && s_lo <= 1e-3) throw DataNotAdmissible("Gevrey-weighted data integral diverges at 0");
  return std::log(cfg.surface_factor()) + detail::log_integral(lg, lo, hi);
}

inline double gevrey_weighted_energy(const SpectralConfig& cfg, const RadialSpectrum& data0,
                                     const RadialSpectrum& data1, const PhaseFunction& phase, double nu, double eps) {
  return std::exp(log_gevrey_weighted_energy(cfg, data0, data1, phase, nu, eps));
}

/// Least squares line through (log(1+t), log E) on t in [t_lo, t_hi]; exponent = -slope.
inline DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& E, double t_lo, double t_hi) {
  if (times.size() != E.size()) throw PreconditionError("times and energies differ in length");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t_lo || times[i] > t_hi) continue;
    if (!(E[i] > 0.0) || !std::isfinite(E[i]))
      throw DomainError("fit needs positive finite energies (t = " + std::to_string(times[i]) + ")");
    x.push_back(std::log1p(times[i]));
    y.push_back(std::log(E[i]));
  }
  if (x.size() < 16) throw PreconditionError("fit window holds " + std::to_string(x.size()) + " samples, need 16");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  DecayFit f;
  const double slope = sxy / sxx;
  f.exponent = -slope;
  f.intercept = my - slope * mx;
  f.t_lo = t_lo;
  f.t_hi = t_hi;
  f.samples = x.size();
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + slope * x[i]);
    ss += r * r;
  }
  f.residual_rms = std::sqrt(ss / n);
  return f;
}

inline DecayFit fit_decay(const EnergyTrajectory& tr, double t_lo, double t_hi) { return fit_decay(tr.times, tr.E, t_lo, t_hi); }

// ---------------------------------------------------------------------------
// Total-energy certification

/// E(t) <= C (1 + e^{eps mu}/(1+t)^{m-m_bar}) (1+t)^{-m_bar} (E(0) + |u0|^2), with the seminorm
/// taken on the same radial grid as E.
inline CheckResult thm1_total_check(const EnergyTrajectory& tr, const BoundConstants& k, double m_bar,
                                    double hdot_sq, double rel_slack = 1e-6) {
  if (tr.times.empty() || tr.times.front() != 0.0) throw PreconditionError("energy trajectory must start at t = 0");
  CheckResult r;
  r.bound_id = "thm1_total";
  r.zone = "total";
  const auto mus = k.coeff.phase.mu_sequence(tr.times);
  const double data = std::log(tr.E.front() + hdot_sq);
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (!std::isfinite(tr.E[i])) {
      r.record(tr.E[i], 0.0, tr.times[i]);
      continue;
    }
    const double le = tr.E[i] > 0.0 ? std::log(tr.E[i]) : -std::numeric_limits<double>::infinity();
    r.record_log(le, log_thm1_factor(tr.times[i], mus[i], k, m_bar) + data, tr.times[i], 0.0, rel_slack);
  }
  r.constants_used = k.table();
  r.constants_used["m_bar"] = m_bar;
  r.constants_used["hdot_sq"] = hdot_sq;
  return r;
}

/// E(t) (1+t)^{m_bar0} <= C * W, W the Gevrey-weighted data integral (passed as log W).
inline CheckResult thm2_total_check(const EnergyTrajectory& tr, const BoundConstants& k, double log_W,
                                    double rel_slack = 1e-6) {
  CheckResult r;
  r.bound_id = "thm2_total";
  r.zone = "total";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (!std::isfinite(tr.E[i])) {
      r.record(tr.E[i], 0.0, tr.times[i]);
      continue;
    }
    const double le = tr.E[i] > 0.0 ? std::log(tr.E[i]) : -std::numeric_limits<double>::infinity();
    r.record_log(le, log_thm2_factor(tr.times[i], k) + log_W, tr.times[i], 0.0, rel_slack);
  }
  r.constants_used = k.table();
  r.constants_used["log_weighted_data"] = log_W;
  return r;
}

}  // namespace decaylab
