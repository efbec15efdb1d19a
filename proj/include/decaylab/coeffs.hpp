#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "decaylab/error.hpp"
#include "decaylab/numerics/quadrature.hpp"

namespace decaylab {

enum class Regime { NonNegative, NonEffective };

inline const char* to_string(Regime r) { return r == Regime::NonNegative ? "NonNegative" : "NonEffective"; }

/// sigma_0(eta) = m + sum_n alpha_n cos(n pi eta / T) + beta_n sin(n pi eta / T).
/// cos_coeffs[0] is alpha_1, sin_coeffs[0] is beta_1.
struct FourierDissipation {
  double mean_m = 0.0;
  double period_T = std::numbers::pi;
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;
  Regime regime = Regime::NonNegative;

  std::size_t n_max() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < cos_coeffs.size(); ++i)
      if (cos_coeffs[i] != 0.0) n = std::max(n, i + 1);
    for (std::size_t i = 0; i < sin_coeffs.size(); ++i)
      if (sin_coeffs[i] != 0.0) n = std::max(n, i + 1);
    return n;
  }

  double A1() const {
    double s = 0.0;
    for (double a : cos_coeffs) s += std::abs(a);
    for (double b : sin_coeffs) s += std::abs(b);
    return s;
  }

  /// Oscillating part sigma(eta) in the normalized variable x = pi*eta/T.
  double sigma_normalized(double x) const {
    const std::size_t n = n_max();
    if (n == 0) return 0.0;
    const double s1 = std::sin(x), c1 = std::cos(x);
    double sn = s1, cn = c1, acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k < cos_coeffs.size()) acc += cos_coeffs[k] * cn;
      if (k < sin_coeffs.size()) acc += sin_coeffs[k] * sn;
      const double sn1 = sn * c1 + cn * s1;
      cn = cn * c1 - sn * s1;
      sn = sn1;
    }
    return acc;
  }

  double sigma(double eta) const { return sigma_normalized(std::numbers::pi * eta / period_T); }
  double sigma0(double eta) const { return mean_m + sigma(eta); }

  /// (min, max) of sigma over one period: dense scan plus golden refinement of each extremum.
  std::pair<double, double> sigma_extremes() const {
    const std::size_t n = n_max();
    if (n == 0) return {0.0, 0.0};
    const int grid = static_cast<int>(512 * n);
    const double two_pi = 2.0 * std::numbers::pi;
    const double dx = two_pi / grid;
    int imin = 0, imax = 0;
    double vmin = sigma_normalized(0.0), vmax = vmin;
    for (int i = 1; i < grid; ++i) {
      const double v = sigma_normalized(i * dx);
      if (v < vmin) vmin = v, imin = i;
      if (v > vmax) vmax = v, imax = i;
    }
    auto f = [this](double x) { return sigma_normalized(x); };
    auto g = [this](double x) { return -sigma_normalized(x); };
    const double rmax = numerics::golden_section_max(f, (imax - 1) * dx, (imax + 1) * dx).second;
    const double rmin = -numerics::golden_section_max(g, (imin - 1) * dx, (imin + 1) * dx).second;
    return {std::min(vmin, rmin), std::max(vmax, rmax)};
  }

  double sigma_abs_max() const {
    const auto [lo, hi] = sigma_extremes();
    // Small upward pad so the value is a safe upper bound despite refinement round-off.
    return std::max(std::abs(lo), std::abs(hi)) * (1.0 + 1e-12);
  }

  double b1() const { return mean_m + sigma_abs_max(); }

  void validate(double grid_tol = 1e-12) const {
    if (!(period_T > 0.0) || !std::isfinite(period_T)) throw PreconditionError("sigma.period_T must be positive");
    if (!std::isfinite(mean_m)) throw PreconditionError("sigma.mean_m must be finite");
    for (double a : cos_coeffs)
      if (!std::isfinite(a)) throw PreconditionError("sigma.cos_coeffs must be finite");
    for (double b : sin_coeffs)
      if (!std::isfinite(b)) throw PreconditionError("sigma.sin_coeffs must be finite");
    if (regime == Regime::NonNegative) {
      const double lo = mean_m + sigma_extremes().first;
      if (lo < -grid_tol)
        throw AssumptionViolation("NonNegative regime but min sigma_0 = " + std::to_string(lo));
    } else {
      if (!(mean_m > 0.0 && mean_m < 1.0))
        throw AssumptionViolation("NonEffective regime requires 0 < m < 1, got m = " + std::to_string(mean_m));
    }
  }
};

inline double eval_sigma0(const FourierDissipation& s, double eta) { return s.sigma0(eta); }

enum class PhaseFamily { PowerLaw, LogPower, LogLogPower, Custom };

inline const char* to_string(PhaseFamily f) {
  switch (f) {
    case PhaseFamily::PowerLaw: return "PowerLaw";
    case PhaseFamily::LogPower: return "LogPower";
    case PhaseFamily::LogLogPower: return "LogLogPower";
    default: return "Custom";
  }
}

/// Phase eta(t) with derivatives. Quantities that may need t beyond double range
/// (the inverse of eta' for slowly growing families) are also exposed in the
/// log-time variable u = log(1+t).
class PhaseFunction {
 public:
  using Fn = std::function<double(double)>;

  static PhaseFunction power_law(double alpha) {
    if (!(alpha > 1.0)) throw AssumptionViolation("PowerLaw requires alpha > 1");
    return PhaseFunction(PhaseFamily::PowerLaw, alpha);
  }
  static PhaseFunction log_power(double beta) {
    if (!(beta > 0.0)) throw AssumptionViolation("LogPower requires beta > 0");
    return PhaseFunction(PhaseFamily::LogPower, beta);
  }
  static PhaseFunction loglog_power(double gamma) {
    if (!(gamma > 0.0)) throw AssumptionViolation("LogLogPower requires gamma > 0");
    return PhaseFunction(PhaseFamily::LogLogPower, gamma);
  }
  static PhaseFunction custom(Fn eta, Fn eta_p, Fn eta_pp) {
    PhaseFunction p(PhaseFamily::Custom, 0.0);
    p.eta_ = std::move(eta);
    p.eta_p_ = std::move(eta_p);
    p.eta_pp_ = std::move(eta_pp);
    return p;
  }

  PhaseFamily family() const { return family_; }
  double param() const { return param_; }

  double eta(double t) const {
    switch (family_) {
      case PhaseFamily::PowerLaw: return std::pow(1.0 + t, param_);
      case PhaseFamily::LogPower: {
        const double x = std::numbers::e + t;
        return x * std::pow(std::log(x), param_);
      }
      case PhaseFamily::LogLogPower: {
        const double x = kEe + t;
        return x * std::pow(std::log(std::log(x)), param_);
      }
      default: return eta_(t);
    }
  }

  double eta_prime(double t) const { return eta_prime_log(std::log1p(t)); }
  double eta_second(double t) const {
    if (family_ == PhaseFamily::Custom) return eta_pp_(t);
    return 1.0 / ((1.0 + t) * inv_weight_log(std::log1p(t)));
  }

  double eta0() const { return eta(0.0); }

  /// eta'(t) at t = e^u - 1.
  double eta_prime_log(double u) const {
    switch (family_) {
      case PhaseFamily::PowerLaw: return param_ * std::exp((param_ - 1.0) * u);
      case PhaseFamily::LogPower: {
        const double L = log_e_plus(u);
        return std::pow(L, param_) + param_ * std::pow(L, param_ - 1.0);
      }
      case PhaseFamily::LogLogPower: {
        const double Lg = log_ee_plus(u), LL = std::log(Lg);
        return std::pow(LL, param_) + param_ * std::pow(LL, param_ - 1.0) / Lg;
      }
      default: return eta_p_(std::expm1(u));
    }
  }

  /// 1/((1+t) eta''(t)) at t = e^u - 1; this is the quantity maximized by mu.
  double inv_weight_log(double u) const {
    switch (family_) {
      case PhaseFamily::PowerLaw:
        return std::exp(-(param_ - 1.0) * u) / (param_ * (param_ - 1.0));
      case PhaseFamily::LogPower: {
        const double b = param_;
        const double L = log_e_plus(u);
        const double ratio = 1.0 / (1.0 + (std::numbers::e - 1.0) * std::exp(-u));  // (1+t)/(e+t)
        const double w = ratio * b * std::pow(L, b - 1.0) * (1.0 + (b - 1.0) / L);
        return 1.0 / w;
      }
      case PhaseFamily::LogLogPower: {
        const double g = param_;
        const double Lg = log_ee_plus(u), LL = std::log(Lg);
        const double ratio = 1.0 / (1.0 + (kEe - 1.0) * std::exp(-u));  // (1+t)/(e^e+t)
        const double w = ratio * g * std::pow(LL, g - 1.0) / Lg * (1.0 - 1.0 / Lg + (g - 1.0) / (Lg * LL));
        return 1.0 / w;
      }
      default: {
        const double t = std::expm1(u);
        return 1.0 / ((1.0 + t) * eta_pp_(t));
      }
    }
  }

  double inv_weight(double t) const { return inv_weight_log(std::log1p(t)); }

  /// mu at t = e^u - 1: running maximum of inv_weight over [0,t].
  double mu_log(double u) const {
    if (family_ == PhaseFamily::PowerLaw) return 1.0 / (param_ * (param_ - 1.0));
    if (!(u > 0.0)) return checked_inv_weight(0.0);
    constexpr int kGrid = 4096;
    int kbest = 0;
    double best = checked_inv_weight(0.0);
    for (int k = 1; k < kGrid; ++k) {
      const double v = checked_inv_weight(u * k / (kGrid - 1));
      if (v > best) best = v, kbest = k;
    }
    const double lo = u * std::max(0, kbest - 1) / (kGrid - 1);
    const double hi = u * std::min(kGrid - 1, kbest + 1) / (kGrid - 1);
    if (hi > lo) {
      auto f = [this](double x) { return inv_weight_log(x); };
      best = std::max(best, numerics::golden_section_max(f, lo, hi).second);
    }
    return best;
  }

  double mu(double t) const {
    if (t < 0.0) throw PreconditionError("mu requires t >= 0");
    return mu_log(std::log1p(t));
  }

  /// mu at each of the ascending times ts, sharing one scan across intervals.
  std::vector<double> mu_sequence(const std::vector<double>& ts) const {
    std::vector<double> out(ts.size());
    if (ts.empty()) return out;
    if (family_ == PhaseFamily::PowerLaw) {
      std::fill(out.begin(), out.end(), mu_log(0.0));
      return out;
    }
    const double u_end = std::log1p(ts.back());
    double running = checked_inv_weight(0.0);
    double u_prev = 0.0;
    auto f = [this](double x) { return inv_weight_log(x); };
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (i > 0 && ts[i] < ts[i - 1]) throw PreconditionError("mu_sequence requires ascending times");
      const double u = std::log1p(ts[i]);
      if (u > u_prev) {
        const int pts = std::max(16, static_cast<int>(4096.0 * (u - u_prev) / std::max(u_end, 1e-300)));
        int kbest = 0;
        double best = checked_inv_weight(u_prev);
        for (int k = 1; k <= pts; ++k) {
          const double v = checked_inv_weight(u_prev + (u - u_prev) * k / pts);
          if (v > best) best = v, kbest = k;
        }
        const double lo = u_prev + (u - u_prev) * std::max(0, kbest - 1) / pts;
        const double hi = u_prev + (u - u_prev) * std::min(pts, kbest + 1) / pts;
        best = std::max(best, numerics::golden_section_max(f, lo, hi).second);
        running = std::max(running, best);
        u_prev = u;
      }
      out[i] = running;
    }
    return out;
  }

  /// u = log(1+t) with eta'(t) = r. Requires r >= eta'(0).
  double eta_prime_inverse_log(double r) const {
    const double r0 = eta_prime_log(0.0);
    if (!(r >= r0)) {
      if (r >= r0 * (1.0 - 1e-14)) return 0.0;
      throw DomainError("eta_prime_inverse: r=" + std::to_string(r) + " below eta'(0)=" + std::to_string(r0));
    }
    if (family_ == PhaseFamily::PowerLaw) return std::log(r / param_) / (param_ - 1.0);
    auto g = [&](double u) { return eta_prime_log(u) - r; };
    double hi = 1.0;
    while (g(hi) < 0.0) {
      hi *= 2.0;
      if (!std::isfinite(hi) || hi > 1e300)
        throw DomainError("eta_prime_inverse: root beyond representable range for r=" + std::to_string(r));
    }
    return numerics::bisect_increasing(g, 0.0, hi, 1e-16);
  }

  double eta_prime_inverse(double r) const {
    if (family_ == PhaseFamily::PowerLaw && r >= eta_prime_log(0.0))
      return std::pow(r / param_, 1.0 / (param_ - 1.0)) - 1.0;
    return std::expm1(eta_prime_inverse_log(r));
  }

  /// t with eta(t) = tau. Requires tau >= eta(0).
  double eta_inverse(double tau) const {
    const double e0 = eta0();
    if (!(tau >= e0)) throw DomainError("eta_inverse: tau below eta(0)");
    if (family_ == PhaseFamily::PowerLaw) return std::pow(tau, 1.0 / param_) - 1.0;
    auto g = [&](double t) { return eta(t) - tau; };
    double hi = 1.0;
    while (g(hi) < 0.0) {
      hi *= 2.0;
      if (!std::isfinite(hi)) throw DomainError("eta_inverse: root beyond representable range");
    }
    return numerics::bisect_increasing(g, 0.0, hi, 1e-16);
  }

  /// sqrt(mu((eta')^{-1}(r))); r below eta'(0) is clamped to t = 0.
  double zeta_gevrey(double r) const {
    const double r0 = eta_prime_log(0.0);
    if (r <= r0) return std::sqrt(mu_log(0.0));
    return std::sqrt(mu_log(eta_prime_inverse_log(r)));
  }

  /// (1 + s) eta'(s) with s = eta^{-1}(tau); tau below eta(0) is clamped to s = 0.
  double zeta_phase(double tau) const {
    const double s = tau <= eta0() ? 0.0 : eta_inverse(tau);
    return (1.0 + s) * eta_prime(s);
  }

  /// Pointwise check of eta' > 0 and eta'' > 0 on log-spaced samples of [0, t_max].
  void validate(double t_max = 1e4, int samples = 256) const {
    for (int i = 0; i < samples; ++i) {
      const double u = std::log1p(t_max) * i / (samples - 1);
      const double p = eta_prime_log(u), w = inv_weight_log(u);
      if (!(p > 0.0) || !(w > 0.0) || !std::isfinite(w))
        throw AssumptionViolation("phase derivatives not positive at t=" + std::to_string(std::expm1(u)));
    }
  }

  static constexpr double kEe = 15.154262241479264;  // e^e

 private:
  PhaseFunction(PhaseFamily f, double p) : family_(f), param_(p) {}

  static double log_e_plus(double u) { return u + std::log1p((std::numbers::e - 1.0) * std::exp(-u)); }
  static double log_ee_plus(double u) { return u + std::log1p((kEe - 1.0) * std::exp(-u)); }

  double checked_inv_weight(double u) const {
    const double w = inv_weight_log(u);
    if (!(w > 0.0) || !std::isfinite(w))
      throw AssumptionViolation("eta'' not positive at t=" + std::to_string(std::expm1(u)));
    return w;
  }

  PhaseFamily family_;
  double param_;
  Fn eta_, eta_p_, eta_pp_;
};

/// b(t) = sigma_0(eta(t)) / (1+t).
struct DissipativeCoefficient {
  FourierDissipation sigma;
  PhaseFunction phase = PhaseFunction::power_law(2.0);

  /// sigma evaluated along the phase, using the normalized phase pi*eta/T.
  double sigma_at(double t) const { return sigma.sigma(phase.eta(t)); }
  double b(double t) const { return (sigma.mean_m + sigma_at(t)) / (1.0 + t); }
  double delta(double t) const { return sigma_at(t) / (1.0 + t); }

  void validate(double t_max = 1e4) const {
    sigma.validate();
    phase.validate(t_max);
  }
};

inline double eval_b(const DissipativeCoefficient& c, double t) {
  if (t < 0.0) throw PreconditionError("eval_b requires t >= 0");
  return c.b(t);
}

inline double compute_mu(const PhaseFunction& p, double t) { return p.mu(t); }
inline double eta_prime_inverse(const PhaseFunction& p, double r) { return p.eta_prime_inverse(r); }
inline double compute_zeta_gevrey(const PhaseFunction& p, double r) { return p.zeta_gevrey(r); }

}  // namespace decaylab
