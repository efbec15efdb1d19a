#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/numerics/quadrature.hpp"

namespace decaylab {

/// Normalized phase pi*eta/T, so sigma has period 2*pi in it.
inline double normalized_eta(const DissipativeCoefficient& c, double t) {
  return std::numbers::pi * c.phase.eta(t) / c.sigma.period_T;
}

/// Upper bound for sup_{T1 > T0} |int_{T0}^{T1} sigma(eta(s))/(1+s) ds|:
/// 6 A1 / zeta_phase(eta~(T0) - 4 pi), in the normalized phase eta~ = pi eta / T.
inline double stabilization_tail_bound(const DissipativeCoefficient& c, double T0) {
  const double A1 = c.sigma.A1();
  if (A1 == 0.0) return 0.0;
  const double four_pi = 4.0 * std::numbers::pi;
  const double en = normalized_eta(c, T0);
  if (!(en > four_pi))
    throw DomainError("stabilization_tail_bound: normalized eta(T0) must exceed 4 pi");
  const double scale = std::numbers::pi / c.sigma.period_T;
  const double tau = (en - four_pi) / scale;  // back in the un-normalized eta variable
  // Every point that enters the bound lies in [0, inf), so arguments below eta(0) use s = 0.
  const double s = tau <= c.phase.eta0() ? 0.0 : c.phase.eta_inverse(tau);
  const double zeta = (1.0 + s) * scale * c.phase.eta_prime(s);
  return 6.0 * A1 / zeta;
}

/// Smallest T0 <= horizon (to bisection precision) with tail bound <= tol.
/// Throws HorizonTooSmall if the bound at `horizon` is still above tol.
inline double tail_settling_time(const DissipativeCoefficient& c, double horizon, double tol) {
  if (c.sigma.A1() == 0.0) return 0.0;
  const double four_pi = 4.0 * std::numbers::pi;
  auto ok = [&](double t) { return normalized_eta(c, t) > four_pi && stabilization_tail_bound(c, t) <= tol; };
  if (!(normalized_eta(c, horizon) > four_pi))
    throw HorizonTooSmall("horizon does not reach normalized phase 4 pi", std::numeric_limits<double>::infinity());
  if (!ok(horizon)) throw HorizonTooSmall("stabilization tail above tolerance at horizon", stabilization_tail_bound(c, horizon));
  if (ok(0.0)) return 0.0;
  double lo = 0.0, hi = horizon;
  while (hi - lo > 1e-9 * (1.0 + hi)) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? hi : lo) = mid;
  }
  return hi;
}

/// Cumulative table of S(t) = int_0^t sigma(eta(s))/(1+s) ds on [0, horizon].
/// Segments advance the normalized phase by at most (pi/2)/n_max and span at most
/// a quarter of (1+t), and are integrated with 8-point Gauss-Legendre.
class DissipationTable {
 public:
  DissipationTable(const DissipativeCoefficient& c, double horizon, bool with_beta_integral = false,
                   int refine = 1)
      : c_(c), horizon_(horizon) {
    if (!(horizon >= 0.0)) throw PreconditionError("DissipationTable requires horizon >= 0");
    ts_.push_back(0.0);
    Ss_.push_back(0.0);
    const std::size_t n = c.sigma.n_max();
    if (n == 0 || horizon == 0.0) {
      if (horizon > 0.0) {
        ts_.push_back(horizon);
        Ss_.push_back(0.0);
      }
    } else {
      build(static_cast<double>(n) * std::max(1, refine));
    }
    find_extremes();
    if (with_beta_integral) build_beta_integral();
  }

  double horizon() const { return horizon_; }
  std::size_t segments() const { return ts_.size() - 1; }

  double S(double t) const {
    if (t <= 0.0) return 0.0;
    if (t > horizon_ * (1.0 + 1e-14)) throw PreconditionError("DissipationTable::S beyond horizon");
    const std::size_t k = locate(t);
    if (t == ts_[k]) return Ss_[k];
    return Ss_[k] + segment_integral(ts_[k], t);
  }

  /// int_0^t b(s) ds = m log(1+t) + S(t).
  double B(double t) const { return c_.sigma.mean_m * std::log1p(t) + S(t); }
  double beta(double t) const { return std::exp(-B(t)); }

  /// int_0^t beta(s) ds. Requires the table to be built with_beta_integral.
  double beta_integral(double t) const {
    if (Is_.empty()) throw PreconditionError("DissipationTable built without beta integral");
    if (t <= 0.0) return 0.0;
    const std::size_t k = locate(t);
    if (t == ts_[k]) return Is_[k];
    const double a = ts_[k];
    return Is_[k] + numerics::gauss_legendre8().integrate([&](double s) { return beta_in_segment(k, s); }, a, t);
  }

  double min_S() const { return minS_; }
  double max_S() const { return maxS_; }
  double S_end() const { return Ss_.back(); }

 private:
  double integrand(double s) const { return c_.sigma_at(s) / (1.0 + s); }

  double segment_integral(double a, double b) const {
    return numerics::gauss_legendre8().integrate([this](double s) { return integrand(s); }, a, b);
  }

  std::size_t locate(double t) const {
    auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
    if (it == ts_.begin()) return 0;
    return std::min<std::size_t>(static_cast<std::size_t>(it - ts_.begin()) - 1, ts_.size() - 1);
  }

  void build(double n) {
    const double scale = std::numbers::pi / c_.sigma.period_T;
    const double target = 0.5 * std::numbers::pi / n;
    double t = 0.0, S = 0.0;
    while (t < horizon_) {
      const double rate = scale * c_.phase.eta_prime(t);
      double dt = std::min(0.25 * (1.0 + t), target / rate);
      if (t + dt > horizon_) dt = horizon_ - t;
      for (int guard = 0; guard < 60; ++guard) {
        const double adv = scale * (c_.phase.eta(t + dt) - c_.phase.eta(t));
        if (adv <= 1.5 * target) break;
        dt *= 0.5;
      }
      if (!(dt > 0.0) || t + dt == t) throw IntegrationFailure("dissipation table cannot advance", t);
      S += segment_integral(t, t + dt);
      t += dt;
      if (horizon_ - t < 1e-15 * horizon_) t = horizon_;
      ts_.push_back(t);
      Ss_.push_back(S);
    }
  }

  // Extremes of S over [0, horizon]. Interior extrema sit at sign changes of sigma(eta(t));
  // segments whose endpoint values cannot beat the current record are skipped.
  void find_extremes() {
    minS_ = maxS_ = 0.0;
    for (double s : Ss_) {
      minS_ = std::min(minS_, s);
      maxS_ = std::max(maxS_, s);
    }
    if (c_.sigma.n_max() == 0) return;
    const double smax = c_.sigma.sigma_abs_max();
    for (std::size_t k = 0; k + 1 < ts_.size(); ++k) {
      const double a = ts_[k], b = ts_[k + 1];
      const double pad = smax * std::log1p((b - a) / (1.0 + a));
      const double hi = std::max(Ss_[k], Ss_[k + 1]) + pad, lo = std::min(Ss_[k], Ss_[k + 1]) - pad;
      if (hi <= maxS_ && lo >= minS_) continue;
      constexpr int kProbe = 8;
      double prev_t = a, prev_v = c_.sigma_at(a);
      for (int j = 1; j <= kProbe; ++j) {
        const double tj = a + (b - a) * j / kProbe;
        const double vj = c_.sigma_at(tj);
        if ((prev_v > 0.0) != (vj > 0.0)) {
          const bool rising = vj > 0.0;
          auto g = [&](double x) { return rising ? c_.sigma_at(x) : -c_.sigma_at(x); };
          const double z = numerics::bisect_increasing(g, prev_t, tj, 1e-15);
          const double Sz = Ss_[k] + segment_integral(a, z);
          minS_ = std::min(minS_, Sz);
          maxS_ = std::max(maxS_, Sz);
        }
        prev_t = tj;
        prev_v = vj;
      }
    }
  }

  double beta_in_segment(std::size_t k, double s) const {
    const double Sk = Ss_[k] + (s == ts_[k] ? 0.0 : segment_integral(ts_[k], s));
    return std::exp(-c_.sigma.mean_m * std::log1p(s) - Sk);
  }

  void build_beta_integral() {
    Is_.assign(ts_.size(), 0.0);
    for (std::size_t k = 0; k + 1 < ts_.size(); ++k) {
      Is_[k + 1] = Is_[k] + numerics::gauss_legendre8().integrate(
                                [&](double s) { return beta_in_segment(k, s); }, ts_[k], ts_[k + 1]);
    }
  }

  DissipativeCoefficient c_;
  double horizon_;
  std::vector<double> ts_, Ss_, Is_;
  double minS_ = 0.0, maxS_ = 0.0;
};

struct B0Estimate {
  double estimate = 0.0;   // max S - min S over the integrated range
  double tail = 0.0;       // stabilization tail bound at the end of the integrated range
  double certified = 0.0;  // estimate + tail
  double horizon_used = 0.0;
  double S_min = 0.0, S_max = 0.0, S_end = 0.0;
  std::size_t segments = 0;
};

/// Certified B0. Integrates S up to the first time where the tail bound drops below
/// tail_tol (never past `horizon`); `grid` subdivides every table segment further.
inline B0Estimate estimate_B0(const DissipativeCoefficient& c, double horizon, int grid = 1,
                              double tail_tol = 1e-4) {
  B0Estimate r;
  if (c.sigma.n_max() == 0) {
    r.horizon_used = horizon;
    return r;
  }
  const double H = tail_settling_time(c, horizon, tail_tol);
  DissipationTable table(c, H, false, std::max(1, grid));
  r.horizon_used = H;
  r.segments = table.segments();
  r.S_min = table.min_S();
  r.S_max = table.max_S();
  r.S_end = table.S_end();
  r.estimate = r.S_max - r.S_min;
  r.tail = stabilization_tail_bound(c, H);
  r.certified = r.estimate + r.tail;
  return r;
}

/// Enclosure of omega(t) = exp(int_t^inf sigma(eta(s))/(1+s) ds) over t >= 0.
/// omega0, omega1 and omega_at_0 are nominal values (S_inf taken as S(H));
/// the ratio fields are certified upper bounds including the tail.
struct OmegaBand {
  double omega0 = 1.0, omega1 = 1.0, omega_at_0 = 1.0;
  double ratio_1_0 = 1.0;   // >= omega1 / omega0
  double ratio_at0_0 = 1.0; // >= omega(0) / omega0
  double ratio_1_at0 = 1.0; // >= omega1 / omega(0)
  double tail = 0.0;
  double horizon_used = 0.0;
};

inline OmegaBand compute_omega_band(const DissipativeCoefficient& c, double horizon, double tol = 1e-4) {
  OmegaBand w;
  if (c.sigma.n_max() == 0) {
    w.horizon_used = horizon;
    return w;
  }
  const double H = tail_settling_time(c, horizon, tol);
  DissipationTable table(c, H);
  const double tail = stabilization_tail_bound(c, H);
  const double SH = table.S_end(), lo = table.min_S(), hi = table.max_S();
  // log omega(t) = S_inf - S(t); S_inf lies in S(H) +- tail and S(t) in S(H) +- tail for t > H
  w.omega0 = std::exp(std::min(SH - hi, 0.0));
  w.omega1 = std::exp(std::max(SH - lo, 0.0));
  w.omega_at_0 = std::exp(SH);
  w.ratio_1_0 = std::exp(hi - lo + 2.0 * tail);
  w.ratio_at0_0 = std::exp(hi + 2.0 * tail);
  w.ratio_1_at0 = std::exp(-lo + 2.0 * tail);
  w.tail = tail;
  w.horizon_used = H;
  return w;
}

}  // namespace decaylab
