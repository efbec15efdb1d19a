#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>

#include "decaylab/error.hpp"

namespace decaylab::numerics {

/// Dormand-Prince 5(4) with PI step control and 4th-order continuous extension.
/// State is a fixed-size array; the right-hand side is f(t, y, dydt).

template <std::size_t N>
using State = std::array<double, N>;

struct DopriOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double h_initial = 0.0;  // 0 selects automatically
  double h_max = std::numeric_limits<double>::infinity();
  long max_steps = 200'000'000;
  double safety = 0.9;
  double fac_min = 0.2;
  double fac_max = 10.0;
  double beta = 0.04;
  // One error scale for all components, taken from the largest |y_i|. Suits oscillators
  // whose components pass through zero while the amplitude stays put.
  bool shared_scale = false;
};

/// Dense-output polynomial for one accepted step [t0, t0+h].
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> r{};

  double t1() const { return t0 + h; }

  State<N> operator()(double t) const {
    const double th = (t - t0) / h, th1 = 1.0 - th;
    State<N> y;
    for (std::size_t i = 0; i < N; ++i)
      y[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
    return y;
  }

  double component(std::size_t i, double t) const {
    const double th = (t - t0) / h, th1 = 1.0 - th;
    return r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
  }
};

struct DopriStats {
  long accepted = 0;
  long rejected = 0;
  long rhs_evals = 0;
};

namespace dp45 {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp45

/// Integrates from t0 to t_end. on_step(const DenseStep<N>&) is called after every
/// accepted step; returning false stops the integration early.
/// Returns the state at the final time reached.
template <std::size_t N, class Rhs, class OnStep>
State<N> dopri5(Rhs&& f, double t0, State<N> y, double t_end, const DopriOptions& opt, OnStep&& on_step,
                DopriStats* stats = nullptr) {
  using namespace dp45;
  DopriStats st;
  if (t_end <= t0) return y;
  auto norm = [&](const State<N>& err, const State<N>& y0, const State<N>& y1) {
    double s = 0.0, amp = 0.0;
    if (opt.shared_scale)
      for (std::size_t i = 0; i < N; ++i) amp = std::max({amp, std::abs(y0[i]), std::abs(y1[i])});
    for (std::size_t i = 0; i < N; ++i) {
      const double sc =
          opt.atol + opt.rtol * (opt.shared_scale ? amp : std::max(std::abs(y0[i]), std::abs(y1[i])));
      const double q = err[i] / sc;
      s += q * q;
    }
    return std::sqrt(s / N);
  };

  State<N> k1, k2, k3, k4, k5, k6, k7, yt, ynew, err;
  f(t0, y, k1);
  st.rhs_evals = 1;

  double h = opt.h_initial;
  if (h <= 0.0) {
    // Hairer's starting-step heuristic.
    State<N> zero{};
    const double d0 = norm(y, zero, zero), d1n = norm(k1, zero, zero);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, t_end - t0);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h0 * k1[i];
    f(t0 + h0, yt, k2);
    ++st.rhs_evals;
    for (std::size_t i = 0; i < N; ++i) err[i] = (k2[i] - k1[i]);
    const double d2 = norm(err, zero, zero) / h0;
    const double mx = std::max(d1n, d2);
    const double h1 = mx <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / mx, 0.2);
    h = std::min({100.0 * h0, h1, opt.h_max});
  }

  const double expo = 0.2 - 0.75 * opt.beta;
  double facold = 1e-4;
  double t = t0;
  bool last_rejected = false;
  DenseStep<N> dense;

  for (long n = 0;; ++n) {
    if (n >= opt.max_steps) throw IntegrationFailure("step budget exhausted", t);
    bool final_step = false;
    if (t + 1.01 * h >= t_end) {
      h = t_end - t;
      final_step = true;
    }
    if (h > opt.h_max) {
      h = opt.h_max;
      final_step = false;
    }
    if (h < 1e-14 * std::max(1.0, std::abs(t)) || !std::isfinite(h))
      throw IntegrationFailure("step size underflow", t);

    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * a21 * k1[i];
    f(t + c2 * h, yt, k2);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + c3 * h, yt, k3);
    for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + c4 * h, yt, k4);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + c5 * h, yt, k5);
    for (std::size_t i = 0; i < N; ++i)
      yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    const double tph = final_step ? t_end : t + h;
    f(tph, yt, k6);
    for (std::size_t i = 0; i < N; ++i)
      ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    f(tph, ynew, k7);
    st.rhs_evals += 6;
    for (std::size_t i = 0; i < N; ++i)
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);

    double en = norm(err, y, ynew);
    if (!std::isfinite(en)) {
      // Treat overflow inside a trial step as a rejection with a hard cut.
      en = 1e10;
    }
    if (en <= 1.0) {
      for (std::size_t i = 0; i < N; ++i) {
        const double dy = ynew[i] - y[i];
        const double bspl = h * k1[i] - dy;
        dense.r[0][i] = y[i];
        dense.r[1][i] = dy;
        dense.r[2][i] = bspl;
        dense.r[3][i] = dy - h * k7[i] - bspl;
        dense.r[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      dense.t0 = t;
      dense.h = h;
      ++st.accepted;
      const bool at_end = final_step || tph >= t_end;
      t = at_end ? t_end : tph;
      y = ynew;
      k1 = k7;
      const bool keep_going = on_step(static_cast<const DenseStep<N>&>(dense));
      if (at_end || !keep_going) break;

      double fac = opt.safety * std::pow(std::max(en, 1e-300), -expo) * std::pow(facold, opt.beta);
      fac = std::clamp(fac, opt.fac_min, opt.fac_max);
      facold = std::max(en, 1e-4);
      if (last_rejected) fac = std::min(fac, 1.0);
      h *= fac;
      last_rejected = false;
    } else {
      ++st.rejected;
      const double fac = std::max(opt.fac_min, opt.safety * std::pow(en, -expo));
      h *= fac;
      last_rejected = true;
    }
  }
  if (stats) *stats = st;
  return y;
}

}  // namespace decaylab::numerics
