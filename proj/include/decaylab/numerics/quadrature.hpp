#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <utility>
#include <vector>

#include "decaylab/error.hpp"

namespace decaylab::numerics {

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  long evaluations = 0;
};

/// Gauss-Legendre rule on [-1,1], nodes by Newton iteration on P_n.
class GaussLegendre {
 public:
  explicit GaussLegendre(int n) : x_(n), w_(n) {
    for (int i = 0; i < n; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 1.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x_[i] = z;
      w_[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }

  int size() const { return static_cast<int>(x_.size()); }
  double node(int i) const { return x_[i]; }
  double weight(int i) const { return w_[i]; }

  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += w_[i] * f(c + h * x_[i]);
    return s * h;
  }

 private:
  std::vector<double> x_, w_;
};

inline const GaussLegendre& gauss_legendre8() {
  static const GaussLegendre rule(8);
  return rule;
}

namespace detail {
inline constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};
}  // namespace detail

/// One Gauss-Kronrod 7/15 panel. Error estimate is the plain |K15 - G7| difference.
template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * detail::kWgk[7];
  double g = fc * detail::kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * detail::kXgk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    k += detail::kWgk[j] * (f1 + f2);
    if (j % 2 == 1) g += detail::kWg[j / 2] * (f1 + f2);
  }
  return {k * h, std::abs((k - g) * h)};
}

/// Globally adaptive GK15: bisects the panel with largest error estimate until
/// the summed estimate is below max(abs_tol, rel_tol*|I|).
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double abs_tol, double rel_tol = 0.0,
                              int max_panels = 200000) {
  QuadResult out;
  if (a == b) return out;
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::priority_queue<detail::Panel> heap;
  auto [v, e] = gk15(f, a, b);
  out.evaluations = 15;
  heap.push({a, b, v, e});
  double total = v, err = e;
  while (err > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= max_panels) {
      throw QuadratureError("adaptive quadrature exceeded panel budget on [" + std::to_string(a) + "," +
                            std::to_string(b) + "], error estimate " + std::to_string(err));
    }
    detail::Panel p = heap.top();
    heap.pop();
    const double m = 0.5 * (p.a + p.b);
    if (!(m > p.a && m < p.b)) {
      // Panel cannot be split further; accept its estimate.
      heap.push({p.a, p.b, p.value, 0.0});
      err -= p.error;
      continue;
    }
    auto [v1, e1] = gk15(f, p.a, m);
    auto [v2, e2] = gk15(f, m, p.b);
    out.evaluations += 30;
    total += v1 + v2 - p.value;
    err += e1 + e2 - p.error;
    heap.push({p.a, m, v1, e1});
    heap.push({m, p.b, v2, e2});
  }
  // Re-sum to limit cancellation drift from incremental updates.
  double sum = 0.0, esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  out.value = sign * sum;
  out.abs_error = esum;
  return out;
}

/// Adaptive quadrature over consecutive breakpoints; tolerance split evenly.
template <class F>
QuadResult integrate_breakpoints(F&& f, const std::vector<double>& pts, double abs_tol) {
  QuadResult out;
  if (pts.size() < 2) return out;
  const double tol_each = abs_tol / static_cast<double>(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto r = integrate_adaptive(f, pts[i], pts[i + 1], tol_each);
    out.value += r.value;
    out.abs_error += r.abs_error;
    out.evaluations += r.evaluations;
  }
  return out;
}

namespace detail {
template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Classic recursive adaptive Simpson with Richardson correction.
template <class F>
double adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 40) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Golden-section search for a maximum of a unimodal function on [a,b].
template <class F>
std::pair<double, double> golden_section_max(F&& f, double a, double b, double tol = 1e-14) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    }
  }
  return f1 > f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

/// Root of an increasing function g on [lo,hi] with g(lo) <= 0 <= g(hi), by bisection
/// until the bracket stops shrinking or is below rel_tol.
template <class G>
double bisect_increasing(G&& g, double lo, double hi, double rel_tol = 1e-15) {
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    if (hi - lo <= rel_tol * std::max(1.0, std::abs(mid))) break;
    if (g(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace decaylab::numerics
