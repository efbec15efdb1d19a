#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <vector>

#include "decaylab/coeffs.hpp"
#include "decaylab/error.hpp"
#include "decaylab/numerics/dormand_prince.hpp"
#include "decaylab/numerics/quadrature.hpp"
#include "decaylab/stabilization.hpp"

namespace decaylab {

enum class Method { Direct, Polar };

inline const char* to_string(Method m) { return m == Method::Direct ? "Direct" : "Polar"; }

struct ModeProblem {
  DissipativeCoefficient coeff;
  double xi = 0.0;  // |xi|
  double v0 = 0.0;
  double v1 = 0.0;
  double t_end = 1.0;
  double tol = 1e-9;
};

struct ModeTrajectory {
  Method method = Method::Direct;
  double xi = 0.0;
  std::vector<double> times, v, v_t, energy;
  std::vector<double> rho, theta;  // polar runs only; theta unwrapped
  long steps = 0;

  std::size_t size() const { return times.size(); }
};

struct PolarState {
  double rho = 0.0;
  double theta = 0.0;
};

/// Dense theta(t) from a polar run, kept per accepted step.
struct ThetaPath {
  std::vector<numerics::DenseStep<1>> steps;

  double operator()(double t) const {
    if (steps.empty()) throw PreconditionError("empty ThetaPath");
    auto it = std::upper_bound(steps.begin(), steps.end(), t,
                               [](double x, const numerics::DenseStep<1>& s) { return x < s.t0; });
    const auto& s = it == steps.begin() ? steps.front() : *std::prev(it);
    return s.component(0, std::clamp(t, s.t0, s.t1()));
  }
  double t_begin() const { return steps.front().t0; }
  double t_end() const { return steps.back().t1(); }
};

inline double energy_density(const ModeTrajectory& traj, std::size_t i) {
  if (i >= traj.size()) throw PreconditionError("energy_density: index out of range");
  return traj.xi * traj.xi * traj.v[i] * traj.v[i] + traj.v_t[i] * traj.v_t[i];
}

/// {0} plus `count` log-spaced times on [t_start+1, t_end]; linear spacing if t_end <= t_start+1.
inline std::vector<double> default_time_grid(double t_end, int count = 512, double t_start = 0.0) {
  std::vector<double> g;
  g.push_back(t_start == 0.0 ? 0.0 : t_start);
  const double lo = t_start + 1.0;
  if (t_end <= lo) {
    for (int i = 1; i <= count; ++i) g.push_back(t_start + (t_end - t_start) * i / count);
    return g;
  }
  for (int i = 0; i < count; ++i) {
    const double x = std::log(lo) + (std::log(t_end) - std::log(lo)) * i / (count - 1);
    g.push_back(i == count - 1 ? t_end : std::exp(x));
  }
  return g;
}

namespace detail {
inline void check_grid(const std::vector<double>& grid, double t_end) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > t_end * (1.0 + 1e-14))
      throw PreconditionError("sample time outside [0, t_end]");
    if (i > 0 && grid[i] < grid[i - 1]) throw PreconditionError("sample times must be ascending");
  }
}

inline void check_problem(const ModeProblem& p) {
  if (!(p.tol > 0.0)) throw PreconditionError("tol must be positive");
  if (!(p.t_end > 0.0)) throw PreconditionError("t_end must be positive");
  if (!(p.xi >= 0.0)) throw PreconditionError("xi must be nonnegative");
}

// xi = 0: v_t = v1 beta(t), v = v0 + v1 int_0^t beta.
inline ModeTrajectory solve_zero_mode(const ModeProblem& p, const std::vector<double>& grid, Method method) {
  ModeTrajectory tr;
  tr.method = method;
  tr.xi = 0.0;
  const double m = p.coeff.sigma.mean_m;
  const bool pure = p.coeff.sigma.n_max() == 0;
  std::unique_ptr<DissipationTable> table;
  if (!pure) table = std::make_unique<DissipationTable>(p.coeff, p.t_end, true);
  for (double t : grid) {
    double beta, ibeta;
    if (pure) {
      beta = std::exp(-m * std::log1p(t));
      ibeta = (m == 1.0) ? std::log1p(t) : std::expm1((1.0 - m) * std::log1p(t)) / (1.0 - m);
    } else {
      beta = table->beta(t);
      ibeta = table->beta_integral(t);
    }
    tr.times.push_back(t);
    tr.v.push_back(p.v0 + p.v1 * ibeta);
    tr.v_t.push_back(p.v1 * beta);
    tr.energy.push_back(tr.v_t.back() * tr.v_t.back());
    if (method == Method::Polar) {
      tr.rho.push_back(std::abs(tr.v_t.back()));
      tr.theta.push_back(p.v1 >= 0 ? std::numbers::pi / 2 : -std::numbers::pi / 2);
    }
  }
  return tr;
}
}  // namespace detail

/// Adaptive Dormand-Prince solve of v'' + xi^2 v + b v' = 0 in the scaled variables
/// (xi v, v_t) (plain v when xi = 0), sampled at `grid` (default grid if empty).
inline ModeTrajectory solve_direct(const ModeProblem& p, std::vector<double> grid = {}) {
  detail::check_problem(p);
  if (grid.empty()) grid = default_time_grid(p.t_end);
  detail::check_grid(grid, p.t_end);
  const double xi = p.xi;
  const auto& c = p.coeff;
  const double sx = xi > 0.0 ? xi : 1.0;
  auto rhs = [&](double t, const numerics::State<2>& y, numerics::State<2>& dy) {
    const double b = c.b(t);
    if (xi > 0.0) {
      dy[0] = xi * y[1];
      dy[1] = -xi * y[0] - b * y[1];
    } else {
      dy[0] = y[1];
      dy[1] = -b * y[1];
    }
  };
  numerics::DopriOptions opt;
  // local control at tol/50: energy drift grows with the step count, and long oscillatory runs take 1e5+ steps
  opt.rtol = 0.02 * p.tol;
  opt.atol = 1e-4 * p.tol * std::max(std::hypot(sx * p.v0, p.v1), 1e-300);
  opt.shared_scale = xi > 0.0;  // at xi = 0, v grows while v_t decays; scale them separately

  ModeTrajectory tr;
  tr.method = Method::Direct;
  tr.xi = xi;
  tr.times.reserve(grid.size());
  std::size_t next = 0;
  auto emit = [&](double t, double w, double vt) {
    const double v = xi > 0.0 ? w / xi : w;
    tr.times.push_back(t);
    tr.v.push_back(v);
    tr.v_t.push_back(vt);
    tr.energy.push_back(xi * xi * v * v + vt * vt);
  };
  while (next < grid.size() && grid[next] <= 0.0) emit(grid[next++], sx * p.v0, p.v1);
  numerics::State<2> y0{sx * p.v0, p.v1};
  if (p.v0 == 0.0 && p.v1 == 0.0) {
    while (next < grid.size()) emit(grid[next++], 0.0, 0.0);
    return tr;
  }
  long steps = 0;
  numerics::dopri5<2>(rhs, 0.0, y0, grid.empty() ? p.t_end : std::min(p.t_end, grid.back()), opt,
                      [&](const numerics::DenseStep<2>& d) {
                        ++steps;
                        while (next < grid.size() && grid[next] <= d.t1()) {
                          const auto y = d(grid[next]);
                          emit(grid[next], y[0], y[1]);
                          ++next;
                        }
                        return next < grid.size();
                      });
  tr.steps = steps;
  return tr;
}

/// Polar angle with (xi v0, v1) = rho (cos theta, sin theta); the branch follows the sign of v1.
inline PolarState polar_initial(double xi, double v0, double v1) {
  PolarState s;
  s.rho = std::hypot(xi * v0, v1);
  if (s.rho == 0.0) return s;
  s.theta = std::acos(std::clamp(xi * v0 / s.rho, -1.0, 1.0));
  if (v1 < 0.0) s.theta = -s.theta;
  return s;
}

/// Phase-amplitude solve: integrates theta' = -xi - b sin(theta)cos(theta) and recovers
/// rho = rho0 exp(-int b sin^2 theta) by adaptive Simpson on the dense theta output.
inline ModeTrajectory solve_polar(const ModeProblem& p, double theta0, double rho0, std::vector<double> grid = {},
                                  ThetaPath* path = nullptr) {
  detail::check_problem(p);
  if (!(rho0 > 0.0)) throw PreconditionError("solve_polar requires positive initial energy");
  if (grid.empty()) grid = default_time_grid(p.t_end);
  detail::check_grid(grid, p.t_end);
  const double xi = p.xi;
  const auto& c = p.coeff;
  if (xi == 0.0) {
    // theta is frozen at +-pi/2 and only rho evolves; use the closed form.
    ModeProblem q = p;
    q.v1 = rho0 * std::sin(theta0);
    return detail::solve_zero_mode(q, grid, Method::Polar);
  }
  auto rhs = [&](double t, const numerics::State<1>& y, numerics::State<1>& dy) {
    dy[0] = -xi - c.b(t) * std::sin(y[0]) * std::cos(y[0]);
  };
  numerics::DopriOptions opt;
  opt.rtol = 0.0;
  // same margin as the direct solver; theta errors feed int b sin^2 theta and accumulate
  opt.atol = 0.02 * p.tol;

  ModeTrajectory tr;
  tr.method = Method::Polar;
  tr.xi = xi;
  std::size_t next = 0;
  auto emit = [&](double t, double th, double I) {
    const double rho = rho0 * std::exp(-I);
    const double v = rho * std::cos(th) / xi, vt = rho * std::sin(th);
    tr.times.push_back(t);
    tr.rho.push_back(rho);
    tr.theta.push_back(th);
    tr.v.push_back(v);
    tr.v_t.push_back(vt);
    tr.energy.push_back(xi * xi * v * v + vt * vt);
  };
  while (next < grid.size() && grid[next] <= 0.0) emit(grid[next++], theta0, 0.0);
  double I = 0.0;  // int_0^{t_k} b sin^2 theta
  long steps = 0;
  numerics::dopri5<1>(rhs, 0.0, numerics::State<1>{theta0}, std::min(p.t_end, grid.back()), opt,
                      [&](const numerics::DenseStep<1>& d) {
                        ++steps;
                        if (path) path->steps.push_back(d);
                        auto f = [&](double s) {
                          const double th = d.component(0, s);
                          const double sn = std::sin(th);
                          return c.b(s) * sn * sn;
                        };
                        const double qtol = std::max(p.tol * d.h / (1.0 + d.t0), 1e-17);
                        while (next < grid.size() && grid[next] <= d.t1()) {
                          const double s = grid[next];
                          emit(s, d.component(0, s), I + numerics::adaptive_simpson(f, d.t0, s, qtol));
                          ++next;
                        }
                        I += numerics::adaptive_simpson(f, d.t0, d.t1(), qtol);
                        return next < grid.size() || path != nullptr;
                      });
  tr.steps = steps;
  return tr;
}

inline ModeTrajectory solve_polar(const ModeProblem& p, std::vector<double> grid = {}, ThetaPath* path = nullptr) {
  const auto s = polar_initial(p.xi, p.v0, p.v1);
  return solve_polar(p, s.theta, s.rho, std::move(grid), path);
}

enum ZoneLabel : unsigned { ZoneD = 1u, ZoneH1 = 2u, ZoneH2 = 4u };

struct ZonePartition {
  double N = 1.0;

  /// T0(xi; N) = max{N/xi - 1, 0}; +inf at xi = 0.
  double threshold(double xi) const {
    if (xi <= 0.0) return std::numeric_limits<double>::infinity();
    return std::max(N / xi - 1.0, 0.0);
  }
};

/// Bit set of ZoneLabel values; closed zones, so boundary points carry two labels.
/// Z_D is (1+t)xi <= N, which differs from t <= T0 only when T0 is clamped at 0.
inline unsigned classify_zone(const ZonePartition& zp, double t, double xi) {
  if (!(zp.N >= 1.0)) throw PreconditionError("zone parameter N must be >= 1");
  const double T0 = zp.threshold(xi);
  unsigned z = 0;
  if ((1.0 + t) * xi <= zp.N) z |= ZoneD;
  if (t >= T0) z |= (xi < zp.N) ? ZoneH1 : ZoneH2;
  return z;
}

inline std::string zone_names(unsigned z) {
  std::string s;
  auto add = [&](const char* n) { s += s.empty() ? n : std::string(",") + n; };
  if (z & ZoneD) add("Z_D");
  if (z & ZoneH1) add("Z_H1");
  if (z & ZoneH2) add("Z_H2");
  return s;
}

/// Max over samples of |(1+t)^2 (xi^2 v^2 + (v_t + v/(1+t))^2) - (xi^2 v0^2 + (v1+v0)^2)|
/// for b = 2/(1+t). Both solvers are run where applicable; the worse residual is returned.
inline double m2_identity_residual(const ModeProblem& p, std::vector<double> grid = {}) {
  if (p.coeff.sigma.mean_m != 2.0 || p.coeff.sigma.n_max() != 0)
    throw PreconditionError("m2_identity_residual requires m = 2 and sigma = 0");
  const double xi = p.xi;
  const double c0 = xi * xi * p.v0 * p.v0 + (p.v1 + p.v0) * (p.v1 + p.v0);
  auto worst = [&](const ModeTrajectory& tr) {
    double r = 0.0;
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const double s = 1.0 + tr.times[i];
      const double w = tr.v_t[i] + tr.v[i] / s;
      r = std::max(r, std::abs(s * s * (xi * xi * tr.v[i] * tr.v[i] + w * w) - c0));
    }
    return r;
  };
  double r = worst(solve_direct(p, grid));
  if (xi > 0.0 && (p.v0 != 0.0 || p.v1 != 0.0)) r = std::max(r, worst(solve_polar(p, grid)));
  return r;
}

}  // namespace decaylab
