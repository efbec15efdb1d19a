#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "decaylab/bounds.hpp"
#include "decaylab/cli/config.hpp"
#include "decaylab/integrals.hpp"
#include "decaylab/mode_solver.hpp"
#include "decaylab/spectral.hpp"

namespace decaylab::cli {

struct FitOutcome {
  FitTarget target;
  DecayFit fit;
  bool passed = true;
};

struct CsvTable {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct SuiteOutcome {
  std::string suite;
  std::vector<CheckResult> checks;
  std::vector<FitOutcome> fits;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

struct RunReport {
  ExperimentConfig config;
  std::map<std::string, double> constants;
  std::vector<SuiteOutcome> suites;
  std::vector<CsvTable> tables;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
  std::string timestamp;

  bool violated() const {
    for (const auto& s : suites) {
      for (const auto& c : s.checks)
        if (!c.passed()) return true;
      for (const auto& f : s.fits)
        if (!f.passed) return true;
    }
    return false;
  }
  int exit_code() const { return violated() ? 2 : 0; }

  std::vector<std::string> violation_ledger() const {
    std::vector<std::string> v;
    for (const auto& s : suites) {
      for (const auto& c : s.checks) {
        if (c.violations > 0)
          v.push_back(s.suite + "/" + c.bound_id + ": " + std::to_string(c.violations) + " of " +
                      std::to_string(c.samples) + " samples violated (worst at t=" + std::to_string(c.worst_t) +
                      ", xi=" + std::to_string(c.worst_xi) + ")");
        if (c.nonfinite > 0)
          v.push_back(s.suite + "/" + c.bound_id + ": " + std::to_string(c.nonfinite) + " non-finite samples");
      }
      for (const auto& f : s.fits)
        if (!f.passed && !std::isfinite(f.fit.exponent))
          v.push_back(s.suite + "/" + f.target.id + ": non-finite fit");
        else if (!f.passed)
          v.push_back(s.suite + "/" + f.target.id + ": fitted exponent " + std::to_string(f.fit.exponent) +
                      " outside [" + std::to_string(f.target.lo) + ", " + std::to_string(f.target.hi) + "]");
    }
    return v;
  }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Auxiliary-estimate certification: oscillatory integral sweep, split signs, log ratios, the theta
/// integral along real mode paths, and the stabilization tail.
inline std::vector<CheckResult> lemma_checks(const DissipativeCoefficient& c, double N, double eps, bool full,
                                             unsigned jobs) {
  std::vector<CheckResult> out;
  out.push_back(ossint_sweep(full, jobs));
  auto [sign, logr] = split_and_logratio_sweep();
  out.push_back(sign);
  out.push_back(logr);
  CheckResult th;
  th.bound_id = "theta_integral";
  for (double f : {0.3, 1.0, 3.0}) {
    const double xi = f * N;
    const double T0 = ZonePartition{N}.threshold(xi);
    th.merge(theta_integral_mode_check(c, xi, N, eps, std::max(200.0, 4.0 * (1.0 + T0))));
  }
  out.push_back(th);
  CheckResult tail;
  for (double T0 : {5.0, 50.0}) tail.merge(stabilization_tail_check(c, T0));
  tail.bound_id = "stabilization_tail";
  out.push_back(tail);
  return out;
}

class Runner {
 public:
  Runner(ExperimentConfig cfg, unsigned jobs, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), jobs_(std::max(1u, jobs)), log_(log) {}

  RunReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport rep;
    rep.config = cfg_;
    rep.timestamp = utc_timestamp();
    for (const auto& s : cfg_.suites) {
      const auto s0 = std::chrono::steady_clock::now();
      SuiteOutcome o;
      o.suite = s;
      say("suite " + s);
      if (s == "simulate")
        simulate(o, rep);
      else if (s == "verify-bounds")
        verify_bounds(o);
      else if (s == "verify-lemmas")
        verify_lemmas(o);
      else if (s == "fit-decay")
        fit_decay_suite(o);
      o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
      rep.suites.push_back(std::move(o));
    }
    if (energy_) {
      rep.tables.push_back(energy_table());
      for (const auto& w : energy_->warnings) rep.warnings.push_back(w);
    }
    for (const auto& [eps, k] : consts_)
      for (const auto& [name, v] : k.table()) rep.constants[eps_key(eps) + name] = v;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
  }

 private:
  ExperimentConfig cfg_;
  unsigned jobs_;
  std::ostream* log_;
  std::map<double, BoundConstants> consts_;
  std::optional<EnergyTrajectory> energy_;
  std::optional<double> log_W_;

  void say(const std::string& s) const {
    if (log_) *log_ << "[decaylab] " << s << "\n";
  }

  std::string eps_key(double eps) const {
    if (consts_.size() <= 1) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "eps=%g/", eps);
    return buf;
  }

  const BoundConstants& constants(double eps) {
    auto it = consts_.find(eps);
    if (it == consts_.end()) {
      say("assembling constants (eps=" + std::to_string(eps) + ")");
      it = consts_.emplace(eps, assemble_constants(cfg_.coeff, cfg_.N, eps, cfg_.horizon, cfg_.tail_tol)).first;
    }
    return it->second;
  }

  std::vector<double> time_grid() const { return log1p_space(0.0, cfg_.t_end, cfg_.t_samples); }

  const EnergyTrajectory& energy() {
    if (!energy_) {
      if (!cfg_.has_data) throw PreconditionError("total energy needs a data section");
      say("total energy over " + std::to_string(cfg_.spectral.count) + " radii");
      energy_ = total_energy(cfg_.spectral, cfg_.u0, cfg_.u1, cfg_.coeff, time_grid(), cfg_.spectral_tol, jobs_);
    }
    return *energy_;
  }

  double hdot_sq_thm1() const { return grid_seminorm_sq(cfg_.spectral, cfg_.u0, 1.0 - 0.5 * cfg_.thm1_m_bar); }

  double log_W() {
    if (!log_W_) {
      const auto& k = constants(cfg_.thm2_eps);
      log_W_ = log_gevrey_weighted_energy(cfg_.spectral, cfg_.u0, cfg_.u1, cfg_.coeff.phase, k.nu, k.eps);
    }
    return *log_W_;
  }

  CsvTable energy_table() {
    CsvTable t;
    t.name = "energy_total";
    t.columns = {"t", "E", "envelope_thm1", "envelope_thm2", "margin"};
    const auto& e = *energy_;
    std::vector<double> mus;
    const BoundConstants* k1 = nullptr;
    const BoundConstants* k2 = nullptr;
    double hd = 0.0, lw = 0.0;
    const bool bounds = cfg_.coeff.sigma.mean_m > 0.0;
    if (cfg_.thm1 && bounds) {
      k1 = &constants(cfg_.thm1_eps);
      mus = cfg_.coeff.phase.mu_sequence(e.times);
      hd = hdot_sq_thm1();
    }
    if (cfg_.thm2 && bounds) {
      try {
        lw = log_W();
        k2 = &constants(cfg_.thm2_eps);
      } catch (const DataNotAdmissible&) {
        k2 = nullptr;
      }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < e.times.size(); ++i) {
      const double env1 = k1 ? std::exp(log_thm1_factor(e.times[i], mus[i], *k1, cfg_.thm1_m_bar)) * (e.E.front() + hd) : nan;
      const double env2 = k2 ? std::exp(log_thm2_factor(e.times[i], *k2) + lw) : nan;
      const double env = std::isfinite(env1) ? env1 : env2;
      const double margin = std::isfinite(env) && env > 0.0 ? 1.0 - e.E[i] / env : nan;
      t.rows.push_back({e.times[i], e.E[i], env1, env2, margin});
    }
    return t;
  }

  void simulate(SuiteOutcome& o, RunReport& rep) {
    const auto grid = time_grid();
    CheckResult m2;
    m2.bound_id = "m2_identity";
    m2.zone = "all";
    CsvTable m2t;
    m2t.name = "m2_identity";
    m2t.columns = {"xi", "residual"};
    for (const auto& m : cfg_.modes) {
      ModeProblem p;
      p.coeff = cfg_.coeff;
      p.xi = m.xi;
      p.v0 = m.v0;
      p.v1 = m.v1;
      p.t_end = cfg_.t_end;
      p.tol = cfg_.tol;
      const auto tr = solve_direct(p, grid);
      CsvTable t;
      char buf[64];
      std::snprintf(buf, sizeof buf, "mode_xi_%g", m.xi);
      t.name = buf;
      t.columns = {"t", "v", "v_t", "energy"};
      for (std::size_t i = 0; i < tr.size(); ++i) t.rows.push_back({tr.times[i], tr.v[i], tr.v_t[i], tr.energy[i]});
      rep.tables.push_back(std::move(t));
      if (cfg_.m2_identity) {
        const double r = m2_identity_residual(p, grid);
        m2.record(r, cfg_.m2_threshold, cfg_.t_end, m.xi);
        m2t.rows.push_back({m.xi, r});
      }
    }
    if (cfg_.m2_identity) {
      m2.constants_used["threshold"] = cfg_.m2_threshold;
      o.checks.push_back(m2);
      rep.tables.push_back(std::move(m2t));
    }
    if (cfg_.has_data) energy();
  }

  void verify_bounds(SuiteOutcome& o) {
    const auto& k = constants(cfg_.bounds_eps);
    if (cfg_.lattice_enabled) {
      for (unsigned z : {unsigned(ZoneD), unsigned(ZoneH1), unsigned(ZoneH2)}) {
        say("zone lattice " + zone_names(z));
        auto s = cfg_.lattice;
        s.jobs = jobs_;
        o.checks.push_back(zone_lattice_check(k, z, s));
      }
      if (cfg_.thm1 && cfg_.thm1_lattice) {
        say("decay envelope, per-mode lattice");
        auto s = cfg_.lattice;
        s.jobs = jobs_;
        o.checks.push_back(thm1_mode_lattice_check(constants(cfg_.thm1_eps), cfg_.thm1_m_bar, s));
      }
      if (k.regime == Regime::NonEffective) {
        say("fundamental matrix bounds");
        const auto xis = zone_frequencies(ZoneD, k.N, cfg_.lattice);
        o.checks.push_back(w_matrix_bound_check(k, xis, std::min(cfg_.lattice.n_t, 128), cfg_.lattice.t_end));
      }
    }
    if (cfg_.cross_solver_problems > 0) {
      say("direct versus polar");
      o.checks.push_back(cross_solver_sweep(cfg_.seed, cfg_.cross_solver_problems, 1e-6, 60.0, cfg_.tol));
    }
    if (cfg_.has_data && cfg_.thm1) {
      say("decay envelope, total energy");
      o.checks.push_back(thm1_total_check(energy(), constants(cfg_.thm1_eps), cfg_.thm1_m_bar, hdot_sq_thm1()));
    }
    if (cfg_.has_data && cfg_.thm2) {
      say("Gevrey envelope, total energy");
      o.checks.push_back(thm2_total_check(energy(), constants(cfg_.thm2_eps), log_W()));
    }
  }

  void verify_lemmas(SuiteOutcome& o) {
    for (auto& c : lemma_checks(cfg_.coeff, cfg_.N, cfg_.bounds_eps, cfg_.lemma_sweep == "full", jobs_))
      o.checks.push_back(std::move(c));
  }

  // non-finite or non-positive energies fail the fit instead of aborting the run
  template <class F>
  static void guarded_fit(FitOutcome& f, SuiteOutcome& o, F&& fit) {
    try {
      f.fit = fit();
    } catch (const DomainError& e) {
      f.fit = DecayFit{};
      f.fit.exponent = std::numeric_limits<double>::quiet_NaN();
      o.warnings.push_back(f.target.id + ": " + e.what());
    }
    f.passed = std::isfinite(f.fit.exponent) &&
               (!f.target.has_band || (f.fit.exponent >= f.target.lo && f.fit.exponent <= f.target.hi));
  }

  void fit_decay_suite(SuiteOutcome& o) {
    if (cfg_.fit_total) {
      FitOutcome f;
      f.target = cfg_.total_fit;
      guarded_fit(f, o, [&] { return fit_decay(energy(), f.target.t_lo, f.target.t_hi); });
      o.fits.push_back(f);
    }
    for (const auto& mf : cfg_.mode_fits) {
      ModeProblem p;
      p.coeff = cfg_.coeff;
      p.xi = mf.mode.xi;
      p.v0 = mf.mode.v0;
      p.v1 = mf.mode.v1;
      p.t_end = cfg_.t_end;
      p.tol = cfg_.tol;
      auto grid = log1p_space(mf.target.t_lo, mf.target.t_hi, 256);
      if (grid.front() > 0.0) grid.insert(grid.begin(), 0.0);
      const auto tr = solve_direct(p, grid);
      FitOutcome f;
      f.target = mf.target;
      char buf[64];
      std::snprintf(buf, sizeof buf, "mode_xi_%g", mf.mode.xi);
      f.target.id = buf;
      guarded_fit(f, o, [&] { return fit_decay(tr.times, tr.energy, f.target.t_lo, f.target.t_hi); });
      o.fits.push_back(f);
    }
  }
};

inline RunReport run_experiment(const ExperimentConfig& cfg, unsigned jobs, std::ostream* log = nullptr) {
  return Runner(cfg, jobs, log).run();
}

}  // namespace decaylab::cli
