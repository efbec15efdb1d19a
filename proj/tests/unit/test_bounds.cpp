#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "decaylab/bounds.hpp"

using namespace decaylab;
using std::numbers::e;

namespace {

DissipativeCoefficient coeff(double m, double b1 = 0.0, PhaseFunction ph = PhaseFunction::power_law(2),
                             Regime r = Regime::NonNegative) {
  DissipativeCoefficient c;
  c.sigma.mean_m = m;
  if (b1 != 0.0) c.sigma.sin_coeffs = {b1};
  c.sigma.regime = r;
  c.phase = std::move(ph);
  return c;
}

ModeProblem problem(const DissipativeCoefficient& c, double xi, double v0, double v1, double t_end,
                    double tol = 1e-10) {
  ModeProblem p;
  p.coeff = c;
  p.xi = xi;
  p.v0 = v0;
  p.v1 = v1;
  p.t_end = t_end;
  p.tol = tol;
  return p;
}

}  // namespace

TEST(GammaTm, Examples) {
  for (double m : {0.3, 1.0, 2.5}) EXPECT_EQ(gamma_tm(0, m), 0.0);
  EXPECT_NEAR(gamma_tm(e - 1, 1), 1.0, 1e-15);
  EXPECT_NEAR(gamma_tm(9, 2), 0.9, 1e-15);
  EXPECT_NEAR(gamma_tm(1e12, 2), 1.0, 1e-11);
  EXPECT_NEAR(gamma_tm(3, 0.5), 2.0, 1e-15);
}

TEST(GammaTm, ContinuousAcrossMEqualsOne) {
  for (double t : {0.5, 10.0, 1e4}) {
    EXPECT_NEAR(gamma_tm(t, 1 + 1e-9), gamma_tm(t, 1), 1e-6 * gamma_tm(t, 1));
    EXPECT_NEAR(gamma_tm(t, 1 - 1e-9), gamma_tm(t, 1), 1e-6 * gamma_tm(t, 1));
  }
}

TEST(CmConstant, Branches) {
  EXPECT_DOUBLE_EQ(C_m(3), 0.25);
  EXPECT_DOUBLE_EQ(C_m(1), 4 * std::exp(-2.0));
  EXPECT_DOUBLE_EQ(C_m(0.5), 4.0);
  EXPECT_THROW(C_m(0), PreconditionError);
}

TEST(CmConstant, DominatesGammaOnGrid) {
  for (double m : {0.2, 0.5, 0.9, 1.0, 1.2, 1.7, 2.0, 3.0, 6.0}) {
    const Regime r = m < 1 ? Regime::NonEffective : Regime::NonNegative;
    const double mb = m_bar0(r, m), c = C_m(m);
    for (double t : log1p_space(0, 1e6, 4000)) {
      const double g = gamma_tm(t, m) / (1 + t);
      EXPECT_LE(g * g, c * std::pow(1 + t, -mb) * (1 + 1e-12)) << m << " " << t;
    }
  }
}

TEST(OmegaBand, TrivialWithoutOscillation) {
  const auto w = omega_band(coeff(1), 1e4, 1e-4);
  EXPECT_EQ(w.omega0, 1.0);
  EXPECT_EQ(w.omega1, 1.0);
  EXPECT_EQ(w.omega_at_0, 1.0);
}

TEST(OmegaBand, PowerLawBandsNearOneAndTightenWithAlpha) {
  const auto w2 = omega_band(coeff(1, 1, PhaseFunction::power_law(2)), 1e4, 1e-4);
  const auto w8 = omega_band(coeff(1, 1, PhaseFunction::power_law(8)), 1e4, 1e-4);
  EXPECT_LE(w2.omega0, w2.omega1);
  EXPECT_GT(w2.omega0, 0.5);
  EXPECT_LT(w2.omega1, 2.0);
  EXPECT_LT(w8.ratio_1_0, w2.ratio_1_0);
  EXPECT_LE(w2.omega0, w2.omega_at_0);
  EXPECT_LE(w2.omega_at_0, w2.omega1);
}

TEST(OmegaBand, HorizonTooSmall) {
  EXPECT_THROW(omega_band(coeff(1, 1, PhaseFunction::log_power(0.5)), 10, 1e-6), HorizonTooSmall);
}

TEST(Constants, FormulaPiecesMatch) {
  const auto c = coeff(1, 0.5);
  const auto k = assemble_constants(c, 1, 0.1);
  EXPECT_DOUBLE_EQ(k.A1, 0.5);
  EXPECT_NEAR(k.b1, 1.5, 1e-9);  // sup of sigma, padded upward
  EXPECT_DOUBLE_EQ(k.kappa, 0.1);
  const double mu = c.phase.mu(k.tau_N_kappa);
  const double b = k.b1 + 2;
  const double lk = k.B0_cert + b * 2.5 + 4 * 0.5 * b / 0.1 + 2 * 0.1 * 0.5 * mu;
  EXPECT_NEAR(k.log_K_H, lk, 1e-12);
  EXPECT_NEAR(k.log_K_D, std::log(2.0) + 2 * k.B0_cert, 1e-15);
  EXPECT_GT(k.B0_cert, 0);
  const double z = c.phase.zeta_gevrey(2.1);
  EXPECT_NEAR(k.nu, 2 * 0.5 * b / (0.1 * z) + 0.1 * 0.5 * z, 1e-12);
  EXPECT_NEAR(k.log_K_D_tilde(1), k.log_K_D + std::log1p(4 * std::exp(-2.0)), 1e-15);
  EXPECT_LE(k.log_K_H_gevrey, k.log_K_H);
}

TEST(Constants, ZeroOscillationDropsKappaTerms) {
  const auto k = assemble_constants(coeff(1), 1, 0.1);
  EXPECT_EQ(k.B0_cert, 0.0);
  EXPECT_EQ(k.kappa, 0.0);
  EXPECT_NEAR(k.log_K_H, 6.0, 1e-15);  // (b1+2)(2m)/N with b1 = m = 1
  EXPECT_EQ(k.nu, 0.0);
  EXPECT_DOUBLE_EQ(k.K_D, 2.0);
}

TEST(Constants, NonEffectiveUsesWMatrixConstants) {
  const auto k = assemble_constants(coeff(0.5, 0.2, PhaseFunction::power_law(2), Regime::NonEffective), 10, 1);
  const double r = k.omega.ratio_1_0;
  EXPECT_NEAR(k.log_K1, std::log(10.0) + 2 * std::log(r) + std::sqrt(r) * 10, 1e-12);
  EXPECT_NEAR(k.K2, k.omega.ratio_1_at0 * (1 + 10 * k.K1 / 0.5), 1e-9 * k.K2);
  EXPECT_NEAR(k.log_K_D, std::log(4.0) + 2 * std::max(k.log_K1, k.log_K2), 1e-12);
  EXPECT_DOUBLE_EQ(k.m_bar0, 0.5);
}

TEST(Constants, RejectsFreeCase) {
  EXPECT_THROW(assemble_constants(coeff(0), 1, 1), PreconditionError);
  EXPECT_THROW(assemble_constants(coeff(1), 0.5, 1), PreconditionError);
}

TEST(Constants, KHMonotoneInFormulaParameters) {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> U(0, 1);
  for (int i = 0; i < 500; ++i) {
    const double B0 = U(rng), b1 = U(rng), m = 0.1 + 3 * U(rng), A1 = U(rng), N = 1 + 10 * U(rng),
                 eps = 0.05 + U(rng), mu = 3 * U(rng), d = 0.1 + U(rng);
    const double base = log_K_H_formula(B0, b1, m, A1, N, eps, mu);
    EXPECT_LE(log_K_H_formula(B0, b1, m, A1, N + d, eps, mu), base);
    EXPECT_GE(log_K_H_formula(B0, b1, m, A1 + d, N, eps, mu), base);
    EXPECT_GE(log_K_H_formula(B0, b1 + d, m, A1, N, eps, mu), base);
    EXPECT_GE(log_K_H_formula(B0 + d, b1, m, A1, N, eps, mu), base);
  }
}

TEST(HyperbolicCheck, UndampedOscillationZH2) {
  const auto c = coeff(1);
  const auto k = assemble_constants(c, 1, 1);
  const auto tr = solve_direct(problem(c, 1, 1, 0, 100));
  const auto r = hyperbolic_bound_check(tr, k, ZoneH2);
  EXPECT_TRUE(r.passed());
  EXPECT_GT(r.worst_margin(), 0.0);
  EXPECT_EQ(r.samples, long(tr.size()));
}

TEST(HyperbolicCheck, OscillatingCoefficientZH2) {
  const auto c = coeff(1, 0.5);
  const auto k = assemble_constants(c, 1, 0.1);
  const auto tr = solve_direct(problem(c, 2, 1, 0.3, 200));
  const auto r = hyperbolic_bound_check(tr, k, ZoneH2);
  EXPECT_TRUE(r.passed());
  EXPECT_GT(r.worst_margin(), 0.0);
}

TEST(HyperbolicCheck, ZH1StartsAtThreshold) {
  const auto c = coeff(1.5, 0.5);
  const auto k = assemble_constants(c, 4, 0.5);
  const double xi = 0.5, T0 = 7.0;
  auto grid = log1p_space(T0, 150, 200);
  grid.insert(grid.begin(), 0.0);
  auto tr = solve_direct(problem(c, xi, 1, 1, 150), grid);
  EXPECT_THROW(hyperbolic_bound_check(tr, k, ZoneH1), PreconditionError);  // t = 0 is not in Z_H1
  for (auto* v : {&tr.times, &tr.v, &tr.v_t, &tr.energy}) v->erase(v->begin());
  const auto r = hyperbolic_bound_check(tr, k, ZoneH1);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.bound_id, "hyperbolic_ZH1");
}

TEST(HyperbolicCheck, ZoneMismatch) {
  const auto c = coeff(1);
  const auto k = assemble_constants(c, 10, 1);
  const auto tr = solve_direct(problem(c, 1, 1, 0, 5));
  EXPECT_THROW(hyperbolic_bound_check(tr, k, ZoneH2), PreconditionError);
  EXPECT_THROW(hyperbolic_bound_check(tr, k, ZoneD), PreconditionError);
}

TEST(DissipativeCheck, ZeroFrequencyClosedForm) {
  const auto c = coeff(1);
  const auto k = assemble_constants(c, 1, 1);
  EXPECT_DOUBLE_EQ(k.K_D, 2.0);
  const auto tr = solve_direct(problem(c, 0, 0, 1, 1000));
  const auto r = dissipative_bound_check(tr, k, Regime::NonNegative);
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.worst_log_headroom, std::log(2.0), 1e-6);
}

TEST(DissipativeCheck, NonEffectiveSmallFrequency) {
  const auto c = coeff(0.5, 0.2, PhaseFunction::power_law(2), Regime::NonEffective);
  const auto k = assemble_constants(c, 10, 1);
  const double T0 = 10 / 0.01 - 1;
  for (auto d : {std::array{1.0, 0.0}, std::array{0.0, 1.0}, std::array{0.6, -0.8}}) {
    const auto tr = solve_direct(problem(c, 0.01, d[0], d[1], T0, 1e-9), log1p_space(0, T0, 512));
    const auto r = dissipative_bound_check(tr, k, Regime::NonEffective);
    EXPECT_TRUE(r.passed());
    EXPECT_GT(r.worst_margin(), 0.0);
  }
}

TEST(DissipativeCheck, ZeroDataPasses) {
  const auto c = coeff(1, 0.5);
  const auto k = assemble_constants(c, 5, 1);
  const auto tr = solve_direct(problem(c, 0.5, 0, 0, 9));
  const auto r = dissipative_bound_check(tr, k, Regime::NonNegative);
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(r.worst_margin(), 1.0);
}

TEST(DissipativeCheck, RegimeAndZoneMismatch) {
  const auto c = coeff(1);
  const auto k = assemble_constants(c, 1, 1);
  const auto tr = solve_direct(problem(c, 0.5, 1, 0, 5));
  EXPECT_THROW(dissipative_bound_check(tr, k, Regime::NonEffective), PreconditionError);
  EXPECT_THROW(dissipative_bound_check(tr, k, Regime::NonNegative), PreconditionError);
}

TEST(Thm1Envelope, PowerLawDecaysLikeM) {
  const auto k = assemble_constants(coeff(1.5, 0.5), 1, 1);
  const double a = thm1_envelope(1e3, 1, 0, k, 1.5), b = thm1_envelope(1e4, 1, 0, k, 1.5);
  EXPECT_NEAR(std::log(a / b) / std::log(10001.0 / 1001.0), 1.5, 1e-9);
}

TEST(Thm1Envelope, SmallMBarIsNearlyFlat) {
  const auto k = assemble_constants(coeff(1.5), 1, 1);
  const double a = thm1_envelope(1e6, 1, 0, k, 1e-6), b = thm1_envelope(1e8, 1, 0, k, 1e-6);
  EXPECT_NEAR(a / b, 1.0, 1e-4);
}

TEST(Thm1Envelope, LogPowerSlopeApproachesMBar) {
  const auto k = assemble_constants(coeff(1.5, 0.5, PhaseFunction::log_power(0.5)), 1, 1);
  const double t1 = 1e12, t2 = 1e13;
  const double s = (log_thm1_factor(t1, k.coeff.phase.mu(t1), k, 1.0) - log_thm1_factor(t2, k.coeff.phase.mu(t2), k, 1.0)) /
                   std::log((1 + t2) / (1 + t1));
  EXPECT_NEAR(s, 1.0, 0.05);
}

TEST(Thm1Envelope, MBarRange) {
  const auto k = assemble_constants(coeff(3), 1, 1);
  EXPECT_DOUBLE_EQ(k.m_bar0, 2.0);
  EXPECT_THROW(thm1_envelope(1, 1, 0, k, 2.5), PreconditionError);
  EXPECT_THROW(thm1_envelope(1, 1, 0, k, 0), PreconditionError);
  EXPECT_NO_THROW(thm1_envelope(1, 1, 0, k, 2));
}

TEST(Thm2Envelope, ShapeAndWeight) {
  const auto k = assemble_constants(coeff(3), 1, 1);
  EXPECT_NEAR(thm2_envelope(9, 1, k) / thm2_envelope(99, 1, k), 100.0, 1e-9);
  const auto kp = assemble_constants(coeff(1, 0.5, PhaseFunction::power_law(2)), 1, 1);
  EXPECT_NEAR(log_gevrey_weight(0.1, kp), log_gevrey_weight(30, kp), 1e-12);
  const auto kl = assemble_constants(coeff(1, 0.5, PhaseFunction::log_power(0.5)), 1, 1);
  EXPECT_GT(log_gevrey_weight(30, kl), log_gevrey_weight(1, kl));
}

TEST(LatticeChecks, SmallLatticeAllZones) {
  const auto k = assemble_constants(coeff(1, 0.5), 1, 1);
  LatticeSpec s;
  s.n_xi = 4;
  s.n_t = 64;
  s.t_end = 60;
  s.xi_max = 5;
  for (unsigned z : {unsigned(ZoneD), unsigned(ZoneH1), unsigned(ZoneH2)}) {
    const auto r = zone_lattice_check(k, z, s);
    EXPECT_TRUE(r.passed()) << zone_names(z);
    EXPECT_EQ(r.samples, 4 * 64 * 3);
  }
  const auto t1 = thm1_mode_lattice_check(k, 1.0, s);
  EXPECT_TRUE(t1.passed());
}

TEST(WMatrixBounds, NonEffectiveSmallFrequencies) {
  const auto k = assemble_constants(coeff(0.5, 0.2, PhaseFunction::power_law(2), Regime::NonEffective), 10, 1);
  const auto r = w_matrix_bound_check(k, {0.05, 0.5, 2.0}, 40);
  EXPECT_TRUE(r.passed());
  EXPECT_LT(r.constants_used.at("liouville_rel_error_max"), 1e-6);
  EXPECT_THROW(w_matrix_bound_check(assemble_constants(coeff(1), 1, 1), {0.1}, 4), PreconditionError);
}

TEST(LatticeChecks, ZoneDEndpointIsInsideZone) {
  const decaylab::ZonePartition zp{10.0};
  for (double xi : {0.156152, 0.1, 0.3, 0.7, 1.0 / 3.0, 9.999}) {
    const double t = decaylab::N_over(10.0, xi);
    EXPECT_TRUE(decaylab::classify_zone(zp, t, xi) & decaylab::ZoneD) << xi;
  }
}
