#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "decaylab/spectral.hpp"

using namespace decaylab;
using std::numbers::pi;

namespace {

DissipativeCoefficient coeff(double m, double b1 = 0.0, PhaseFunction ph = PhaseFunction::power_law(2)) {
  DissipativeCoefficient c;
  c.sigma.mean_m = m;
  if (b1 != 0.0) c.sigma.sin_coeffs = {b1};
  c.phase = std::move(ph);
  return c;
}

}  // namespace

TEST(RadialSpectrum, Profiles) {
  EXPECT_DOUBLE_EQ(RadialSpectrum::gaussian(2)(2), std::exp(-1.0));
  const auto b = RadialSpectrum::compact_bump(1, 3);
  EXPECT_DOUBLE_EQ(b(2), 1.0);
  EXPECT_EQ(b(1), 0.0);
  EXPECT_EQ(b(3.5), 0.0);
  EXPECT_DOUBLE_EQ(RadialSpectrum::power_tail(2, 1)(1), 0.25);
  EXPECT_NEAR(std::exp(b.log_sq(1.5)), b(1.5) * b(1.5), 1e-15);
  EXPECT_THROW(RadialSpectrum::compact_bump(2, 1).validate(), PreconditionError);
}

TEST(SpectralConfig, SurfaceFactor) {
  SpectralConfig c;
  EXPECT_DOUBLE_EQ(c.surface_factor(), 2.0);
  c.dimension = 2;
  EXPECT_NEAR(c.surface_factor(), 2 * pi, 1e-14);
  c.dimension = 3;
  EXPECT_NEAR(c.surface_factor(), 4 * pi, 1e-13);
}

TEST(HdotSeminorm, GaussianMoments) {
  SpectralConfig c;
  const auto g = RadialSpectrum::gaussian(1);
  EXPECT_NEAR(hdot_seminorm(c, g, 0), std::pow(pi / 2, 0.25), 1e-12);
  EXPECT_NEAR(std::pow(hdot_seminorm(c, g, 1), 2), std::sqrt(2 * pi) / 8, 1e-12);
  // d = 3, s = 0: 4 pi int r^2 e^{-2 r^2} dr = 4 pi sqrt(2 pi)/16
  c.dimension = 3;
  EXPECT_NEAR(std::pow(hdot_seminorm(c, g, 0), 2), pi * std::sqrt(2 * pi) / 4, 1e-11);
}

TEST(HdotSeminorm, WeightMonotoneForHighFrequencyData) {
  SpectralConfig c;
  const auto b = RadialSpectrum::compact_bump(1.5, 4);
  EXPECT_GT(hdot_seminorm(c, b, 1), hdot_seminorm(c, b, 0));
  for (double s : {-3.0, 0.0, 5.0}) EXPECT_TRUE(std::isfinite(hdot_seminorm(c, RadialSpectrum::compact_bump(1, 2), s)));
}

TEST(HdotSeminorm, DivergentEndsAreNamed) {
  SpectralConfig c;
  try {
    hdot_seminorm(c, RadialSpectrum::gaussian(1), -0.6);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("r -> 0"), std::string::npos);
  }
  try {
    hdot_seminorm(c, RadialSpectrum::power_tail(1, 1), 1);
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("infinity"), std::string::npos);
  }
  EXPECT_EQ(hdot_seminorm(c, RadialSpectrum::zero(), 1), 0.0);
}

TEST(HdotSeminorm, PowerTailClosedForm) {
  // 2 int (1+r)^{-6} dr = 2/5
  SpectralConfig c;
  EXPECT_NEAR(std::pow(hdot_seminorm(c, RadialSpectrum::power_tail(3, 1), 0), 2), 0.4, 1e-9);
}

TEST(GridSeminorm, MatchesAdaptive) {
  SpectralConfig c;
  const auto g = RadialSpectrum::gaussian(1);
  EXPECT_NEAR(grid_seminorm_sq(c, g, 1), std::pow(hdot_seminorm(c, g, 1), 2), 1e-9);
}

TEST(TotalEnergy, ParsevalAtZero) {
  SpectralConfig c;
  const auto g0 = RadialSpectrum::gaussian(1), g1 = RadialSpectrum::gaussian(0.5, 0.3);
  const auto tr = total_energy(c, g0, g1, coeff(1, 0.5), {0.0, 1.0}, 1e-8, 1);
  const double expect = std::pow(hdot_seminorm(c, g0, 1), 2) + std::pow(hdot_seminorm(c, g1, 0), 2);
  EXPECT_NEAR(tr.E[0], expect, 5e-3 * expect);
  EXPECT_TRUE(tr.warnings.empty());
}

TEST(TotalEnergy, MTwoIdentityBoundsEnergy) {
  // modewise (1+t)^2 (v^2 + (v_t + v/(1+t))^2 / xi^2 ...) is conserved; so (1+t)^2 E stays bounded
  SpectralConfig c;
  c.count = 48;
  const auto ts = log1p_space(0, 200, 40);
  const auto tr = total_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::zero(), coeff(2), ts, 1e-9, 1);
  double hi = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) hi = std::max(hi, tr.E[i] * (1 + ts[i]) * (1 + ts[i]));
  EXPECT_LT(hi, 10 * tr.E[0]);
}

TEST(TotalEnergy, GridRefinementUnderOnePercent) {
  SpectralConfig a;  // shipped default, 96 radii
  SpectralConfig b = a;
  b.count = 191;  // doubled density, same endpoints
  const auto ts = log1p_space(0, 100, 20);
  const auto c = coeff(1, 0.5);
  const auto A = total_energy(a, RadialSpectrum::gaussian(1), RadialSpectrum::gaussian(1), c, ts, 1e-8, 1);
  const auto B = total_energy(b, RadialSpectrum::gaussian(1), RadialSpectrum::gaussian(1), c, ts, 1e-8, 1);
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_NEAR(A.E[i], B.E[i], 0.01 * B.E[i]);
}

TEST(TotalEnergy, MonotoneUnderNonNegativeDamping) {
  SpectralConfig c;
  c.count = 32;
  const auto ts = log1p_space(0, 100, 30);
  const auto tr = total_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::gaussian(2), coeff(0.8, 0.5), ts, 1e-9, 1);
  for (std::size_t i = 1; i < ts.size(); ++i) EXPECT_LE(tr.E[i], tr.E[i - 1] * (1 + 1e-6));
}

TEST(TotalEnergy, CoarseGridWarns) {
  SpectralConfig c;
  c.count = 5;
  c.xi_min = 0.1;
  c.xi_max = 10;
  const auto tr = total_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::zero(), coeff(1), {0.0}, 1e-8, 1);
  EXPECT_FALSE(tr.warnings.empty());
}

TEST(TotalEnergy, DeterministicAcrossJobCounts) {
  SpectralConfig c;
  c.count = 24;
  const auto ts = log1p_space(0, 30, 10);
  const auto a = total_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::zero(), coeff(1, 0.5), ts, 1e-8, 1);
  const auto b = total_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::zero(), coeff(1, 0.5), ts, 1e-8, 4);
  for (std::size_t i = 0; i < ts.size(); ++i) EXPECT_EQ(a.E[i], b.E[i]);
}

TEST(GevreyWeighted, PowerLawConstantWeight) {
  SpectralConfig c;
  const auto ph = PhaseFunction::power_law(2);
  const auto g = RadialSpectrum::gaussian(1);
  const double z = ph.zeta_gevrey(1.0);
  EXPECT_NEAR(ph.zeta_gevrey(100.0), z, 1e-12);
  const double W = gevrey_weighted_energy(c, g, RadialSpectrum::zero(), ph, 0.7, 1.0);
  const double plain = std::pow(hdot_seminorm(c, g, 0), 2) + std::pow(hdot_seminorm(c, g, 1), 2);
  EXPECT_NEAR(W, std::exp(1.4 * z) * plain, 1e-9 * W);
}

TEST(GevreyWeighted, LogPowerGaussianFinitePowerTailDiverges) {
  SpectralConfig c;
  const auto ph = PhaseFunction::log_power(0.5);
  const double lw = log_gevrey_weighted_energy(c, RadialSpectrum::gaussian(1), RadialSpectrum::zero(), ph, 1.1, 1.0);
  EXPECT_TRUE(std::isfinite(lw));
  EXPECT_THROW(log_gevrey_weighted_energy(c, RadialSpectrum::power_tail(4, 1), RadialSpectrum::zero(), ph, 1.1, 1.0),
               DataNotAdmissible);
}

TEST(FitDecay, SyntheticInputs) {
  std::vector<double> t, e, k;
  for (double x : log1p_space(1, 1e4, 64)) {
    t.push_back(x);
    e.push_back(std::pow(1 + x, -2));
    k.push_back(5);
  }
  EXPECT_NEAR(fit_decay(t, e, 1, 1e4).exponent, 2.0, 1e-12);
  EXPECT_NEAR(fit_decay(t, k, 1, 1e4).exponent, 0.0, 1e-12);
  EXPECT_LT(fit_decay(t, e, 1, 1e4).residual_rms, 1e-12);
  EXPECT_THROW(fit_decay(t, e, 1, 1.5), PreconditionError);
  e[10] = 0;
  EXPECT_THROW(fit_decay(t, e, 1, 1e4), DomainError);
}

TEST(FitDecay, SingleModeUndamped) {
  ModeProblem p;
  p.coeff = coeff(1);
  p.xi = 1;
  p.v0 = 1;
  p.v1 = 0;
  p.t_end = 1e4;
  p.tol = 1e-9;
  const auto ts = log1p_space(100, 1e4, 256);
  std::vector<double> g{0.0};
  g.insert(g.end(), ts.begin(), ts.end());
  const auto tr = solve_direct(p, g);
  EXPECT_NEAR(fit_decay(tr.times, tr.energy, 100, 1e4).exponent, 1.0, 0.05);
}

TEST(Thm1Total, OscillatingCoefficientPasses) {
  SpectralConfig c;
  c.count = 32;
  const auto cf = coeff(0.8, 0.5);
  const auto k = assemble_constants(cf, 1, 1);
  const auto ts = log1p_space(0, 200, 64);
  const auto g = RadialSpectrum::gaussian(1);
  const auto tr = total_energy(c, g, RadialSpectrum::gaussian(1, 0.5), cf, ts, 1e-8, 1);
  const auto r = thm1_total_check(tr, k, 0.8, grid_seminorm_sq(c, g, 1 - 0.4));
  EXPECT_TRUE(r.passed());
  EXPECT_GT(r.worst_margin(), 0);
}

TEST(Thm2Total, LogPowerGaussianPasses) {
  SpectralConfig c;
  c.count = 32;
  const auto cf = coeff(1.5, 0.2, PhaseFunction::log_power(0.5));
  const auto k = assemble_constants(cf, 1, 1);
  const auto ts = log1p_space(0, 500, 64);
  const auto g = RadialSpectrum::gaussian(1);
  const auto tr = total_energy(c, g, RadialSpectrum::zero(), cf, ts, 1e-8, 1);
  const double lw = log_gevrey_weighted_energy(c, g, RadialSpectrum::zero(), cf.phase, k.nu, k.eps);
  EXPECT_TRUE(thm2_total_check(tr, k, lw).passed());
}
