#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "decaylab/numerics/dormand_prince.hpp"
#include "decaylab/numerics/parallel.hpp"
#include "decaylab/numerics/quadrature.hpp"

using namespace decaylab;
using namespace decaylab::numerics;

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  const auto& g = gauss_legendre8();
  // degree 15 is the exactness limit for 8 nodes
  const double v = g.integrate([](double x) { return std::pow(x, 15) + 3 * std::pow(x, 14); }, 0.0, 2.0);
  EXPECT_NEAR(v, std::pow(2.0, 16) / 16 + 3 * std::pow(2.0, 15) / 15, 1e-9);
  double wsum = 0;
  for (int i = 0; i < g.size(); ++i) wsum += g.weight(i);
  EXPECT_NEAR(wsum, 2.0, 1e-14);
}

TEST(AdaptiveGK, OscillatoryIntegral) {
  const auto r = integrate_adaptive([](double s) { return std::sin(50 * s) / (1 + s); }, 0.0, 10.0, 1e-12);
  // reference from a much finer fixed rule
  double ref = 0;
  const auto& g = gauss_legendre8();
  for (int k = 0; k < 20000; ++k) ref += g.integrate([](double s) { return std::sin(50 * s) / (1 + s); },
                                                      k * 10.0 / 20000, (k + 1) * 10.0 / 20000);
  EXPECT_NEAR(r.value, ref, 1e-11);
  EXPECT_LE(r.abs_error, 1e-12);
}

TEST(AdaptiveGK, ReversedLimitsFlipSign) {
  const auto a = integrate_adaptive([](double s) { return std::exp(s); }, 0.0, 1.0, 1e-13);
  const auto b = integrate_adaptive([](double s) { return std::exp(s); }, 1.0, 0.0, 1e-13);
  EXPECT_NEAR(a.value, std::numbers::e - 1, 1e-13);
  EXPECT_DOUBLE_EQ(a.value, -b.value);
}

TEST(AdaptiveGK, PanelBudgetRaises) {
  EXPECT_THROW(integrate_adaptive([](double s) { return std::sin(1e6 * s); }, 0.0, 100.0, 1e-14, 0.0, 8),
               QuadratureError);
}

TEST(AdaptiveSimpson, SmoothIntegrand) {
  EXPECT_NEAR(adaptive_simpson([](double x) { return std::cos(x); }, 0.0, 1.0, 1e-13), std::sin(1.0), 1e-12);
}

TEST(GoldenSection, FindsInteriorMaximum) {
  const auto [x, f] = golden_section_max([](double x) { return -(x - 0.3) * (x - 0.3) + 2.0; }, 0.0, 1.0);
  EXPECT_NEAR(x, 0.3, 1e-7);
  EXPECT_NEAR(f, 2.0, 1e-14);
}

TEST(Bisection, IncreasingRoot) {
  EXPECT_NEAR(bisect_increasing([](double x) { return x * x * x - 2.0; }, 0.0, 2.0), std::cbrt(2.0), 1e-14);
}

TEST(DormandPrince, HarmonicOscillatorAccuracy) {
  auto rhs = [](double, const State<2>& y, State<2>& dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  DopriOptions opt;
  opt.rtol = 1e-10;
  opt.atol = 1e-13;
  double max_err = 0;
  auto y = dopri5<2>(rhs, 0.0, State<2>{1.0, 0.0}, 50.0, opt, [&](const DenseStep<2>& d) {
    const double tm = d.t0 + 0.37 * d.h;
    max_err = std::max(max_err, std::abs(d(tm)[0] - std::cos(tm)));
    return true;
  });
  EXPECT_NEAR(y[0], std::cos(50.0), 1e-8);
  EXPECT_NEAR(y[1], -std::sin(50.0), 1e-8);
  EXPECT_LT(max_err, 1e-8);  // dense output stays within the global error
}

TEST(DormandPrince, FifthOrderConvergenceOnFixedStepBudget) {
  // y' = -2 t y, y(0)=1 -> exp(-t^2). Tightening tol by 1e5 should cut the error by roughly that.
  auto rhs = [](double t, const State<1>& y, State<1>& dy) { dy[0] = -2 * t * y[0]; };
  auto run = [&](double tol) {
    DopriOptions o;
    o.rtol = tol;
    o.atol = tol * 1e-3;
    auto y = dopri5<1>(rhs, 0.0, State<1>{1.0}, 2.0, o, [](const DenseStep<1>&) { return true; });
    return std::abs(y[0] - std::exp(-4.0));
  };
  EXPECT_LT(run(1e-6), 1e-5);
  EXPECT_LT(run(1e-11), 1e-10);
}

TEST(DormandPrince, EarlyStopFromObserver) {
  auto rhs = [](double, const State<1>&, State<1>& dy) { dy[0] = 1.0; };
  int calls = 0;
  DopriOptions opt;
  opt.h_max = 0.1;
  dopri5<1>(rhs, 0.0, State<1>{0.0}, 100.0, opt, [&](const DenseStep<1>&) { return ++calls < 3; });
  EXPECT_EQ(calls, 3);
}

TEST(DormandPrince, StepUnderflowReportsLastTime) {
  // blow-up at t=1: y' = y^2, y(0)=1
  auto rhs = [](double, const State<1>& y, State<1>& dy) { dy[0] = y[0] * y[0]; };
  DopriOptions opt;
  opt.rtol = 1e-10;
  try {
    dopri5<1>(rhs, 0.0, State<1>{1.0}, 2.0, opt, [](const DenseStep<1>&) { return true; });
    FAIL() << "expected IntegrationFailure";
  } catch (const IntegrationFailure& e) {
    EXPECT_GT(e.last_good_time(), 0.9);
    EXPECT_LT(e.last_good_time(), 1.0);
  }
}

TEST(ParallelMap, IndexOrderedAndDeterministic) {
  auto out1 = parallel_map(100, 4, [](std::size_t i) { return static_cast<double>(i * i); });
  auto out2 = parallel_map(100, 1, [](std::size_t i) { return static_cast<double>(i * i); });
  ASSERT_EQ(out1.size(), 100u);
  EXPECT_EQ(out1, out2);
  EXPECT_EQ(out1[7], 49.0);
}

TEST(ParallelMap, RethrowsWorkerError) {
  EXPECT_THROW(parallel_map(10, 3,
                            [](std::size_t i) {
                              if (i == 5) throw std::runtime_error("boom");
                              return 1;
                            }),
               std::runtime_error);
}
