#include <gtest/gtest.h>

#include <cmath>

#include "kyleback/errors.hpp"
#include "kyleback/pricing_pde.hpp"
#include "kyleback/sde.hpp"
#include "kyleback/stats.hpp"
#include "scenarios.hpp"

using namespace kyleback;
using kyleback::testing::brownian;
using kyleback::testing::constant;
using kyleback::testing::Gen;

namespace {

PDEConfig line_config(double lo, double hi, double dx, std::size_t n_t) {
  PDEConfig cfg;
  cfg.x = Axis::with_step(lo, hi, dx);
  cfg.n_t = n_t;
  return cfg;
}

double inner_error(const FieldTX& H, double half_width, const std::function<double(double, double)>& exact) {
  double err = 0.0;
  for (std::size_t k = 0; k < H.t_axis().n; ++k)
    for (std::size_t i = 0; i < H.x_axis().n; ++i) {
      const double t = H.t_axis().at(k), x = H.x_axis().at(i);
      if (std::abs(x) <= half_width) err = std::max(err, std::abs(H.at(k, i) - exact(t, x)));
    }
  return err;
}

AffineStrategy zero_strategy() { return {[](double, double) { return 0.0; }, [](double, double) { return 0.0; }}; }

}  // namespace

TEST(SolveHMartingale, LinearDataIsPreservedExactly) {
  const CoefficientSet c = brownian();
  const FieldTX H = solve_H_martingale(c, line_config(-6, 6, 0.02, 200));
  EXPECT_LE(inner_error(H, 6.0, [](double, double x) { return x; }), 1e-12);
}

TEST(SolveHMartingale, QuadraticDataMatchesHeatSolution) {
  CoefficientSet c = brownian();
  c.g = [](double x) { return x * x; };
  const FieldTX H = solve_H_martingale(c, line_config(-10, 10, 0.01, 100));
  EXPECT_LE(inner_error(H, 2.0, [](double t, double x) { return x * x + (1.0 - t); }), 1e-6);
}

TEST(SolveHMartingale, TerminalDataExactAtNodes) {
  CoefficientSet c = brownian();
  c.g = [](double x) { return std::sinh(x); };
  const FieldTX H = solve_H_martingale(c, line_config(-4, 4, 0.05, 50));
  const std::size_t kT = H.t_axis().n - 1;
  for (std::size_t i = 0; i < H.x_axis().n; ++i) EXPECT_EQ(H.at(kT, i), std::sinh(H.x_axis().at(i)));
}

TEST(SolveHMartingale, AffinePreservationProperty) {
  for (std::uint64_t n = 0; n < 20; ++n) {
    Gen gen(7, n);
    const double a = gen.uniform(0.1, 3.0), b = gen.uniform(-2.0, 2.0);
    CoefficientSet c = brownian();
    c.g = [a, b](double x) { return a * x + b; };
    const double s = gen.uniform(0.3, 2.0);
    c.rho = [s](double t, double) { return s * (1.0 + 0.5 * t); };
    const FieldTX H = solve_H_martingale(c, line_config(-5, 5, 0.05, 40));
    EXPECT_LE(inner_error(H, 5.0, [a, b](double, double x) { return a * x + b; }), 1e-12) << "case " << n;
  }
}

TEST(SolveHMartingale, MonotoneInTerminalDataProperty) {
  for (std::uint64_t n = 0; n < 20; ++n) {
    Gen gen(11, n);
    const double w = gen.uniform(0.5, 2.0), centre = gen.uniform(-2.0, 2.0), height = gen.uniform(0.0, 1.0);
    const double slope = gen.uniform(0.2, 2.0);
    CoefficientSet c1 = brownian(), c2 = brownian();
    c1.g = [slope, w](double x) { return slope * x + std::sin(w * x); };
    c2.g = [=](double x) { return slope * x + std::sin(w * x) + height * std::exp(-(x - centre) * (x - centre)); };
    c1.mu = c2.mu = [](double, double x) { return -0.3 * x; };
    PDEConfig cfg = line_config(-5, 5, 0.05, 100);
    cfg.scheme = TimeScheme::implicit_euler;
    cfg.boundary = BoundaryPolicy::neumann_zero;  // extrapolated edges are not monotone
    const FieldTX H1 = solve_H_martingale(c1, cfg), H2 = solve_H_martingale(c2, cfg);
    for (std::size_t q = 0; q < H1.values().size(); ++q)
      ASSERT_LE(H1.values()[q], H2.values()[q] + 1e-10) << "case " << n;
  }
}

TEST(SolveHMartingale, NeumannBoundaryIsAvailable) {
  CoefficientSet c = brownian();
  c.g = [](double x) { return std::tanh(x); };
  PDEConfig cfg = line_config(-8, 8, 0.05, 100);
  cfg.boundary = BoundaryPolicy::neumann_zero;
  const FieldTX H = solve_H_martingale(c, cfg);
  EXPECT_DOUBLE_EQ(H.at(0, 0), H.at(0, 1));
  // odd data stays odd and the centre stays at zero
  EXPECT_NEAR(H(0.0, 0.0), 0.0, 1e-12);
}

TEST(SolveHMartingale, NonFiniteCoefficientsNameTheSlice) {
  CoefficientSet c = brownian();
  c.rho = [](double t, double) { return t < 0.5 ? std::nan("") : 1.0; };
  try {
    (void)solve_H_martingale(c, line_config(-3, 3, 0.1, 10));
    FAIL() << "expected solver-diverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::solver_diverged);
    EXPECT_NE(std::string(e.what()).find("t = 0.4"), std::string::npos) << e.what();
  }
}

TEST(SolveHGeneral, LinearBenchmarkKeepsIdentity) {
  const LinearReferenceModel m = linear_reference_model(constant(-0.2), constant(0.1), constant(0.05), constant(1.0), 0.0);
  FixedPointStats st;
  const FieldTX H = solve_H_general(m.coeffs, m.strategy, line_config(-6, 6, 0.03, 400), &st);
  EXPECT_LE(inner_error(H, 3.0, [](double, double x) { return x; }), 1e-8);
  EXPECT_LE(st.max_iterations, 50u);
}

TEST(SolveHGeneral, ReducesToMartingaleSolve) {
  CoefficientSet c = brownian();
  c.g = [](double x) { return x + 0.3 * std::sin(x); };
  c.mu = [](double, double x) { return 0.2 * std::cos(x); };
  const PDEConfig cfg = line_config(-6, 6, 0.05, 100);
  const FieldTX a = solve_H_martingale(c, cfg), b = solve_H_general(c, zero_strategy(), cfg);
  double d = 0.0;
  for (std::size_t q = 0; q < a.values().size(); ++q) d = std::max(d, std::abs(a.values()[q] - b.values()[q]));
  EXPECT_LE(d, 1e-10);
}

TEST(SolveHGeneral, ConstantMeanReversionClosedForm) {
  const double c0 = 0.7;
  CoefficientSet c = brownian();
  c.b = [c0](double, double v, double) { return c0 * v; };
  const FieldTX H = solve_H_general(c, zero_strategy(), line_config(-6, 6, 0.05, 400));
  EXPECT_LE(inner_error(H, 3.0, [c0](double t, double x) { return x * std::exp(-c0 * (1.0 - t)); }), 1e-6);
}

TEST(SolveHGeneral, RejectsNonAffineDrift) {
  CoefficientSet c = brownian();
  c.b = [](double, double v, double) { return v * v; };
  EXPECT_THROW((void)solve_H_general(c, zero_strategy(), line_config(-3, 3, 0.1, 10)), Error);
}

TEST(SolveHGeneral, FixedPointCapRaisesSolverDiverged) {
  CoefficientSet c = brownian();
  c.g = [](double x) { return std::sin(x); };
  const AffineStrategy s{[](double, double x) { return -x; }, [](double, double) { return 1.0; }};
  PDEConfig cfg = line_config(-3, 3, 0.1, 10);
  cfg.fixed_point_max_iter = 1;
  try {
    (void)solve_H_general(c, s, cfg);
    FAIL() << "expected solver-diverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::solver_diverged);
  }
}

TEST(SolveF, MartingaleSignalGivesIdentity) {
  const CoefficientSet c = brownian();
  const AffineStrategy s{[](double, double x) { return -x; }, [](double, double) { return 1.0; }};
  PDEConfig cfg = line_config(-4, 4, 0.1, 50);
  cfg.v = Axis::with_step(-4, 4, 0.2);
  const FieldTVX F = solve_F(c, s, cfg);
  double err = 0.0;
  for (std::size_t k = 0; k < F.t_axis().n; ++k)
    for (std::size_t j = 0; j < F.v_axis().n; ++j)
      for (std::size_t i = 0; i < F.x_axis().n; ++i) err = std::max(err, std::abs(F.at(k, j, i) - F.v_axis().at(j)));
  EXPECT_LE(err, 1e-10);
}

TEST(SolveF, LinearDriftClosedForm) {
  const double b1 = -0.6;
  CoefficientSet c = brownian();
  c.b = [b1](double, double v, double) { return b1 * v; };
  PDEConfig cfg = line_config(-4, 4, 0.1, 200);
  cfg.v = Axis::with_step(-4, 4, 0.1);
  const FieldTVX F = solve_F(c, zero_strategy(), cfg);
  double err = 0.0;
  const std::size_t kT = F.t_axis().n - 1;
  for (std::size_t k = 0; k < F.t_axis().n; ++k)
    for (std::size_t j = 0; j < F.v_axis().n; ++j)
      for (std::size_t i = 0; i < F.x_axis().n; ++i) {
        const double t = F.t_axis().at(k), v = F.v_axis().at(j), x = F.x_axis().at(i);
        if (k == kT) {
          ASSERT_EQ(F.at(k, j, i), v);
        }
        if (std::abs(v) <= 2 && std::abs(x) <= 2)
          err = std::max(err, std::abs(F.at(k, j, i) - v * std::exp(b1 * (1.0 - t))));
      }
  EXPECT_LE(err, 1e-6);
}

TEST(SolveF, MatchesMonteCarloConditionalMean) {
  CoefficientSet c = brownian();
  c.b = [](double, double v, double) { return -0.8 * std::sin(v); };
  c.v0 = 0.7;
  PDEConfig cfg = line_config(-3, 3, 0.25, 200);
  cfg.v = Axis::with_step(-6, 6, 0.05);
  const FieldTVX F = solve_F(c, zero_strategy(), cfg);
  const auto paths = simulate_reference(c, TimeGrid{0.0, 1.0, 400}, 5, 20000);
  std::vector<double> vT;
  for (const auto& p : paths) vT.push_back(p.V.back());
  const MeanEstimate m = mean_estimate(vT);
  EXPECT_NEAR(F(0.0, c.v0, 0.0), m.mean, 4 * m.se + 5e-3);
}

TEST(CompatibilityB0, BrownianPairVanishes) {
  const ResidualReport r = compatibility_b0(brownian(), ProbeGrid{{0, 1, 11}, {-1, 1, 2}, {-3, 3, 13}});
  EXPECT_LE(r.max_abs, 1e-12);
  EXPECT_TRUE(r.pass);
}

TEST(CompatibilityB0, LinearDriftFailsWithMinusOne) {
  CoefficientSet c = brownian();
  c.mu = [](double, double x) { return x; };
  const ResidualReport r = compatibility_b0(c, ProbeGrid{{0, 1, 11}, {-1, 1, 2}, {-3, 3, 13}});
  for (double e : r.field.values()) EXPECT_NEAR(e, -1.0, 1e-8);
  EXPECT_FALSE(r.pass);
}

TEST(CompatibilityB0, SpaceFreeLoadingLeavesTimeDerivative) {
  CoefficientSet c = brownian();
  c.rho = [](double t, double) { return 1.0 + t * t; };
  c.mu = [](double t, double) { return std::cos(t); };
  const ResidualReport r = compatibility_b0(c, ProbeGrid{{0, 1, 11}, {-1, 1, 2}, {-3, 3, 7}});
  for (std::size_t k = 0; k < r.field.t_axis().n; ++k)
    for (std::size_t i = 0; i < r.field.x_axis().n; ++i)
      EXPECT_NEAR(r.field.at(k, i), 2.0 * r.field.t_axis().at(k), 1e-7);
}

TEST(CompatibilityGeneral, ReductionToMartingaleCase) {
  const CoefficientSet c = brownian();
  const AffineStrategy s{[](double, double x) { return -x; }, [](double, double) { return 1.0; }};
  PDEConfig cfg = line_config(-4, 4, 0.1, 40);
  cfg.v = Axis::with_step(-4, 4, 0.2);
  const FieldTX H = solve_H_general(c, s, cfg);
  const FieldTVX F = solve_F(c, s, cfg);
  const GeneralCompatibilityReport r = compatibility_general(c, s, H, F, ProbeGrid{{0, 1, 5}, {-2, 2, 9}, {-2, 2, 9}});
  EXPECT_LE(r.max_first, 1e-10);
  EXPECT_TRUE(r.pass);
}

TEST(CompatibilityGeneral, StationaryLinearBenchmark) {
  const LinearReferenceModel m = linear_reference_model(constant(0.0), constant(0.0), constant(0.0), constant(1.0), 1.0);
  PDEConfig cfg = line_config(-4, 4, 0.05, 100);
  cfg.v = Axis::with_step(-4, 4, 0.1);
  const FieldTX H = solve_H_general(m.coeffs, m.strategy, cfg);
  const FieldTVX F = solve_F(m.coeffs, m.strategy, cfg);
  const GeneralCompatibilityReport r =
      compatibility_general(m.coeffs, m.strategy, H, F, ProbeGrid{{0, 1, 6}, {-2, 2, 9}, {-2, 2, 9}});
  EXPECT_LE(r.max_first, 1e-4);
  EXPECT_LE(r.second.max_abs, 1e-4);
  EXPECT_TRUE(r.pass);
}

TEST(CompatibilityGeneral, ConstantDriftFailsWithRho) {
  CoefficientSet c = brownian();
  c.b = [](double, double, double) { return 1.0; };
  const AffineStrategy s{[](double, double x) { return -x; }, [](double, double) { return 1.0; }};
  PDEConfig cfg = line_config(-4, 4, 0.1, 40);
  cfg.v = Axis::with_step(-4, 4, 0.2);
  // H and F of the reduction case, so only the b0 term survives.
  const FieldTX H = solve_H_general(brownian(), s, cfg);
  const FieldTVX F = solve_F(brownian(), s, cfg);
  const GeneralCompatibilityReport r = compatibility_general(c, s, H, F, ProbeGrid{{0, 1, 5}, {-2, 2, 5}, {-2, 2, 5}});
  for (double e : r.first.values()) EXPECT_NEAR(e, 1.0, 1e-10);
  EXPECT_FALSE(r.pass);
}

TEST(CompatibilityGeneral, ShapeMismatchIsReported) {
  CoefficientSet c = brownian();
  c.b = [](double, double v, double x) { return 0.1 * v + 0.2 * x; };
  const AffineStrategy s = zero_strategy();
  PDEConfig cfg = line_config(-4, 4, 0.2, 10);
  cfg.v = Axis::with_step(-4, 4, 0.4);
  const FieldTX H = solve_H_martingale(brownian(), cfg);
  const FieldTVX F = solve_F(brownian(), s, cfg);
  try {
    (void)compatibility_general(c, s, H, F, ProbeGrid{{0, 1, 3}, {-1, 1, 3}, {-1, 1, 3}});
    FAIL() << "expected shape error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::shape_mismatch);
  }
}

TEST(PDEConfig, DefaultDomainCoversSixStandardDeviations) {
  const PDEConfig cfg = PDEConfig::for_coefficients(brownian());
  EXPECT_LE(cfg.x.lo, -6.0 + 1e-12);
  EXPECT_GE(cfg.x.hi, 6.0 - 1e-12);
  EXPECT_LE(cfg.v.lo, -6.0 + 1e-12);
  EXPECT_NEAR(cfg.x.h(), 0.02, 1e-12);
  EXPECT_EQ(cfg.n_t, 400u);
}
