#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kyleback/bridge.hpp"
#include "kyleback/errors.hpp"
#include "kyleback/stats.hpp"
#include "scenarios.hpp"

using namespace kyleback;
using kyleback::testing::brownian;

namespace {

struct Conditioned {
  CoefficientSet coeffs;
  NuMeasure nu;
  std::unique_ptr<LinearGaussianDensity> density;
  std::unique_ptr<GaussianMixturePhi> field;
};

Conditioned make(TerminalLaw law, std::size_t n_atoms) {
  Conditioned s;
  s.coeffs = brownian_benchmark(std::move(law), 1.0);
  s.nu = build_nu(s.coeffs.m_star, s.coeffs, n_atoms);
  s.density = std::make_unique<LinearGaussianDensity>(*s.coeffs.linear, s.coeffs.T);
  s.field = make_gaussian_phi(*s.density, s.nu, s.coeffs);
  return s;
}

BridgeConfig config(std::size_t n_paths, std::size_t n_steps, std::uint64_t seed) {
  BridgeConfig cfg;
  cfg.n_paths = n_paths;
  cfg.n_steps = n_steps;
  cfg.seed = seed;
  return cfg;
}

PathBundle endpoint(double v, double x) {
  PathBundle p;
  p.t = {0.0, 1.0};
  p.V = {0.0, v};
  p.X = {0.0, x};
  return p;
}

}  // namespace

TEST(BridgeConfig, Validation) {
  BridgeConfig cfg;
  EXPECT_NO_THROW(cfg.validate(1.0));
  cfg.delta = 0.2;
  EXPECT_THROW(cfg.validate(1.0), Error);
  cfg = BridgeConfig{};
  cfg.truncation_levels = {10.0, 5.0};
  EXPECT_THROW(cfg.validate(1.0), Error);
  cfg = BridgeConfig{};
  cfg.active_level = 7.0;
  EXPECT_THROW(cfg.validate(1.0), Error);
  cfg.active_level = 100.0;
  EXPECT_NO_THROW(cfg.validate(1.0));
}

TEST(FullBridge, PinsAndReproducesTheGaussianTerminalLaw) {
  const Conditioned s = make(TerminalLaw::gaussian(0.0, 1.0), 64);
  const auto paths = simulate_full_bridge(s.coeffs, *s.field, config(2000, 400, 31));
  PinningTolerances tol;
  tol.delta = 1e-3;
  const PinningReport pin = pinning_check(paths, s.coeffs, tol, {10.0, 1e2, 1e3, 1e4});
  EXPECT_TRUE(pin.pass) << "mean gap " << pin.mean << " p95 " << pin.p95;
  EXPECT_EQ(pin.n_terminated, 0u);
  const TerminalLawReport law = terminal_law_check(paths, s.coeffs.m_star, 0.05);
  EXPECT_TRUE(law.pass) << "ks " << law.ks;
  EXPECT_EQ(law.n_used + law.n_excluded, paths.size());
}

TEST(FullBridge, PointMassGivesBrownianBridgeMarginals) {
  const double y = 0.8;
  const Conditioned s = make(TerminalLaw::point_mass(y), 1);
  BridgeConfig cfg = config(4000, 400, 37);
  cfg.record_stride = 10;
  const auto paths = simulate_full_bridge(s.coeffs, *s.field, cfg);
  // the bridge from 0 to y on [0, 1] is N(t y, t (1 - t)) at time t
  for (const bool x_coord : {false, true}) {
    const MeanEstimate m = mean_estimate(marginal_at(paths, 0.5, x_coord));
    EXPECT_NEAR(m.mean, 0.5 * y, 4.0 * m.se);
    EXPECT_NEAR(m.std_dev * m.std_dev, 0.25, 0.025);
  }
  for (const auto& p : paths) EXPECT_NEAR(p.V.back(), y, 0.25);
}

TEST(FullBridge, FactorMarginalHasVarianceT) {
  // with V_T = X_T ~ N(0, 1) the conditioned factor is again a standard Brownian motion
  const Conditioned s = make(TerminalLaw::gaussian(0.0, 1.0), 64);
  BridgeConfig cfg = config(4000, 200, 41);
  cfg.record_stride = 20;
  const auto paths = simulate_full_bridge(s.coeffs, *s.field, cfg);
  for (double t : {0.3, 0.7}) {
    const MeanEstimate m = mean_estimate(marginal_at(paths, t, true));
    EXPECT_NEAR(m.mean, 0.0, 4.0 * m.se);
    EXPECT_NEAR(m.std_dev * m.std_dev, t, 0.1 * t);
  }
}

TEST(HalfBridge, PinsTheFactorAndLeavesTheSignalFree) {
  const double y = -0.6;
  const Conditioned s = make(TerminalLaw::point_mass(y), 1);
  const auto paths = simulate_half_bridge(s.coeffs, *s.field, config(3000, 400, 43));
  std::vector<double> vs;
  for (const auto& p : paths) {
    EXPECT_NEAR(p.X.back(), y, 0.25);
    vs.push_back(p.V.back());
  }
  const MeanEstimate m = mean_estimate(vs);
  EXPECT_NEAR(m.mean, 0.0, 4.0 * m.se);
  EXPECT_NEAR(m.std_dev, 1.0, 0.05);
}

TEST(FullBridge, SeedAndOffsetReproducePaths) {
  const Conditioned s = make(TerminalLaw::gaussian(0.0, 1.0), 8);
  const auto all = simulate_full_bridge(s.coeffs, *s.field, config(6, 50, 3));
  BridgeConfig tail = config(2, 50, 3);
  tail.first_path = 4;
  const auto part = simulate_full_bridge(s.coeffs, *s.field, tail);
  EXPECT_EQ(all[4].V, part[0].V);
  EXPECT_EQ(all[5].X, part[1].X);
}

TEST(PinningCheck, GapsAndLevelFractions) {
  std::vector<PathBundle> paths{endpoint(1.0, 1.0), endpoint(1.0, 0.9), endpoint(0.0, 0.3)};
  paths[0].level_hits = {5, -1};
  paths[1].level_hits = {7, 9};
  paths[2].level_hits = {-1, -1};
  paths[2].terminated_early = true;
  PinningTolerances tol;
  tol.delta = 1e-2;
  const PinningReport r = pinning_check(paths, brownian(), tol, {10.0, 100.0});
  ASSERT_EQ(r.gaps.size(), 2u);
  EXPECT_NEAR(r.mean, 0.05, 1e-12);
  EXPECT_EQ(r.n_terminated, 1u);
  EXPECT_NEAR(r.truncated_fraction[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.truncated_fraction[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(r.tol_mean, 0.3, 1e-15);
  EXPECT_TRUE(r.pass);
  tol.tol_mean = 0.01;
  EXPECT_FALSE(pinning_check(paths, brownian(), tol).pass);
}

TEST(TerminalLawCheck, ExcludesCappedPathsAndNeedsASample) {
  std::vector<PathBundle> paths;
  const auto draws = sample_law(TerminalLaw::gaussian(0.0, 1.0), 1500, 8);
  for (double d : draws) paths.push_back(endpoint(d, d));
  paths[0].truncated = true;
  paths[1].terminated_early = true;
  const TerminalLawReport r = terminal_law_check(paths, TerminalLaw::gaussian(0.0, 1.0), 0.05, 0.1, 1000);
  EXPECT_EQ(r.n_excluded, 2u);
  EXPECT_TRUE(r.pass);
  try {
    (void)terminal_law_check(paths, TerminalLaw::gaussian(0.0, 1.0), 0.05, 0.1, 2000);
    FAIL() << "expected insufficient sample";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::insufficient_sample);
  }
}

TEST(SampleLaw, InverseCdfDrawsFollowTheLaw) {
  const TerminalLaw law = TerminalLaw::mixture({{0.3, -1.0, 0.2}, {0.7, 1.0, 0.5}});
  const auto a = sample_law(law, 5000, 1);
  EXPECT_LE(ks_statistic(a, law), 0.03);
  EXPECT_EQ(a, sample_law(law, 5000, 1));
  EXPECT_NE(a, sample_law(law, 5000, 2));

  const TerminalLaw emp = TerminalLaw::empirical({-1.0, 0.5, 2.0});
  for (double d : sample_law(emp, 200, 4)) EXPECT_TRUE(d == -1.0 || d == 0.5 || d == 2.0);
}

TEST(MarginalAt, PicksTheNearestRecordedNode) {
  PathBundle p;
  p.t = {0.0, 0.4, 0.8};
  p.V = {0.0, 1.0, 2.0};
  p.X = {0.0, -1.0, -2.0};
  PathBundle capped = p;
  capped.truncated = true;
  const std::vector<PathBundle> paths{p, capped};
  EXPECT_EQ(marginal_at(paths, 0.5, false), std::vector<double>{1.0});
  EXPECT_EQ(marginal_at(paths, 0.7, true), std::vector<double>{-2.0});
}
