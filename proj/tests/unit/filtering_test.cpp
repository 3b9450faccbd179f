#include <gtest/gtest.h>

#include <cmath>

#include "kyleback/errors.hpp"
#include "kyleback/filtering.hpp"
#include "scenarios.hpp"

using namespace kyleback;
using kyleback::testing::brownian;
using kyleback::testing::constant;

namespace {

// f = g = k = 0, beta = 1, S0 = 0: the posterior variance is S = tanh(t)
LinearReferenceModel tanh_model() {
  return linear_reference_model(constant(0.0), constant(0.0), constant(0.0), constant(1.0), 0.0);
}

LinearFilterModel tanh_oracle() { return {constant(0.0), constant(0.0), constant(0.0), constant(1.0), 0.0, 0.0}; }

std::vector<PathBundle> observed(const LinearReferenceModel& m, std::size_t n_paths, std::uint64_t seed) {
  return simulate_controlled(m.coeffs, m.strategy.as_function(), TimeGrid{0.0, 1.0, 200}, seed, n_paths);
}

}  // namespace

TEST(KalmanBucy, VarianceFollowsTheRiccati) {
  const LinearReferenceModel m = tanh_model();
  const auto paths = observed(m, 2, 3);
  const FilterPath kb = kalman_bucy_oracle(tanh_oracle(), ObservedPath::from_bundle(paths[0]));
  ASSERT_EQ(kb.t.size(), paths[0].t.size());
  for (std::size_t i = 0; i < kb.t.size(); i += 25) EXPECT_NEAR(kb.variance[i], std::tanh(kb.t[i]), 1e-6);
  EXPECT_EQ(kb.P.front(), 0.0);
}

TEST(KalmanBucy, FlatObservationKeepsThePriorMean) {
  // dY = 0 with P = X = 0 gives a zero innovation at every step
  ObservedPath obs;
  const std::size_t n = 100;
  for (std::size_t i = 0; i <= n; ++i) {
    obs.t.push_back(static_cast<double>(i) / n);
    obs.Y.push_back(0.0);
    obs.X.push_back(0.0);
  }
  const FilterPath kb = kalman_bucy_oracle(tanh_oracle(), obs);
  for (double p : kb.P) EXPECT_NEAR(p, 0.0, 1e-14);
}

TEST(ParticleFilter, TracksTheKalmanBucyOracle) {
  const LinearReferenceModel m = tanh_model();
  const auto paths = observed(m, 3, 5);
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const ObservedPath obs = ObservedPath::from_bundle(paths[p]);
    ParticleFilterOptions po;
    po.n_particles = 4000;
    po.seed = 100 + p;
    const FilterPath pf = particle_filter(m.coeffs, m.strategy, TerminalLaw::point_mass(0.0), obs, po);
    const FilterPath kb = kalman_bucy_oracle(tanh_oracle(), obs);
    double ss = 0.0, var_err = 0.0;
    for (std::size_t i = 0; i < pf.P.size(); ++i) {
      ss += (pf.P[i] - kb.P[i]) * (pf.P[i] - kb.P[i]);
      var_err = std::max(var_err, std::abs(pf.variance[i] - kb.variance[i]));
      EXPECT_GT(pf.ESS[i], 0.0);
      EXPECT_LE(pf.ESS[i], 4000.0 + 1e-9);
    }
    EXPECT_LE(std::sqrt(ss / static_cast<double>(pf.P.size())), 0.05) << "path " << p;
    EXPECT_LE(var_err, 0.1) << "path " << p;
  }
}

TEST(ParticleFilter, ReproducibleFromTheSeed) {
  const LinearReferenceModel m = tanh_model();
  const ObservedPath obs = ObservedPath::from_bundle(observed(m, 1, 9)[0]);
  ParticleFilterOptions po;
  po.n_particles = 500;
  po.seed = 4;
  const FilterPath a = particle_filter(m.coeffs, m.strategy, TerminalLaw::gaussian(0.0, 0.5), obs, po);
  const FilterPath b = particle_filter(m.coeffs, m.strategy, TerminalLaw::gaussian(0.0, 0.5), obs, po);
  EXPECT_EQ(a.P, b.P);
  EXPECT_EQ(a.resampled, b.resampled);
  po.n_particles = 1;
  EXPECT_THROW((void)particle_filter(m.coeffs, m.strategy, TerminalLaw::point_mass(0.0), obs, po), Error);
}

TEST(ExponentialMartingale, BoundedStrategyHasUnitMean) {
  const ControlLaw control = ControlLaw::strategy([](double t, double v, double x) { return std::sin(v - x) + t; });
  const MartingaleReport r =
      exponential_martingale_test(brownian(), control, TimeGrid{0.0, 1.0, 100}, 8, 20000, {0.25, 0.5, 1.0});
  ASSERT_EQ(r.checkpoints.size(), 3u);
  EXPECT_TRUE(r.pass);
  for (const auto& c : r.checkpoints) EXPECT_LE(std::abs(c.z_score), 4.0);
}

TEST(ExponentialMartingale, StoredPathsGiveTheSameVerdict) {
  EngineOptions o;
  o.seed = 8;
  o.n_paths = 5000;
  o.track_M = true;
  const ControlLaw control = ControlLaw::strategy([](double, double, double) { return 0.5; });
  const auto paths = collect_paths(brownian(), control, TimeGrid{0.0, 1.0, 50}, o);
  const MartingaleReport stored = exponential_martingale_test(paths, {0.5, 1.0});
  const MartingaleReport streamed =
      exponential_martingale_test(brownian(), control, TimeGrid{0.0, 1.0, 50}, 8, 5000, {0.5, 1.0});
  EXPECT_TRUE(stored.pass);
  EXPECT_NEAR(stored.checkpoints[1].estimate.mean, streamed.checkpoints[1].estimate.mean, 1e-12);
}

TEST(LikelihoodMartingale, PhiAlongReferencePathsHasUnitMean) {
  const CoefficientSet c = brownian();
  const NuMeasure nu = build_nu(c.m_star, c, 32);
  const LinearGaussianDensity dens(*c.linear, c.T);
  const auto field = make_gaussian_phi(dens, nu, c);
  const MartingaleReport r =
      likelihood_martingale_test(*field, c, TimeGrid{0.0, 0.9, 90}, 12, 20000, {0.3, 0.6, 0.9});
  EXPECT_TRUE(r.pass);
  for (const auto& cp : r.checkpoints) EXPECT_NEAR(cp.estimate.mean, 1.0, 4.0 * cp.estimate.se);
}

TEST(Fbsde, ExactFieldHasZeroDefect) {
  // H = 2 x on the grid, P = H(t, X) and Z = rho H_x = 2 along the path
  FieldTX H(Axis{0.0, 1.0, 11}, Axis{-3.0, 3.0, 61});
  for (std::size_t k = 0; k < 11; ++k)
    for (std::size_t i = 0; i < 61; ++i) H.at(k, i) = 2.0 * H.x_axis().at(i);
  FilterPath f;
  f.t = {0.0, 0.5, 1.0, 1.0};
  f.X = {0.0, 1.3, -0.4, 5.0};
  for (double x : f.X) {
    f.P.push_back(2.0 * x);
    f.Z.push_back(2.0);
  }
  const FbsdeReport r = fbsde_relation_check(H, brownian(), f);
  EXPECT_NEAR(r.rmse_P, 0.0, 1e-12);
  EXPECT_NEAR(r.z_relative_error, 0.0, 1e-12);
  EXPECT_EQ(r.n_nodes, 3u);
  EXPECT_TRUE(r.coverage_warning);
  EXPECT_NEAR(r.excursion_fraction, 0.25, 1e-15);
  f.P[1] += 0.3;
  EXPECT_NEAR(fbsde_relation_check(H, brownian(), f).max_P, 0.3, 1e-12);
}
