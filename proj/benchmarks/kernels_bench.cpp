#include <benchmark/benchmark.h>

#include "kyleback/bridge.hpp"
#include "kyleback/filtering.hpp"
#include "kyleback/pricing_pde.hpp"

using namespace kyleback;

namespace {

Fn1 constant(double c) {
  return [c](double) { return c; };
}

CoefficientSet brownian() { return brownian_benchmark(TerminalLaw::gaussian(0.0, 1.0)); }

}  // namespace

static void BM_Riccati(benchmark::State& state) {
  const TimeGrid grid{0.0, 1.0, static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(riccati_solve(constant(0.0), constant(1.0), 0.0, grid).S.back());
}
BENCHMARK(BM_Riccati)->Arg(1000)->Arg(10000);

static void BM_SolveHMartingale(benchmark::State& state) {
  const CoefficientSet c = brownian();
  PDEConfig cfg;
  cfg.x = Axis{-6.0, 6.0, static_cast<std::size_t>(state.range(0)) + 1};
  cfg.n_t = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_H_martingale(c, cfg).at(0, 0));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SolveHMartingale)->RangeMultiplier(2)->Range(100, 800)->Unit(benchmark::kMillisecond);

static void BM_SolveHGeneralLinear(benchmark::State& state) {
  const LinearReferenceModel m =
      linear_reference_model(constant(-0.2), constant(0.1), constant(0.05), constant(1.0), 0.0);
  PDEConfig cfg;
  cfg.x = Axis{-6.0, 6.0, 401};
  cfg.n_t = 400;
  for (auto _ : state) benchmark::DoNotOptimize(solve_H_general(m.coeffs, m.strategy, cfg).at(0, 0));
}
BENCHMARK(BM_SolveHGeneralLinear)->Unit(benchmark::kMillisecond);

static void BM_SolveF(benchmark::State& state) {
  const CoefficientSet c = brownian();
  const AffineStrategy zero{[](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
  PDEConfig cfg;
  cfg.x = Axis::with_step(-6, 6, 0.1);
  cfg.v = Axis::with_step(-6, 6, 0.1);
  cfg.n_t = 50;
  for (auto _ : state) benchmark::DoNotOptimize(solve_F(c, zero, cfg).at(0, 0, 0));
}
BENCHMARK(BM_SolveF)->Unit(benchmark::kMillisecond);

static void BM_GaussianPhiLogGradient(benchmark::State& state) {
  const CoefficientSet c = brownian();
  const LinearGaussianDensity density(*c.linear, c.T);
  const auto phi = make_gaussian_phi(density, build_nu(c.m_star, c, static_cast<std::size_t>(state.range(0))), c);
  double gv = 0.0, gx = 0.0, t = 0.0;
  for (auto _ : state) {
    t = t > 0.9 ? 0.0 : t + 1e-3;
    benchmark::DoNotOptimize(phi->log_gradient(t, 0.3, -0.2, gv, gx));
  }
}
BENCHMARK(BM_GaussianPhiLogGradient)->Arg(16)->Arg(64)->Arg(256);

static void BM_FullBridge(benchmark::State& state) {
  const CoefficientSet c = brownian();
  const LinearGaussianDensity density(*c.linear, c.T);
  const auto phi = make_gaussian_phi(density, build_nu(c.m_star, c, 64), c);
  BridgeConfig cfg;
  cfg.n_paths = static_cast<std::size_t>(state.range(0));
  cfg.n_steps = 1000;
  cfg.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_full_bridge(c, *phi, cfg).size());
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_FullBridge)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_ParticleFilter(benchmark::State& state) {
  const LinearReferenceModel m =
      linear_reference_model(constant(-0.2), constant(0.1), constant(0.05), constant(1.0), 0.0);
  const auto paths = simulate_controlled(m.coeffs, m.strategy.as_function(), TimeGrid{0.0, 1.0, 200}, 3, 1);
  const ObservedPath obs = ObservedPath::from_bundle(paths.front());
  ParticleFilterOptions po;
  po.n_particles = static_cast<std::size_t>(state.range(0));
  po.seed = 4;
  for (auto _ : state)
    benchmark::DoNotOptimize(particle_filter(m.coeffs, m.strategy, TerminalLaw::point_mass(0.0), obs, po).P.back());
  state.SetItemsProcessed(state.iterations() * state.range(0) * 200);
}
BENCHMARK(BM_ParticleFilter)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
