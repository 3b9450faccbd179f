#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kyleback/grid.hpp"
#include "kyleback/terminal_law.hpp"

namespace kyleback {

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;
using Fn3 = std::function<double(double, double, double)>;

// Linear-Gaussian shape: b = f v + gx x + k, sigma = sv, mu = m1 x + m0, rho = sx,
// all coefficient functions of t only.
struct LinearGaussianSpec {
  Fn1 f, gx, k, m1, m0, sv, sx;
  bool time_homogeneous = false;
};

struct CoefficientSet {
  Fn3 b;      // drift of V at (t, v, x)
  Fn3 sigma;  // diffusion of V
  Fn2 mu;     // factor drift at (t, x)
  Fn2 rho;    // factor loading on the order flow
  Fn1 g;      // terminal pricing map
  TerminalLaw m_star = TerminalLaw::point_mass(0.0);
  double v0 = 0.0;
  double x0 = 0.0;
  double T = 1.0;
  // Bracket used by g_inverse.
  double x_min = -1e3;
  double x_max = 1e3;
  std::optional<LinearGaussianSpec> linear;
  std::string name;

  void check_complete() const;
};

// b = mu = 0, sigma = rho = 1, g = id, v0 = x0 = 0.
CoefficientSet brownian_benchmark(TerminalLaw m_star, double horizon = 1.0);

double g_inverse(const CoefficientSet& coeffs, double v);

struct AssumptionReport {
  double lipschitz_b = 0.0;
  double lipschitz_sigma = 0.0;
  double lipschitz_mu = 0.0;
  double lipschitz_rho = 0.0;
  double declared_lipschitz = 0.0;
  double min_sigma = 0.0;
  double min_rho = 0.0;
  double lambda0 = 0.0;
  bool g_increasing = true;
  bool pass = true;
  std::vector<std::string> failures;
};

AssumptionReport validate_assumptions(const CoefficientSet& coeffs, const ProbeGrid& probe,
                                      double declared_lipschitz = 1e3, double ellipticity_floor = 1e-8);

// One simulated path, recorded every `stride` grid steps (the last node is always kept).
struct PathBundle {
  TimeGrid grid;
  std::size_t stride = 1;
  std::vector<double> t, V, X, Y, B1, B2, alpha;
  std::vector<double> M;  // stochastic exponential of -alpha dB2, when tracked
  std::vector<double> L;  // phi along the path, when a field is attached
  std::uint64_t seed = 0;
  std::uint64_t path_index = 0;
  bool truncated = false;               // alpha cap hit
  long first_truncation = -1;           // grid step of the first cap hit
  bool terminated_early = false;        // degenerate control or non-finite state
  long termination_index = -1;
  std::vector<long> level_hits;         // first grid step with |theta| >= level, or -1

  std::size_t size() const noexcept { return t.size(); }
};

class PhiField;

// Feedback control evaluated once per step. theta_v adds sigma*theta_v to the V drift
// when drives_v is set; alpha adds rho*alpha to the X drift and alpha dt to Y.
// Returning false terminates the path (degenerate control).
struct ControlLaw {
  std::function<bool(double t, double v, double x, double& theta_v, double& alpha)> evaluate;
  bool drives_v = false;

  static ControlLaw zero();
  static ControlLaw strategy(Fn3 u);
};

struct EngineOptions {
  std::uint64_t seed = 0;
  std::size_t n_paths = 0;
  std::size_t first_path = 0;
  double alpha_cap = 1e6;
  std::vector<double> truncation_levels;
  std::optional<double> active_level;  // drift switched off after this level is first hit
  std::size_t record_stride = 1;
  bool track_M = false;
  const PhiField* l_field = nullptr;
};

using PathVisitor = std::function<void(const PathBundle&)>;

// Euler-Maruyama over paths; `visit` runs concurrently for distinct paths and must only
// touch per-path state. Shocks depend only on (seed, path, step).
void run_paths(const CoefficientSet& coeffs, const ControlLaw& control, const TimeGrid& grid,
               const EngineOptions& options, const PathVisitor& visit);

std::vector<PathBundle> collect_paths(const CoefficientSet& coeffs, const ControlLaw& control,
                                      const TimeGrid& grid, const EngineOptions& options);

std::vector<PathBundle> simulate_reference(const CoefficientSet& coeffs, const TimeGrid& grid, std::uint64_t seed,
                                           std::size_t n_paths);

std::vector<PathBundle> simulate_controlled(const CoefficientSet& coeffs, const Fn3& strategy, const TimeGrid& grid,
                                            std::uint64_t seed, std::size_t n_paths, double alpha_cap = 1e6);

}  // namespace kyleback
