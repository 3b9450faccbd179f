#pragma once

#include <optional>
#include <vector>

#include "kyleback/conditioning.hpp"

namespace kyleback {

struct BridgeConfig {
  std::vector<double> truncation_levels{10.0, 1e2, 1e3, 1e4};
  double delta = 1e-3;  // paths stop at T - delta
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  std::size_t n_steps = 1000;
  std::size_t first_path = 0;
  // Drift switched off once |theta| reaches this level (one of truncation_levels).
  std::optional<double> active_level;
  double alpha_cap = 1e6;
  // 0 keeps only the endpoints.
  std::size_t record_stride = 0;

  void validate(double horizon) const;
  TimeGrid grid(double horizon) const { return TimeGrid::bridge(horizon, delta, n_steps); }
};

// Euler paths of (V, X) with drift (b + sigma theta1, mu + rho theta2).
std::vector<PathBundle> simulate_full_bridge(const CoefficientSet& coeffs, const PhiField& field,
                                             const BridgeConfig& config);
// V keeps drift b; X receives mu + rho theta2, and alpha records theta2.
std::vector<PathBundle> simulate_half_bridge(const CoefficientSet& coeffs, const PhiField& field,
                                             const BridgeConfig& config);

struct PinningTolerances {
  double delta = 1e-3;
  std::optional<double> tol_mean;  // default 3 sqrt(delta)
  std::optional<double> tol_p95;   // default 6 sqrt(delta)
};

struct PinningReport {
  std::vector<double> gaps;  // |V - g(X)| at the last recorded node, surviving paths
  double mean = 0.0, se = 0.0, median = 0.0, p95 = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_terminated = 0;
  std::vector<double> levels;
  std::vector<double> truncated_fraction;  // per level
  double tol_mean = 0.0, tol_p95 = 0.0;
  bool pass = false;
};

PinningReport pinning_check(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                            const PinningTolerances& tolerances, const std::vector<double>& levels = {});

struct TerminalLawReport {
  double ks = 0.0;
  double w1 = 0.0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
  double ks_threshold = 0.0;
  double w1_threshold = 0.0;
  bool pass = false;
};

// Compares the law of V at the last recorded node with m*, over paths that were neither
// capped nor terminated. Throws insufficient-sample below min_paths survivors.
TerminalLawReport terminal_law_check(const std::vector<PathBundle>& paths, const TerminalLaw& m_star,
                                     double ks_threshold = 0.03, double w1_threshold = 1e300,
                                     std::size_t min_paths = 1000);

// Inverse-CDF draws from a terminal law; empirical laws are resampled.
std::vector<double> sample_law(const TerminalLaw& law, std::size_t n, std::uint64_t seed);

// Values of a coordinate at the recorded node closest to time t, surviving paths only.
std::vector<double> marginal_at(const std::vector<PathBundle>& paths, double t, bool x_coordinate);

}  // namespace kyleback
