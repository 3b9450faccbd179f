#pragma once

#include <cstdint>
#include <vector>

#include "kyleback/affine.hpp"
#include "kyleback/conditioning.hpp"
#include "kyleback/stats.hpp"

namespace kyleback {

// One observed trajectory on a uniform grid: the order flow Y and the factor X it drives.
struct ObservedPath {
  std::vector<double> t, Y, X;
  std::vector<double> V;  // true signal when known (simulation studies)

  static ObservedPath from_bundle(const PathBundle& p);
};

struct FilterPath {
  std::vector<double> t, P, Z, ESS, X;
  std::vector<double> variance;  // posterior variance of V
  std::vector<std::uint8_t> resampled;
  std::size_t collapse_events = 0;
  bool degeneracy_warning = false;
};

struct ParticleFilterOptions {
  std::size_t n_particles = 10000;
  std::uint64_t seed = 0;
  double ess_fraction = 0.5;
  std::size_t collapse_warning_after = 3;  // consecutive collapses before the warning is raised
};

// Bootstrap filter for V given Y, with Girsanov weights exp(u dY - u^2 dt / 2) and
// systematic resampling when ESS drops below ess_fraction * N.
FilterPath particle_filter(const CoefficientSet& coeffs, const AffineStrategy& strategy, const TerminalLaw& prior,
                           const ObservedPath& obs, const ParticleFilterOptions& options);

struct LinearFilterModel {
  Fn1 f, g, k, beta;
  double S0 = 0.0;
  double prior_mean = 0.0;
};

// Kalman-Bucy filter for dV = (f V + g X + k) dt + dB1, dY = beta (V - X) dt + dB2.
FilterPath kalman_bucy_oracle(const LinearFilterModel& model, const ObservedPath& obs);

struct MartingaleCheckpoint {
  double t = 0.0;
  MeanEstimate estimate;
  double z_score = 0.0;
  bool pass = false;
};

struct MartingaleReport {
  std::vector<MartingaleCheckpoint> checkpoints;
  std::size_t n_paths = 0;
  double z_threshold = 4.0;
  bool pass = false;
};

// Mean of M at grid nodes nearest to each checkpoint time, streamed over paths.
MartingaleReport exponential_martingale_test(const CoefficientSet& coeffs, const ControlLaw& control,
                                             const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                             const std::vector<double>& checkpoints, double z_threshold = 4.0);

// Same test over paths that already carry M.
MartingaleReport exponential_martingale_test(const std::vector<PathBundle>& paths,
                                             const std::vector<double>& checkpoints, double z_threshold = 4.0);

// phi(t, xi_t) along reference paths must have mean 1.
MartingaleReport likelihood_martingale_test(const PhiField& field, const CoefficientSet& coeffs,
                                            const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                            const std::vector<double>& checkpoints, double z_threshold = 4.0);

struct FbsdeReport {
  double rmse_P = 0.0;
  double max_P = 0.0;
  double z_relative_error = 0.0;  // sum |Z - rho H_x| / sum |rho H_x|
  double max_Z = 0.0;
  double excursion_fraction = 0.0;
  bool coverage_warning = false;
  std::size_t n_nodes = 0;
};

// Compares P with H(t, X) and Z with rho H_x(t, X) along the filter output.
FbsdeReport fbsde_relation_check(const FieldTX& H, const CoefficientSet& coeffs, const FilterPath& filter);

}  // namespace kyleback
