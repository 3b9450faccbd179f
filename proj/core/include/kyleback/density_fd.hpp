#pragma once

#include <memory>
#include <vector>

#include "kyleback/conditioning.hpp"

namespace kyleback {

struct FokkerPlanckConfig {
  Axis v{-6.0, 6.0, 601};
  Axis x{-6.0, 6.0, 601};
  std::size_t n_steps = 200;
  std::size_t n_stored = 32;  // slices kept for interpolation in time (plus the final one)
  bool explicit_scheme = false;
};

// Forward Kolmogorov solve for p(0, z0; t, .) on a truncated rectangle with zero boundary
// values. Conservative central differences in space, Douglas ADI in time.
class FokkerPlanckDensity : public DensityModel {
 public:
  FokkerPlanckDensity(const CoefficientSet& coeffs, const FokkerPlanckConfig& config);

  // Only transitions from (0, z0) are available; for time-homogeneous coefficients a start
  // at (s, z0) is served by the slice at t - s.
  double density(double s, const Vec2& z, double t, const Vec2& y) const override;
  double horizon() const override { return horizon_; }
  std::string backend() const override { return "fokker_planck_grid"; }
  bool time_homogeneous() const override { return homogeneous_; }

  double mass(std::size_t slice) const;
  double final_mass() const { return mass(times_.size() - 1); }
  const std::vector<double>& stored_times() const noexcept { return times_; }
  const std::vector<double>& slice(std::size_t i) const noexcept { return slices_[i]; }
  const Axis& v_axis() const noexcept { return v_; }
  const Axis& x_axis() const noexcept { return x_; }
  double start_time() const noexcept { return t_init_; }

 private:
  double at_slice(std::size_t s, double v, double x) const;
  double short_time(double t, double v, double x) const;

  Axis v_, x_;
  double horizon_;
  Vec2 z0_;
  bool homogeneous_;
  double t_init_;
  double b0_, m0_, s0_, r0_;  // coefficients frozen at the start for t < t_init
  std::vector<double> times_;
  std::vector<std::vector<double>> slices_;
};

std::unique_ptr<FokkerPlanckDensity> estimate_density_fd(const CoefficientSet& coeffs,
                                                         const FokkerPlanckConfig& config);

// Kernel estimate of p(0, z0; t, .) from reference paths recorded at a set of times.
class KernelDensity : public DensityModel {
 public:
  KernelDensity(const CoefficientSet& coeffs, std::size_t n_paths, std::size_t n_steps, std::size_t n_snapshots,
                std::uint64_t seed, double bandwidth_scale = 1.0);

  double density(double s, const Vec2& z, double t, const Vec2& y) const override;
  double horizon() const override { return horizon_; }
  std::string backend() const override { return "kernel_mc"; }

 private:
  double at_snapshot(std::size_t s, const Vec2& y) const;

  double horizon_;
  Vec2 z0_;
  std::vector<double> times_;
  std::vector<std::vector<Vec2>> clouds_;
  std::vector<Vec2> bandwidths_;
};

}  // namespace kyleback
