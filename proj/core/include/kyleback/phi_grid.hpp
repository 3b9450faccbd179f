#pragma once

#include "kyleback/conditioning.hpp"

namespace kyleback {

struct GridPhiConfig {
  Axis v{-5.0, 5.0, 101};
  Axis x{-5.0, 5.0, 101};
  std::size_t n_steps = 100;   // backward steps on [0, T - terminal_gap]
  double terminal_gap = 1e-2;  // frozen-coefficient kernels take over after T - terminal_gap
};

// Finite-difference phi for arbitrary coefficients: the backward equation
//   phi_t + b phi_v + mu phi_x + sigma^2 phi_vv / 2 + rho^2 phi_xx / 2 = 0
// is solved by Douglas ADI from T - gap, where phi is seeded with one-step Euler kernels
// divided by the reference densities p(0, z0; T, y_i). Linear extrapolation at the edges.
// Values are rescaled so that phi(0, z0) = 1.
class GridPhi : public PhiField {
 public:
  GridPhi(const CoefficientSet& coeffs, const NuMeasure& nu, const DensityModel& reference,
          const GridPhiConfig& config);

  double value(double t, double v, double x) const override;
  bool log_gradient(double t, double v, double x, double& gv, double& gx) const override;
  PhiJet jet(double t, double v, double x) const override;
  double horizon() const override { return horizon_; }

  double switch_time() const noexcept { return t_switch_; }
  const FieldTVX& grid() const noexcept { return phi_; }

 private:
  struct Nodal {
    double value, d_v, d_x, d_vv, d_xx, d_vx;
  };
  Nodal nodal(std::size_t k, std::size_t j, std::size_t i) const;
  double kernel_sum(double t, double v, double x, double* gv, double* gx) const;
  PhiJet kernel_jet(double t, double v, double x) const;

  CoefficientSet coeffs_;
  std::vector<Vec2> ys_;
  std::vector<double> weights_;  // w_i / p(0, z0; T, y_i), times the normalisation
  FieldTVX phi_;
  double horizon_;
  double t_switch_;
};

}  // namespace kyleback
