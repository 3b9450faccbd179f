#pragma once

#include <cstddef>

#include "kyleback/affine.hpp"
#include "kyleback/grid.hpp"
#include "kyleback/sde.hpp"

namespace kyleback {

enum class TimeScheme { crank_nicolson, implicit_euler };
enum class BoundaryPolicy { linear_extrapolation, neumann_zero };

const char* to_string(TimeScheme s) noexcept;
const char* to_string(BoundaryPolicy b) noexcept;

struct PDEConfig {
  Axis x{-6.0, 6.0, 601};
  Axis v{-6.0, 6.0, 121};  // used by the (t, v, x) solves
  std::size_t n_t = 400;
  TimeScheme scheme = TimeScheme::crank_nicolson;
  BoundaryPolicy boundary = BoundaryPolicy::linear_extrapolation;
  double fixed_point_tol = 1e-10;
  std::size_t fixed_point_max_iter = 50;

  void validate() const;
  Axis t_axis(double horizon) const { return Axis{0.0, horizon, n_t + 1}; }

  // x spans g^{-1} of mean +- 6 std of the terminal law (widened to hold x0), v likewise.
  static PDEConfig for_coefficients(const CoefficientSet& coeffs, double dx = 0.02, double dv = 0.1,
                                    double dt = 2.5e-3);
};

// H_t + mu H_x + rho^2 H_xx / 2 = 0, H(T) = g.
FieldTX solve_H_martingale(const CoefficientSet& coeffs, const PDEConfig& cfg);

struct FixedPointStats {
  std::size_t max_iterations = 0;
  std::size_t total_iterations = 0;
};

// b must be affine in v: b = b0(t, x) + b1(t, x) v. Solves
//   H_t + mu H_x + rho^2 H_xx / 2 + (u0 + u1 H) rho H_x = b0 + b1 H,  H(T) = g,
// with the (u0 + u1 H) factor lagged inside a per-slice fixed point.
FieldTX solve_H_general(const CoefficientSet& coeffs, const AffineStrategy& strategy, const PDEConfig& cfg,
                        FixedPointStats* stats = nullptr);

// F_t + sigma^2 F_vv / 2 + rho^2 F_xx / 2 + b F_v + (mu + u rho) F_x = 0, F(T) = v, by Douglas ADI.
FieldTVX solve_F(const CoefficientSet& coeffs, const AffineStrategy& strategy, const PDEConfig& cfg);

struct ResidualReport {
  FieldTX field;  // residual on the probe (t, x) nodes
  double max_abs = 0.0;
  double l2 = 0.0;  // root mean square
  double tolerance = 0.0;
  std::size_t n_points = 0;
  bool pass = false;
};

// rho_t - mu_x rho + rho_x mu + rho^2 rho_xx / 2 on the probe (t, x) nodes.
ResidualReport compatibility_b0(const CoefficientSet& coeffs, const ProbeGrid& probe, double tol = 1e-6);

struct GeneralCompatibilityReport {
  FieldTVX first;  // rho (b0 + b1 H) + rho^2 [(u0 + u1 v) F_x - H_x (u0 + u1 H)]
  ResidualReport second;
  double max_first = 0.0;
  double l2_first = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Requires b = b0(t) + b1(t) v and sigma = sigma(t, v); the probe must lie inside both fields.
GeneralCompatibilityReport compatibility_general(const CoefficientSet& coeffs, const AffineStrategy& strategy,
                                                 const FieldTX& H, const FieldTVX& F, const ProbeGrid& probe,
                                                 double tol = 1e-4);

}  // namespace kyleback
