#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kyleback/sde.hpp"

namespace kyleback {

// u(t, v, x) = u0(t, x) + u1(t, x) v
struct AffineStrategy {
  Fn2 u0;
  Fn2 u1;

  double operator()(double t, double v, double x) const { return u0(t, x) + u1(t, x) * v; }
  Fn3 as_function() const;
};

struct GrowthReport {
  std::vector<double> k_of_t;  // max |u| / (1 + |v| + |x|) per probe time
  double k_max = 0.0;
  bool pass = false;
};

GrowthReport linear_growth_check(const AffineStrategy& strategy, const ProbeGrid& probe, double bound = 1e6);

// A(t, x) = int_0^x u0 / rho dy and B(t, x) = int_0^x u1 / rho dy by composite Simpson,
// tabulated on (t, x) and evaluable off-grid. A_x and B_x are exact.
class ABFields {
 public:
  ABFields(AffineStrategy strategy, Fn2 rho, Axis t, Axis x, double quad_step, double rho_floor);

  double A(double t, double x) const { return integrate(strategy_.u0, t, x); }
  double B(double t, double x) const { return integrate(strategy_.u1, t, x); }
  double A_x(double t, double x) const;
  double B_x(double t, double x) const;

  const FieldTX& A_grid() const noexcept { return a_; }
  const FieldTX& B_grid() const noexcept { return b_; }
  double quad_step() const noexcept { return quad_step_; }

 private:
  double integrate(const Fn2& num, double t, double x) const;

  AffineStrategy strategy_;
  Fn2 rho_;
  double quad_step_;
  double rho_floor_;
  FieldTX a_, b_;
};

ABFields build_AB(const AffineStrategy& strategy, const CoefficientSet& coeffs, Axis t, Axis x,
                  double quad_step = 1e-2, double rho_floor = 1e-10);

// h(t, v) with optional analytic partial derivatives; missing ones use central differences.
struct HSpec {
  Fn2 h;
  Fn2 h_t, h_v, h_vv;

  static HSpec zero();
  double dt(double t, double v) const;
  double dv(double t, double v) const;
  double dvv(double t, double v) const;
};

struct DerivativeSteps {
  double t = 1e-4;
  double x = 1e-4;
  double v3 = 1e-2;  // step of the third v-derivative stencil
};

struct CompatibilityReport {
  FieldTX I0, I1, I2;
  FieldTVX G, G_vvv, residual;
  double max_abs = 0.0;
  double l2 = 0.0;
  double max_abs_G_vvv = 0.0;
  bool cubic_vanishes = false;
  double cubic_tolerance = 1e-4;
  std::size_t n_points = 0;
};

// I0 = A_t + mu A_x + rho^2 (A_xx + A_x^2) / 2
// I1 = B_t + mu B_x + rho^2 B_xx / 2 + rho^2 A_x B_x
// I2 = rho^2 B_x^2 / 2
// G  = h_t + b (h_v + B) + sigma^2 (h_vv + (h_v + B)^2) / 2
// and R = I2 v^2 + I1 v + I0 + G on the probe grid.
CompatibilityReport compatibility_residual(const AffineStrategy& strategy, const CoefficientSet& coeffs,
                                           const HSpec& h, const ProbeGrid& probe, const DerivativeSteps& steps = {},
                                           double quad_step = 1e-2);

// h = h0(t) + h1(t) v + h2(t) v^2 for the structured cases.
struct CaseH {
  Fn1 h0, h1, h2;
  Fn1 dh0, dh1, dh2;  // optional derivatives
  double case3_lower_limit = 0.0;  // lower limit of the integral in the Case-3 identity
};

struct CaseReport {
  int case_id = 0;
  double max_I0 = 0.0, max_I1 = 0.0, max_I2 = 0.0;
  double max_u1 = 0.0;
  std::vector<std::pair<std::string, double>> extra;  // named auxiliary residuals
  std::vector<std::string> failures;
  bool validated_on_degenerate_inputs_only = false;
  double tolerance = 1e-6;
  bool pass = false;
};

CaseReport case_check(int case_id, const AffineStrategy& strategy, const CoefficientSet& coeffs, const CaseH& h,
                      const ProbeGrid& probe, double tolerance = 1e-6, const DerivativeSteps& steps = {});

struct RiccatiPath {
  std::vector<double> t, S;
  Fn1 f, beta;
  double forcing = 1.0;
  bool blow_up = false;
  double blow_up_time = 0.0;

  double rhs(double time, double s) const { return 2.0 * f(time) * s - beta(time) * beta(time) * s * s + forcing; }
  // Cubic Hermite with the ODE slopes at the nodes.
  double value(double time) const;
  double derivative(double time) const;
  // Throws blow-up carrying the time.
  void require_finite() const;
};

// RK4 for dS/dt = 2 f S - beta^2 S^2 + forcing. Blow-up: S leaving [0, s_max].
RiccatiPath riccati_solve(const Fn1& f, const Fn1& beta, double s0, const TimeGrid& grid, double forcing = 1.0,
                          double s_max = 1e8);

struct LinearReferenceModel {
  CoefficientSet coeffs;
  AffineStrategy strategy;
  RiccatiPath S;
  HSpec h;
};

struct LinearReferenceOptions {
  double horizon = 1.0;
  double dt = 1e-3;
  double forcing = 1.0;
};

// b = f v + g x + k, sigma = 1, mu = (f + g) x + k, rho = S beta, u0 = -beta x, u1 = beta,
// with h(t, v) = h0(t) - v^2 / (2 S) and h0' = beta^2 S / 2 + 1 / (2 S).
LinearReferenceModel linear_reference_model(const Fn1& f, const Fn1& g, const Fn1& k, const Fn1& beta, double s0,
                                            const LinearReferenceOptions& options = {});

}  // namespace kyleback
