#pragma once

#include <limits>
#include <vector>

#include "kyleback/grid.hpp"
#include "kyleback/pricing_pde.hpp"
#include "kyleback/sde.hpp"

namespace kyleback {

struct JOptions {
  double x_ref = std::numeric_limits<double>::quiet_NaN();  // NaN: use x0
  double tol = 1e-4;     // allowed x-dependence of f (or of the G source)
  bool enforce = true;   // throw compatibility_violated when the x-dependence exceeds tol
};

// J(t, x; a) = int_{g^{-1}(a)}^x (H - a) / rho dy + int_t^T f(s; a) ds on the grid of H.
class MartingaleJ {
 public:
  MartingaleJ(FieldTX H, const CoefficientSet& coeffs, double a, const JOptions& opt);

  double a() const noexcept { return a_; }
  double anchor() const noexcept { return anchor_; }
  double x_ref() const noexcept { return x_ref_; }
  const FieldTX& field() const noexcept { return J_; }
  const FieldTX& H() const noexcept { return H_; }
  // f(t_k; a) at x_ref, one value per time node.
  const std::vector<double>& f() const noexcept { return f_; }
  // f(t_k; a)(x) on the x nodes, used for the x-dependence check.
  const FieldTX& f_field() const noexcept { return f_field_; }
  double f_x_dependence() const noexcept { return f_spread_; }

  double value(double t, double x) const { return J_(t, x); }
  // Derivative of the quadrature in its upper limit: (H - a) / rho at (t, x).
  double gradient(double t, double x) const;

 private:
  FieldTX H_;
  CoefficientSet coeffs_;
  double a_, anchor_, x_ref_;
  FieldTX J_, f_field_;
  std::vector<double> f_;
  double f_spread_ = 0.0;
};

MartingaleJ build_J_martingale_case(const FieldTX& H, const CoefficientSet& coeffs, double a,
                                    const JOptions& opt = {});

// J(t, v, x) = int_{g^{-1}(v)}^x (H - F) / rho dy + G(t, v) on the grid of F, with G from
//   G_t + b G_v + sigma^2 G_vv / 2 = -R(t, v, x_ref),  G(T) = 0.
class GeneralJ {
 public:
  GeneralJ(const FieldTX& H, FieldTVX F, const CoefficientSet& coeffs, const PDEConfig& cfg, const JOptions& opt);

  const FieldTVX& field() const noexcept { return J_; }
  const FieldTVX& integral_part() const noexcept { return Jbar_; }
  const FieldTX& G() const noexcept { return G_; }  // on (t, v)
  double x_ref() const noexcept { return x_ref_; }
  double source_x_dependence() const noexcept { return spread_; }

  double value(double t, double v, double x) const { return J_(t, v, x); }
  // (H - F) / rho at (t, v, x).
  double gradient(double t, double v, double x) const;
  double H(double t, double x) const { return Hs_(t, x); }
  double F(double t, double v, double x) const { return F_(t, v, x); }

 private:
  FieldTX Hs_;  // H sampled on the (t, x) axes of F
  FieldTVX F_;
  CoefficientSet coeffs_;
  double x_ref_;
  FieldTVX Jbar_, J_;
  FieldTX G_;
  double spread_ = 0.0;
};

GeneralJ build_J_general(const FieldTX& H, const FieldTVX& F, const CoefficientSet& coeffs, const PDEConfig& cfg,
                         const JOptions& opt = {});

struct VerificationReport {
  std::vector<double> residual;  // probe order (t outer, then v, then x)
  double max_pde = 0.0;
  double l2_pde = 0.0;
  double max_gradient = 0.0;  // max |J_x rho - (H - a)| or |J_x rho - (H - F)|
  std::size_t n_points = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// J_t + mu J_x + rho^2 J_xx / 2 on the probe (t, x) nodes.
VerificationReport verification_pde_residual(const MartingaleJ& J, const CoefficientSet& coeffs,
                                             const ProbeGrid& probe, double tol = 1e-6);

// J_t + b J_v + mu J_x + sigma^2 J_vv / 2 + rho^2 J_xx / 2 on the probe (t, v, x) nodes.
VerificationReport verification_pde_residual(const GeneralJ& J, const CoefficientSet& coeffs,
                                             const ProbeGrid& probe, double tol = 1e-6);

}  // namespace kyleback
