#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "kyleback/sde.hpp"

namespace kyleback {

struct Vec2 {
  double v = 0.0;
  double x = 0.0;
};

// Row-major 2x2 matrix.
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  double det() const noexcept { return a * d - b * c; }
  Mat2 inverse() const;
  Mat2 transpose() const noexcept { return {a, c, b, d}; }
  Vec2 operator*(const Vec2& z) const noexcept { return {a * z.v + b * z.x, c * z.v + d * z.x}; }
  Mat2 operator*(const Mat2& m) const noexcept {
    return {a * m.a + b * m.c, a * m.b + b * m.d, c * m.a + d * m.c, c * m.b + d * m.d};
  }
  Mat2 operator+(const Mat2& m) const noexcept { return {a + m.a, b + m.b, c + m.c, d + m.d}; }
  Mat2 operator*(double s) const noexcept { return {a * s, b * s, c * s, d * s}; }
  static Mat2 identity() noexcept { return {1.0, 0.0, 0.0, 1.0}; }
};

// Transition law of the linear-Gaussian reference system
//   d(V,X) = (A(t)(V,X) + c(t)) dt + diag(sv, sx) dW
// from (t, z) to the horizon: mean Phi(T,t) z + d(t), covariance P(t).
// Tabulated by backward RK4 and evaluated by cubic Hermite interpolation.
class GaussianPropagator {
 public:
  GaussianPropagator(const LinearGaussianSpec& spec, double horizon, std::size_t n_intervals = 4000);

  struct State {
    Mat2 phi;    // Phi(T, t)
    Vec2 shift;  // d(t)
    Mat2 cov;    // P(t)
    Mat2 dphi, dcov;
    Vec2 dshift;
  };
  State at(double t) const;
  double horizon() const noexcept { return horizon_; }

  // Forward moments from (s, z) to time t > s by RK4.
  void forward_moments(double s, const Vec2& z, double t, Vec2& mean, Mat2& cov) const;

 private:
  struct Node {
    Mat2 phi, cov;
    Vec2 shift;
    Mat2 dphi, dcov;
    Vec2 dshift;
  };
  Node rhs_node(double t, const Mat2& phi) const;

  LinearGaussianSpec spec_;
  double horizon_;
  std::vector<Node> nodes_;
};

double log_gaussian2(const Vec2& r, const Mat2& cov);

class DensityModel {
 public:
  virtual ~DensityModel() = default;
  // Transition density p(s, z; t, y).
  virtual double density(double s, const Vec2& z, double t, const Vec2& y) const = 0;
  virtual double horizon() const = 0;
  virtual std::string backend() const = 0;
  virtual bool time_homogeneous() const { return false; }
};

class LinearGaussianDensity : public DensityModel {
 public:
  LinearGaussianDensity(const LinearGaussianSpec& spec, double horizon);
  double density(double s, const Vec2& z, double t, const Vec2& y) const override;
  double horizon() const override { return propagator_->horizon(); }
  std::string backend() const override { return "closed_form_gaussian"; }
  bool time_homogeneous() const override { return homogeneous_; }
  std::shared_ptr<const GaussianPropagator> propagator() const noexcept { return propagator_; }
  const LinearGaussianSpec& spec() const noexcept { return spec_; }

 private:
  LinearGaussianSpec spec_;
  std::shared_ptr<const GaussianPropagator> propagator_;
  bool homogeneous_;
};

// Bivariate Gaussian transition density of a linear model; throws singular-covariance
// when det(cov) < 1e-14.
double gaussian_density(const LinearGaussianSpec& spec, double horizon, double s, const Vec2& z, double t,
                        const Vec2& y);

struct NuMeasure {
  struct Atom {
    double v;
    double x;  // g^{-1}(v)
    double w;
  };
  std::vector<Atom> atoms;
};

NuMeasure build_nu(const TerminalLaw& m_star, const CoefficientSet& coeffs, std::size_t n_atoms);

struct ProperReport {
  std::vector<double> ladder;                   // times approaching T
  std::vector<double> max_scaled_eta;           // per atom, max over ladder of (T - t) eta
  double max_scaled_eta_overall = 0.0;
  std::vector<double> min_eta;                  // per atom
  double lambda = 0.0;
  double exp_moment = 0.0;                      // integral of exp(lambda |z0 - y|^2 / T) over m*
  double exp_moment_atoms = 0.0;                // same over the atoms of nu
  bool exp_moment_finite = true;
  double eta_bound = 0.0;
  double moment_bound = 0.0;
  bool pass = false;
};

// Throws improper-conditioning when p(0, z0; T, y_i) falls below `density_floor` for an atom.
ProperReport check_proper(const DensityModel& density, const NuMeasure& nu, const CoefficientSet& coeffs,
                          double lambda, double eta_bound = 1e6, double moment_bound = 1e6,
                          double density_floor = 1e-300);

struct PhiJet {
  double value = 0.0;
  double d_t = 0.0, d_v = 0.0, d_x = 0.0;
  double d_vv = 0.0, d_xx = 0.0, d_vx = 0.0;
};

class PhiField {
 public:
  virtual ~PhiField() = default;
  virtual double value(double t, double v, double x) const = 0;
  // Gradient of ln phi; false when phi is degenerate at the point.
  virtual bool log_gradient(double t, double v, double x, double& gv, double& gx) const = 0;
  virtual PhiJet jet(double t, double v, double x) const = 0;
  virtual double horizon() const = 0;
};

// phi(t, z) = sum_i w_i p(t, z; T, y_i) / p(0, z0; T, y_i) for a linear-Gaussian density,
// evaluated in log-sum-exp form with a relative floor on atom contributions.
class GaussianMixturePhi : public PhiField {
 public:
  GaussianMixturePhi(std::shared_ptr<const GaussianPropagator> propagator, const NuMeasure& nu, Vec2 start,
                     double relative_floor = 1e-15);

  double value(double t, double v, double x) const override;
  double log_value(double t, double v, double x) const;
  bool log_gradient(double t, double v, double x, double& gv, double& gx) const override;
  PhiJet jet(double t, double v, double x) const override;
  double horizon() const override { return propagator_->horizon(); }
  std::size_t n_atoms() const noexcept { return ys_.size(); }

 private:
  std::shared_ptr<const GaussianPropagator> propagator_;
  std::vector<Vec2> ys_;
  std::vector<double> log_c_;
  double log_floor_;
};

std::unique_ptr<GaussianMixturePhi> make_gaussian_phi(const LinearGaussianDensity& density, const NuMeasure& nu,
                                                      const CoefficientSet& coeffs);

// Direct evaluation of the defining sum against any density model.
double phi(const DensityModel& density, const NuMeasure& nu, const CoefficientSet& coeffs, double t, double v,
           double x, double relative_floor = 1e-15);

// (theta1, theta2) = (sigma d_v ln phi, rho d_x ln phi); throws degenerate-phi.
std::array<double, 2> theta(const PhiField& field, const CoefficientSet& coeffs, double t, double v, double x);

// Drift correction of the full bridge (theta on both coordinates).
ControlLaw full_bridge_control(const PhiField& field, const CoefficientSet& coeffs);
// Half bridge: only the factor receives rho * theta2, and alpha records theta2.
ControlLaw half_bridge_control(const PhiField& field, const CoefficientSet& coeffs, double scale = 1.0);

struct ResidualStats {
  double max_abs = 0.0;
  double l2 = 0.0;  // root mean square over probe points
  std::size_t n_points = 0;
};

// Residual of phi_t + b phi_v + mu phi_x + sigma^2 phi_vv / 2 + rho^2 phi_xx / 2 on the probe
// grid, restricted to t <= T - delta.
ResidualStats phi_pde_residual(const PhiField& field, const CoefficientSet& coeffs, const ProbeGrid& probe,
                               double delta);

}  // namespace kyleback
