#include "kyleback/conditioning.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <sstream>

#include "kyleback/errors.hpp"

namespace kyleback {

NuMeasure build_nu(const TerminalLaw& m_star, const CoefficientSet& coeffs, std::size_t n_atoms) {
  if (n_atoms == 0) throw Error(ErrorKind::invalid_argument, "nu needs at least one atom");
  NuMeasure nu;
  if (m_star.kind() == TerminalLaw::Kind::point_mass) {
    const double y = m_star.mean();
    nu.atoms.push_back({y, g_inverse(coeffs, y), 1.0});
    return nu;
  }
  nu.atoms.reserve(n_atoms);
  const double w = 1.0 / static_cast<double>(n_atoms);
  for (std::size_t i = 0; i < n_atoms; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(n_atoms);
    const double v = m_star.quantile(p);
    nu.atoms.push_back({v, g_inverse(coeffs, v), w});
  }
  return nu;
}

ProperReport check_proper(const DensityModel& density, const NuMeasure& nu, const CoefficientSet& coeffs,
                          double lambda, double eta_bound, double moment_bound, double density_floor) {
  if (nu.atoms.empty()) throw Error(ErrorKind::invalid_argument, "nu has no atoms");
  const double T = coeffs.T;
  const Vec2 z0{coeffs.v0, coeffs.x0};
  ProperReport rep;
  rep.lambda = lambda;
  rep.eta_bound = eta_bound;
  rep.moment_bound = moment_bound;
  for (int j = 1; j <= 12; ++j) rep.ladder.push_back(T * (1.0 - std::ldexp(1.0, -j)));
  for (const auto& atom : nu.atoms) {
    const Vec2 y{atom.v, atom.x};
    const double denom = density.density(0.0, z0, T, y);
    if (!(denom > density_floor)) {
      std::ostringstream msg;
      msg << "reference density at atom (" << atom.v << ", " << atom.x << ") is " << denom
          << ", below floor " << density_floor;
      throw Error(ErrorKind::improper_conditioning, msg.str());
    }
    double worst = 0.0, least = std::numeric_limits<double>::infinity();
    for (double t : rep.ladder) {
      const double eta = density.density(t, z0, T, y) / denom;
      worst = std::max(worst, (T - t) * eta);
      least = std::min(least, eta);
    }
    rep.max_scaled_eta.push_back(worst);
    rep.min_eta.push_back(least);
    rep.max_scaled_eta_overall = std::max(rep.max_scaled_eta_overall, worst);
  }
  auto weight = [&](double a) {
    const double dv = coeffs.v0 - a, dx = coeffs.x0 - g_inverse(coeffs, a);
    return std::exp(lambda * (dv * dv + dx * dx) / T);
  };
  for (const auto& atom : nu.atoms) {
    const double dv = coeffs.v0 - atom.v, dx = coeffs.x0 - atom.x;
    rep.exp_moment_atoms += atom.w * std::exp(lambda * (dv * dv + dx * dx) / T);
  }
  const auto& law = coeffs.m_star;
  if (law.kind() == TerminalLaw::Kind::point_mass || law.kind() == TerminalLaw::Kind::empirical) {
    rep.exp_moment = law.expectation(weight);
  } else {
    // Growing tail windows; geometric shrinkage of the increments signals convergence.
    std::vector<double> values;
    for (double eps : {1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14}) {
      const double lo = law.quantile(eps), hi = law.quantile(1.0 - eps);
      auto f = [&](double a) { return weight(a) * law.pdf(a); };
      values.push_back(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-12));
    }
    rep.exp_moment = values.back();
    const std::size_t n = values.size();
    const double last = values[n - 1] - values[n - 2], prev = values[n - 2] - values[n - 3];
    rep.exp_moment_finite = std::isfinite(rep.exp_moment) && !(last > 1e-9 * rep.exp_moment && last >= 0.5 * prev);
  }
  rep.pass = rep.max_scaled_eta_overall <= eta_bound && rep.exp_moment_finite && rep.exp_moment <= moment_bound;
  return rep;
}

GaussianMixturePhi::GaussianMixturePhi(std::shared_ptr<const GaussianPropagator> propagator, const NuMeasure& nu,
                                       Vec2 start, double relative_floor)
    : propagator_(std::move(propagator)), log_floor_(std::log(relative_floor)) {
  if (nu.atoms.empty()) throw Error(ErrorKind::invalid_argument, "nu has no atoms");
  const auto s0 = propagator_->at(0.0);
  const Vec2 m0 = s0.phi * start;
  for (const auto& atom : nu.atoms) {
    const Vec2 y{atom.v, atom.x};
    const double log_denom = log_gaussian2({y.v - m0.v - s0.shift.v, y.x - m0.x - s0.shift.x}, s0.cov);
    if (!std::isfinite(log_denom))
      throw Error(ErrorKind::improper_conditioning, "reference density vanishes at an atom");
    ys_.push_back(y);
    log_c_.push_back(std::log(atom.w) - log_denom);
  }
}

double GaussianMixturePhi::log_value(double t, double v, double x) const {
  const auto st = propagator_->at(t);
  const Mat2 inv = st.cov.inverse();
  const Vec2 m = st.phi * Vec2{v, x};
  const double mv = m.v + st.shift.v, mx = m.x + st.shift.x;
  double amax = -std::numeric_limits<double>::infinity();
  thread_local std::vector<double> a;
  a.resize(ys_.size());
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const double rv = ys_[i].v - mv, rx = ys_[i].x - mx;
    a[i] = log_c_[i] - 0.5 * (rv * (inv.a * rv + inv.b * rx) + rx * (inv.c * rv + inv.d * rx));
    amax = std::max(amax, a[i]);
  }
  double sum = 0.0;
  for (double ai : a)
    if (ai - amax > log_floor_) sum += std::exp(ai - amax);
  return amax + std::log(sum) - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(st.cov.det());
}

double GaussianMixturePhi::value(double t, double v, double x) const { return std::exp(log_value(t, v, x)); }

bool GaussianMixturePhi::log_gradient(double t, double v, double x, double& gv, double& gx) const {
  const auto st = propagator_->at(t);
  const double det = st.cov.det();
  if (!(det > 0.0) || !std::isfinite(v) || !std::isfinite(x)) return false;
  const Mat2 inv = st.cov.inverse();
  const Vec2 m = st.phi * Vec2{v, x};
  const double mv = m.v + st.shift.v, mx = m.x + st.shift.x;
  thread_local std::vector<double> a, rvs, rxs;
  a.resize(ys_.size());
  rvs.resize(ys_.size());
  rxs.resize(ys_.size());
  double amax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const double rv = ys_[i].v - mv, rx = ys_[i].x - mx;
    rvs[i] = rv;
    rxs[i] = rx;
    a[i] = log_c_[i] - 0.5 * (rv * (inv.a * rv + inv.b * rx) + rx * (inv.c * rv + inv.d * rx));
    amax = std::max(amax, a[i]);
  }
  if (!std::isfinite(amax)) return false;
  double sw = 0.0, sv = 0.0, sx = 0.0;
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const double d = a[i] - amax;
    if (d <= log_floor_) continue;
    const double w = std::exp(d);
    sw += w;
    sv += w * rvs[i];
    sx += w * rxs[i];
  }
  const Vec2 rbar{sv / sw, sx / sw};
  const Vec2 q = inv * rbar;
  const Mat2 pt = st.phi.transpose();
  const Vec2 g = pt * q;
  gv = g.v;
  gx = g.x;
  return std::isfinite(gv) && std::isfinite(gx);
}

PhiJet GaussianMixturePhi::jet(double t, double v, double x) const {
  const auto st = propagator_->at(t);
  const Mat2 inv = st.cov.inverse();
  const Mat2 pt = st.phi.transpose();
  const Vec2 z{v, x};
  const Vec2 m = st.phi * z;
  const double mv = m.v + st.shift.v, mx = m.x + st.shift.x;
  // d/dt of the residual r = y - Phi z - d is -(Phi' z + d').
  const Vec2 dm = st.dphi * z;
  const Vec2 rt{-(dm.v + st.dshift.v), -(dm.x + st.dshift.x)};
  const Mat2 inv_dcov_inv = inv * st.dcov * inv;
  const double half_trace = 0.5 * ((inv * st.dcov).a + (inv * st.dcov).d);
  const double log_norm = -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(st.cov.det());

  std::vector<double> a(ys_.size());
  double amax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const Vec2 r{ys_[i].v - mv, ys_[i].x - mx};
    const Vec2 s = inv * r;
    a[i] = log_c_[i] - 0.5 * (r.v * s.v + r.x * s.x);
    amax = std::max(amax, a[i]);
  }
  double sw = 0.0, lt = 0.0, gv = 0.0, gx = 0.0, gvv = 0.0, gxx = 0.0, gvx = 0.0;
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const double d = a[i] - amax;
    if (d <= log_floor_) continue;
    const double w = std::exp(d);
    const Vec2 r{ys_[i].v - mv, ys_[i].x - mx};
    const Vec2 s = inv * r;
    const Vec2 g = pt * s;
    const Vec2 u = inv_dcov_inv * r;
    const double l_t = -half_trace - (s.v * rt.v + s.x * rt.x) + 0.5 * (r.v * u.v + r.x * u.x);
    sw += w;
    lt += w * l_t;
    gv += w * g.v;
    gx += w * g.x;
    gvv += w * g.v * g.v;
    gxx += w * g.x * g.x;
    gvx += w * g.v * g.x;
  }
  const Mat2 hess = (pt * inv * st.phi) * -1.0;
  PhiJet j;
  j.value = std::exp(amax + std::log(sw) + log_norm);
  j.d_t = j.value * lt / sw;
  j.d_v = j.value * gv / sw;
  j.d_x = j.value * gx / sw;
  j.d_vv = j.value * (hess.a + gvv / sw);
  j.d_xx = j.value * (hess.d + gxx / sw);
  j.d_vx = j.value * (hess.b + gvx / sw);
  return j;
}

std::unique_ptr<GaussianMixturePhi> make_gaussian_phi(const LinearGaussianDensity& density, const NuMeasure& nu,
                                                      const CoefficientSet& coeffs) {
  return std::make_unique<GaussianMixturePhi>(density.propagator(), nu, Vec2{coeffs.v0, coeffs.x0});
}

double phi(const DensityModel& density, const NuMeasure& nu, const CoefficientSet& coeffs, double t, double v,
           double x, double relative_floor) {
  if (!(t < coeffs.T)) throw Error(ErrorKind::out_of_domain, "phi is defined for t < T");
  const Vec2 z0{coeffs.v0, coeffs.x0};
  std::vector<double> contrib;
  contrib.reserve(nu.atoms.size());
  double cmax = 0.0;
  for (const auto& atom : nu.atoms) {
    const Vec2 y{atom.v, atom.x};
    const double denom = density.density(0.0, z0, coeffs.T, y);
    if (!(denom > 0.0)) throw Error(ErrorKind::improper_conditioning, "reference density vanishes at an atom");
    const double num = t == 0.0 && v == z0.v && x == z0.x ? denom : density.density(t, {v, x}, coeffs.T, y);
    contrib.push_back(atom.w * num / denom);
    cmax = std::max(cmax, contrib.back());
  }
  if (!(cmax > 0.0)) throw Error(ErrorKind::degenerate_phi, "every atom contribution is below the floor");
  double sum = 0.0;
  for (double c : contrib)
    if (c >= relative_floor * cmax) sum += c;
  return sum;
}

std::array<double, 2> theta(const PhiField& field, const CoefficientSet& coeffs, double t, double v, double x) {
  double gv = 0.0, gx = 0.0;
  if (!field.log_gradient(t, v, x, gv, gx)) throw Error(ErrorKind::degenerate_phi, "gradient of ln phi is not finite");
  return {coeffs.sigma(t, v, x) * gv, coeffs.rho(t, x) * gx};
}

ControlLaw full_bridge_control(const PhiField& field, const CoefficientSet& coeffs) {
  return ControlLaw{[&field, &coeffs](double t, double v, double x, double& tv, double& a) {
                      double gv = 0.0, gx = 0.0;
                      if (!field.log_gradient(t, v, x, gv, gx)) return false;
                      tv = coeffs.sigma(t, v, x) * gv;
                      a = coeffs.rho(t, x) * gx;
                      return true;
                    },
                    true};
}

ControlLaw half_bridge_control(const PhiField& field, const CoefficientSet& coeffs, double scale) {
  return ControlLaw{[&field, &coeffs, scale](double t, double v, double x, double& tv, double& a) {
                      double gv = 0.0, gx = 0.0;
                      if (!field.log_gradient(t, v, x, gv, gx)) return false;
                      tv = 0.0;
                      a = scale * coeffs.rho(t, x) * gx;
                      return true;
                    },
                    false};
}

ResidualStats phi_pde_residual(const PhiField& field, const CoefficientSet& coeffs, const ProbeGrid& probe,
                               double delta) {
  probe.validate();
  ResidualStats out;
  double ss = 0.0;
  for (std::size_t k = 0; k < probe.t.n; ++k) {
    const double t = probe.t.at(k);
    if (t > coeffs.T - delta) continue;
    for (std::size_t j = 0; j < probe.v.n; ++j) {
      const double v = probe.v.at(j);
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double x = probe.x.at(i);
        const PhiJet d = field.jet(t, v, x);
        const double s = coeffs.sigma(t, v, x), r = coeffs.rho(t, x);
        const double res = d.d_t + coeffs.b(t, v, x) * d.d_v + coeffs.mu(t, x) * d.d_x + 0.5 * s * s * d.d_vv +
                           0.5 * r * r * d.d_xx;
        out.max_abs = std::max(out.max_abs, std::abs(res));
        ss += res * res;
        ++out.n_points;
      }
    }
  }
  out.l2 = out.n_points > 0 ? std::sqrt(ss / static_cast<double>(out.n_points)) : 0.0;
  return out;
}

}  // namespace kyleback
