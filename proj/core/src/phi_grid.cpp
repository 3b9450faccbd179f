#include "kyleback/phi_grid.hpp"

#include <cmath>
#include <numbers>

#include "kyleback/errors.hpp"
#include "fd_lines.hpp"

namespace kyleback {

namespace {

// First and second derivative stencils along one index: fourth order inside, second order
// near the edges.
template <class Get>
void stencil(std::size_t j, std::size_t n, double h, Get u, double& d1, double& d2) {
  if (j >= 2 && j + 2 < n) {
    d1 = (-u(j + 2) + 8 * u(j + 1) - 8 * u(j - 1) + u(j - 2)) / (12 * h);
    d2 = (-u(j + 2) + 16 * u(j + 1) - 30 * u(j) + 16 * u(j - 1) - u(j - 2)) / (12 * h * h);
  } else if (j >= 1 && j + 1 < n) {
    d1 = (u(j + 1) - u(j - 1)) / (2 * h);
    d2 = (u(j + 1) - 2 * u(j) + u(j - 1)) / (h * h);
  } else if (j == 0) {
    d1 = (-3 * u(0) + 4 * u(1) - u(2)) / (2 * h);
    d2 = (u(0) - 2 * u(1) + u(2)) / (h * h);
  } else {
    d1 = (3 * u(j) - 4 * u(j - 1) + u(j - 2)) / (2 * h);
    d2 = (u(j) - 2 * u(j - 1) + u(j - 2)) / (h * h);
  }
}

}  // namespace

GridPhi::GridPhi(const CoefficientSet& coeffs, const NuMeasure& nu, const DensityModel& reference,
                 const GridPhiConfig& cfg)
    : coeffs_(coeffs), horizon_(coeffs.T), t_switch_(coeffs.T - cfg.terminal_gap) {
  coeffs.check_complete();
  cfg.v.validate("v");
  cfg.x.validate("x");
  if (cfg.v.n < 5 || cfg.x.n < 5) throw Error(ErrorKind::invalid_argument, "phi grid needs at least 5 nodes per axis");
  if (!(cfg.terminal_gap > 0.0 && cfg.terminal_gap < coeffs.T) || cfg.n_steps == 0)
    throw Error(ErrorKind::invalid_argument, "phi grid needs 0 < gap < T and n_steps > 0");
  const Vec2 z0{coeffs.v0, coeffs.x0};
  for (const auto& a : nu.atoms) {
    const double p = reference.density(0.0, z0, coeffs.T, {a.v, a.x});
    if (!(p > 0.0))
      throw Error(ErrorKind::improper_conditioning,
                  "reference density vanishes at atom (" + std::to_string(a.v) + ", " + std::to_string(a.x) + ")");
    ys_.push_back({a.v, a.x});
    weights_.push_back(a.w / p);
  }

  const Axis ta{0.0, t_switch_, cfg.n_steps + 1};
  phi_ = FieldTVX(ta, cfg.v, cfg.x);
  const std::size_t nv = cfg.v.n, nx = cfg.x.n, n = nv * nx;
  const double hv = cfg.v.h(), hx = cfg.x.h(), dt = ta.h();
  {
    double* last = phi_.slice(cfg.n_steps);
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) last[j * nx + i] = kernel_sum(t_switch_, cfg.v.at(j), cfg.x.at(i), nullptr, nullptr);
  }
  detail::PlaneCoefficients c;
  c.resize(n);
  detail::PlaneWork work;
  for (std::size_t k = cfg.n_steps; k-- > 0;) {
    const double t = ta.at(k) + 0.5 * dt;
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double v = cfg.v.at(j), x = cfg.x.at(i);
        const double s = coeffs.sigma(t, v, x), rr = coeffs.rho(t, x);
        const std::size_t q = j * nx + i;
        c.av[q] = coeffs.b(t, v, x);
        c.dv[q] = 0.5 * s * s;
        c.ax[q] = coeffs.mu(t, x);
        c.dx[q] = 0.5 * rr * rr;
      }
    double* out = phi_.slice(k);
    detail::douglas_step(nv, nx, hv, hx, dt, c, phi_.slice(k + 1), out, detail::EdgeRule::linear_extrapolation, work);
    for (std::size_t q = 0; q < n; ++q)
      if (!std::isfinite(out[q])) throw Error(ErrorKind::solver_diverged, "phi grid solve produced non-finite values");
  }

  if (!phi_.covers(0.0, z0.v, z0.x)) throw Error(ErrorKind::out_of_domain, "start point outside the phi grid");
  const double start = phi_(0.0, z0.v, z0.x);
  if (!(start > 0.0)) throw Error(ErrorKind::degenerate_phi, "phi grid vanishes at the start point");
  for (std::size_t k = 0; k < ta.n; ++k) {
    double* s = phi_.slice(k);
    for (std::size_t q = 0; q < n; ++q) s[q] /= start;
  }
  for (double& w : weights_) w /= start;
}

double GridPhi::kernel_sum(double t, double v, double x, double* gv, double* gx) const {
  const double tau = horizon_ - t;
  const double mv = v + coeffs_.b(t, v, x) * tau, mx = x + coeffs_.mu(t, x) * tau;
  const double s = coeffs_.sigma(t, v, x), r = coeffs_.rho(t, x);
  const double var_v = s * s * tau, var_x = r * r * tau;
  const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(var_v * var_x));
  double acc = 0.0, av = 0.0, ax = 0.0;
  for (std::size_t i = 0; i < ys_.size(); ++i) {
    const double dv = ys_[i].v - mv, dx = ys_[i].x - mx;
    const double k = weights_[i] * norm * std::exp(-0.5 * (dv * dv / var_v + dx * dx / var_x));
    acc += k;
    av += k * dv / var_v;
    ax += k * dx / var_x;
  }
  if (gv) *gv = acc > 0.0 ? av / acc : 0.0;
  if (gx) *gx = acc > 0.0 ? ax / acc : 0.0;
  return acc;
}

GridPhi::Nodal GridPhi::nodal(std::size_t k, std::size_t j, std::size_t i) const {
  const Axis& va = phi_.v_axis();
  const Axis& xa = phi_.x_axis();
  const double* s = phi_.slice(k);
  const std::size_t nx = xa.n;
  Nodal n{};
  n.value = s[j * nx + i];
  stencil(j, va.n, va.h(), [&](std::size_t q) { return s[q * nx + i]; }, n.d_v, n.d_vv);
  stencil(i, nx, xa.h(), [&](std::size_t q) { return s[j * nx + q]; }, n.d_x, n.d_xx);
  double unused = 0.0;
  stencil(j, va.n, va.h(),
          [&](std::size_t q) {
            double d1 = 0.0, d2 = 0.0;
            stencil(i, nx, xa.h(), [&](std::size_t p) { return s[q * nx + p]; }, d1, d2);
            return d1;
          },
          n.d_vx, unused);
  return n;
}

PhiJet GridPhi::kernel_jet(double t, double v, double x) const {
  const double h = 1e-4;
  auto f = [&](double tt, double vv, double xx) { return kernel_sum(tt, vv, xx, nullptr, nullptr); };
  PhiJet j;
  j.value = f(t, v, x);
  const double ht = std::min(h, 0.5 * (horizon_ - t));
  j.d_t = (f(t + ht, v, x) - f(t - ht, v, x)) / (2 * ht);
  j.d_v = (f(t, v + h, x) - f(t, v - h, x)) / (2 * h);
  j.d_x = (f(t, v, x + h) - f(t, v, x - h)) / (2 * h);
  j.d_vv = (f(t, v + h, x) - 2 * j.value + f(t, v - h, x)) / (h * h);
  j.d_xx = (f(t, v, x + h) - 2 * j.value + f(t, v, x - h)) / (h * h);
  j.d_vx = (f(t, v + h, x + h) - f(t, v + h, x - h) - f(t, v - h, x + h) + f(t, v - h, x - h)) / (4 * h * h);
  return j;
}

double GridPhi::value(double t, double v, double x) const {
  if (t > t_switch_) return kernel_sum(t, v, x, nullptr, nullptr);
  if (!phi_.covers(t, v, x)) return 0.0;
  return phi_(t, v, x);
}

PhiJet GridPhi::jet(double t, double v, double x) const {
  if (t > t_switch_) return kernel_jet(t, v, x);
  if (!phi_.covers(t, v, x))
    throw Error(ErrorKind::out_of_domain, "phi grid queried outside its domain");
  const Axis& ta = phi_.t_axis();
  auto [k, w] = ta.locate(t);
  const auto [j, a] = phi_.v_axis().locate(v);
  const auto [i, b] = phi_.x_axis().locate(x);
  const double dt = ta.h();
  PhiJet out;
  const double cw[4] = {(1 - a) * (1 - b), (1 - a) * b, a * (1 - b), a * b};
  const std::size_t cj[4] = {j, j, j + 1, j + 1}, ci[4] = {i, i + 1, i, i + 1};
  for (int c = 0; c < 4; ++c) {
    const Nodal n0 = nodal(k, cj[c], ci[c]);
    const Nodal n1 = nodal(k + 1, cj[c], ci[c]);
    auto lerp = [w](double p, double q) { return (1 - w) * p + w * q; };
    out.value += cw[c] * lerp(n0.value, n1.value);
    out.d_t += cw[c] * (n1.value - n0.value) / dt;
    out.d_v += cw[c] * lerp(n0.d_v, n1.d_v);
    out.d_x += cw[c] * lerp(n0.d_x, n1.d_x);
    out.d_vv += cw[c] * lerp(n0.d_vv, n1.d_vv);
    out.d_xx += cw[c] * lerp(n0.d_xx, n1.d_xx);
    out.d_vx += cw[c] * lerp(n0.d_vx, n1.d_vx);
  }
  return out;
}

bool GridPhi::log_gradient(double t, double v, double x, double& gv, double& gx) const {
  if (t > t_switch_) {
    const double val = kernel_sum(t, v, x, &gv, &gx);
    return val > 0.0 && std::isfinite(gv) && std::isfinite(gx);
  }
  if (!phi_.covers(t, v, x)) return false;
  const PhiJet j = jet(t, v, x);
  if (!(j.value > 0.0)) return false;
  gv = j.d_v / j.value;
  gx = j.d_x / j.value;
  return std::isfinite(gv) && std::isfinite(gx);
}

}  // namespace kyleback
