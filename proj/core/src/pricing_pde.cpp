#include "kyleback/pricing_pde.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fd_lines.hpp"
#include "kyleback/errors.hpp"

namespace kyleback {

const char* to_string(TimeScheme s) noexcept {
  return s == TimeScheme::crank_nicolson ? "crank_nicolson" : "implicit_euler";
}

const char* to_string(BoundaryPolicy b) noexcept {
  return b == BoundaryPolicy::linear_extrapolation ? "linear_extrapolation" : "neumann_zero";
}

void PDEConfig::validate() const {
  x.validate("x");
  v.validate("v");
  if (x.n < 4 || v.n < 4) throw Error(ErrorKind::invalid_argument, "PDE axes need at least 4 nodes");
  if (n_t == 0) throw Error(ErrorKind::invalid_argument, "PDE needs at least one time step");
  if (!(fixed_point_tol > 0.0) || fixed_point_max_iter == 0)
    throw Error(ErrorKind::invalid_argument, "fixed-point tolerance and iteration cap must be positive");
}

PDEConfig PDEConfig::for_coefficients(const CoefficientSet& coeffs, double dx, double dv, double dt) {
  if (!(dx > 0.0 && dv > 0.0 && dt > 0.0)) throw Error(ErrorKind::invalid_argument, "PDE steps must be positive");
  const double m = coeffs.m_star.mean();
  double sd = std::sqrt(coeffs.m_star.variance());
  if (!(sd > 0.0)) sd = 1.0;
  const double lo = m - 6.0 * sd, hi = m + 6.0 * sd;
  PDEConfig cfg;
  const double xlo = std::min(g_inverse(coeffs, lo), coeffs.x0 - 1.0);
  const double xhi = std::max(g_inverse(coeffs, hi), coeffs.x0 + 1.0);
  cfg.x = Axis::with_step(xlo, xhi, dx);
  cfg.v = Axis::with_step(std::min(lo, coeffs.v0 - 1.0), std::max(hi, coeffs.v0 + 1.0), dv);
  cfg.n_t = static_cast<std::size_t>(std::ceil(coeffs.T / dt));
  return cfg;
}

namespace {

detail::EdgeRule edge_rule(BoundaryPolicy b) {
  return b == BoundaryPolicy::linear_extrapolation ? detail::EdgeRule::linear_extrapolation
                                                   : detail::EdgeRule::neumann_zero;
}

double theta_of(TimeScheme s) { return s == TimeScheme::crank_nicolson ? 0.5 : 1.0; }

void require_finite(const double* u, std::size_t n, double t, const char* what) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(u[i]))
      throw Error(ErrorKind::solver_diverged, std::string(what) + " became non-finite at t = " + std::to_string(t));
}

void finish_report(ResidualReport& r) {
  double ss = 0.0;
  for (double e : r.field.values()) {
    r.max_abs = std::max(r.max_abs, std::abs(e));
    ss += e * e;
  }
  r.n_points = r.field.values().size();
  r.l2 = r.n_points ? std::sqrt(ss / static_cast<double>(r.n_points)) : 0.0;
  r.pass = r.max_abs <= r.tolerance;
}

}  // namespace

FieldTX solve_H_martingale(const CoefficientSet& coeffs, const PDEConfig& cfg) {
  coeffs.check_complete();
  cfg.validate();
  const Axis ta = cfg.t_axis(coeffs.T);
  FieldTX H(ta, cfg.x);
  const std::size_t n = cfg.x.n;
  for (std::size_t i = 0; i < n; ++i) H.at(ta.n - 1, i) = coeffs.g(cfg.x.at(i));

  detail::LineCoefficients now, later;
  now.resize(n);
  later.resize(n);
  auto fill = [&](detail::LineCoefficients& c, double t) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = cfg.x.at(i), r = coeffs.rho(t, x);
      c.a[i] = coeffs.mu(t, x);
      c.d[i] = 0.5 * r * r;
    }
  };
  const double theta = theta_of(cfg.scheme), dt = ta.h();
  const auto rule = edge_rule(cfg.boundary);
  detail::LineWork w;
  fill(later, ta.at(ta.n - 1));
  for (std::size_t k = ta.n - 1; k-- > 0;) {
    fill(now, ta.at(k));
    detail::theta_step(n, cfg.x.h(), dt, theta, now, later, H.slice(k + 1), H.slice(k), rule, w);
    require_finite(H.slice(k), n, ta.at(k), "H");
    std::swap(now, later);
  }
  return H;
}

FieldTX solve_H_general(const CoefficientSet& coeffs, const AffineStrategy& strategy, const PDEConfig& cfg,
                        FixedPointStats* stats) {
  coeffs.check_complete();
  cfg.validate();
  if (!strategy.u0 || !strategy.u1) throw Error(ErrorKind::invalid_argument, "strategy needs u0 and u1");
  const Axis ta = cfg.t_axis(coeffs.T);
  const std::size_t n = cfg.x.n;

  // b must be affine in v; b0 and b1 are read off at v = 0, 1 and confirmed at v = -2.
  for (std::size_t k = 0; k < ta.n; k += std::max<std::size_t>(1, ta.n / 8))
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 16)) {
      const double t = ta.at(k), x = cfg.x.at(i);
      const double b0 = coeffs.b(t, 0.0, x), b1 = coeffs.b(t, 1.0, x) - b0;
      const double pred = b0 - 2.0 * b1;
      if (std::abs(coeffs.b(t, -2.0, x) - pred) > 1e-9 * (1.0 + std::abs(pred)))
        throw Error(ErrorKind::shape_mismatch, "solve_H_general needs b affine in v");
    }

  FieldTX H(ta, cfg.x);
  for (std::size_t i = 0; i < n; ++i) H.at(ta.n - 1, i) = coeffs.g(cfg.x.at(i));

  struct Pieces {
    std::vector<double> mu, rho, u0, u1, b0, b1;
  };
  auto pieces = [&](double t) {
    Pieces p;
    p.mu.resize(n);
    p.rho.resize(n);
    p.u0.resize(n);
    p.u1.resize(n);
    p.b0.resize(n);
    p.b1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = cfg.x.at(i);
      p.mu[i] = coeffs.mu(t, x);
      p.rho[i] = coeffs.rho(t, x);
      p.u0[i] = strategy.u0(t, x);
      p.u1[i] = strategy.u1(t, x);
      p.b0[i] = coeffs.b(t, 0.0, x);
      p.b1[i] = coeffs.b(t, 1.0, x) - p.b0[i];
    }
    return p;
  };
  // H_t + [mu + (u0 + u1 H) rho] H_x + rho^2 H_xx / 2 - b1 H - b0 = 0 with H frozen in the bracket.
  auto linearize = [&](const Pieces& p, const double* lag, detail::LineCoefficients& c) {
    for (std::size_t i = 0; i < n; ++i) {
      c.a[i] = p.mu[i] + (p.u0[i] + p.u1[i] * lag[i]) * p.rho[i];
      c.d[i] = 0.5 * p.rho[i] * p.rho[i];
      c.c[i] = -p.b1[i];
      c.s[i] = -p.b0[i];
    }
  };

  const double theta = theta_of(cfg.scheme), dt = ta.h();
  const auto rule = edge_rule(cfg.boundary);
  detail::LineWork w;
  detail::LineCoefficients now, later;
  now.resize(n);
  later.resize(n);
  Pieces p_later = pieces(ta.at(ta.n - 1));
  linearize(p_later, H.slice(ta.n - 1), later);
  std::vector<double> lag(n), trial(n);
  FixedPointStats st;
  for (std::size_t k = ta.n - 1; k-- > 0;) {
    const Pieces p_now = pieces(ta.at(k));
    std::copy_n(H.slice(k + 1), n, lag.begin());
    std::size_t it = 0;
    for (;;) {
      if (it == cfg.fixed_point_max_iter)
        throw Error(ErrorKind::solver_diverged, "H fixed point did not converge in " + std::to_string(it) +
                                                    " iterations at t = " + std::to_string(ta.at(k)));
      ++it;
      linearize(p_now, lag.data(), now);
      detail::theta_step(n, cfg.x.h(), dt, theta, now, later, H.slice(k + 1), trial.data(), rule, w);
      require_finite(trial.data(), n, ta.at(k), "H");
      double change = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        change = std::max(change, std::abs(trial[i] - lag[i]));
        scale = std::max(scale, std::abs(trial[i]));
      }
      lag.swap(trial);
      if (change <= cfg.fixed_point_tol * scale) break;
    }
    st.max_iterations = std::max(st.max_iterations, it);
    st.total_iterations += it;
    std::copy_n(lag.begin(), n, H.slice(k));
    linearize(p_now, H.slice(k), later);
  }
  if (stats) *stats = st;
  return H;
}

FieldTVX solve_F(const CoefficientSet& coeffs, const AffineStrategy& strategy, const PDEConfig& cfg) {
  coeffs.check_complete();
  cfg.validate();
  if (!strategy.u0 || !strategy.u1) throw Error(ErrorKind::invalid_argument, "strategy needs u0 and u1");
  const Axis ta = cfg.t_axis(coeffs.T);
  const std::size_t nv = cfg.v.n, nx = cfg.x.n;
  FieldTVX F(ta, cfg.v, cfg.x);
  {
    double* last = F.slice(ta.n - 1);
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) last[j * nx + i] = cfg.v.at(j);
  }
  detail::PlaneCoefficients c;
  c.resize(nv * nx);
  detail::PlaneWork w;
  const double dt = ta.h();
  for (std::size_t k = ta.n - 1; k-- > 0;) {
    const double t = ta.at(k) + 0.5 * dt;
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double v = cfg.v.at(j), x = cfg.x.at(i);
        const double s = coeffs.sigma(t, v, x), r = coeffs.rho(t, x);
        const std::size_t q = j * nx + i;
        c.av[q] = coeffs.b(t, v, x);
        c.dv[q] = 0.5 * s * s;
        c.ax[q] = coeffs.mu(t, x) + strategy(t, v, x) * r;
        c.dx[q] = 0.5 * r * r;
      }
    detail::douglas_step(nv, nx, cfg.v.h(), cfg.x.h(), dt, c, F.slice(k + 1), F.slice(k), edge_rule(cfg.boundary), w);
    require_finite(F.slice(k), nv * nx, ta.at(k), "F");
  }
  return F;
}

ResidualReport compatibility_b0(const CoefficientSet& coeffs, const ProbeGrid& probe, double tol) {
  probe.validate();
  ResidualReport r;
  r.tolerance = tol;
  r.field = FieldTX(probe.t, probe.x);
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double t = probe.t.at(k), x = probe.x.at(i);
      const double rho = coeffs.rho(t, x), mu = coeffs.mu(t, x);
      r.field.at(k, i) = detail::coef_dt(coeffs.rho, t, x, coeffs.T) - detail::coef_dx(coeffs.mu, t, x) * rho +
                         detail::coef_dx(coeffs.rho, t, x) * mu + 0.5 * rho * rho * detail::coef_dxx(coeffs.rho, t, x);
    }
  finish_report(r);
  return r;
}

GeneralCompatibilityReport compatibility_general(const CoefficientSet& coeffs, const AffineStrategy& strategy,
                                                 const FieldTX& H, const FieldTVX& F, const ProbeGrid& probe,
                                                 double tol) {
  probe.validate();
  for (double t : {probe.t.lo, probe.t.hi})
    for (double v : {probe.v.lo, probe.v.hi})
      for (double x : {probe.x.lo, probe.x.hi})
        if (!H.covers(t, x) || !F.covers(t, v, x))
          throw Error(ErrorKind::out_of_domain, "compatibility probe leaves the H or F grid");

  // Shape: b = b0(t) + b1(t) v and sigma = sigma(t, v).
  const double xr = coeffs.x0;
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t j = 0; j < probe.v.n; ++j)
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double t = probe.t.at(k), v = probe.v.at(j), x = probe.x.at(i);
        const double b0 = coeffs.b(t, 0.0, xr), b1 = coeffs.b(t, 1.0, xr) - b0;
        const double b = coeffs.b(t, v, x), pred = b0 + b1 * v;
        if (std::abs(b - pred) > 1e-9 * (1.0 + std::abs(pred)))
          throw Error(ErrorKind::shape_mismatch, "b must have the form b0(t) + b1(t) v");
        const double s = coeffs.sigma(t, v, x), s_ref = coeffs.sigma(t, v, xr);
        if (std::abs(s - s_ref) > 1e-9 * (1.0 + std::abs(s_ref)))
          throw Error(ErrorKind::shape_mismatch, "sigma must have the form sigma(t, v)");
      }

  GeneralCompatibilityReport r;
  r.tolerance = tol;
  r.first = FieldTVX(probe.t, probe.v, probe.x);
  const FieldTX Hx = H.d_dx();
  const FieldTVX Fx = F.d_dx();
  double ss = 0.0;
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t j = 0; j < probe.v.n; ++j)
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double t = probe.t.at(k), v = probe.v.at(j), x = probe.x.at(i);
        const double rho = coeffs.rho(t, x), u0 = strategy.u0(t, x), u1 = strategy.u1(t, x);
        const double b0 = coeffs.b(t, 0.0, xr), b1 = coeffs.b(t, 1.0, xr) - b0;
        const double h = H(t, x);
        const double e = rho * (b0 + b1 * h) + rho * rho * ((u0 + u1 * v) * Fx(t, v, x) - Hx(t, x) * (u0 + u1 * h));
        r.first.at(k, j, i) = e;
        r.max_first = std::max(r.max_first, std::abs(e));
        ss += e * e;
      }
  const double np = static_cast<double>(r.first.values().size());
  r.l2_first = std::sqrt(ss / np);
  r.second = compatibility_b0(coeffs, probe, tol);
  r.pass = r.max_first <= tol && r.second.pass;
  return r;
}

}  // namespace kyleback
