#include "kyleback/verification.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fd_lines.hpp"
#include "kyleback/errors.hpp"

namespace kyleback {

namespace {

using RhoLine = std::vector<double>;  // rho at nodes, cell midpoints interleaved: size 2n - 1

RhoLine rho_line(const CoefficientSet& c, const Axis& ax, double t) {
  RhoLine r(2 * ax.n - 1);
  for (std::size_t i = 0; i < ax.n; ++i) {
    r[2 * i] = c.rho(t, ax.at(i));
    if (i + 1 < ax.n) r[2 * i + 1] = c.rho(t, 0.5 * (ax.at(i) + ax.at(i + 1)));
  }
  for (double v : r)
    if (!(std::abs(v) > 1e-12))
      throw Error(ErrorKind::assumption_violated, "rho vanishes at t = " + std::to_string(t) + " (division guard)");
  return r;
}

// Cumulative Simpson integral from the first node of N(y) / rho(y), with N linear per cell.
void cumulative(const Axis& ax, const double* N, const RhoLine& r, std::vector<double>& C) {
  const double h = ax.h();
  C.assign(ax.n, 0.0);
  for (std::size_t i = 0; i + 1 < ax.n; ++i)
    C[i + 1] = C[i] + h / 6.0 * (N[i] / r[2 * i] + 2.0 * (N[i] + N[i + 1]) / r[2 * i + 1] + N[i + 1] / r[2 * i + 2]);
}

// Integral from the first node to y, with rho evaluated directly inside the partial cell.
double partial(const Axis& ax, const double* N, const RhoLine& r, const std::vector<double>& C,
               const std::function<double(double)>& rho_at, double y) {
  const auto [i, w] = ax.locate(y);
  const double xi = ax.at(i), len = y - xi;
  if (len == 0.0) return C[i];
  const double ny = (1 - w) * N[i] + w * N[i + 1];
  const double nm = 0.5 * (N[i] + ny);
  return C[i] + len / 6.0 * (N[i] / r[2 * i] + 4.0 * nm / rho_at(xi + 0.5 * len) + ny / rho_at(y));
}

double lerp_row(const Axis& ax, const double* row, double x) {
  const auto [i, w] = ax.locate(x);
  return (1 - w) * row[i] + w * row[i + 1];
}

double resolve_x_ref(const JOptions& opt, const CoefficientSet& c, const Axis& ax) {
  const double x = std::isnan(opt.x_ref) ? c.x0 : opt.x_ref;
  if (!ax.contains(x)) throw Error(ErrorKind::out_of_domain, "x_ref lies outside the grid");
  return x;
}

// Root-finding noise may put g^{-1} of an edge value a hair outside the grid; snap it back.
double snap_anchor(const Axis& ax, double anchor, double level) {
  const double slack = 1e-9 * ax.h();
  if (anchor < ax.lo && anchor >= ax.lo - slack) return ax.lo;
  if (anchor > ax.hi && anchor <= ax.hi + slack) return ax.hi;
  if (!ax.contains(anchor))
    throw Error(ErrorKind::out_of_domain,
                "g^{-1}(" + std::to_string(level) + ") = " + std::to_string(anchor) + " lies outside the x grid");
  return anchor;
}

}  // namespace

MartingaleJ::MartingaleJ(FieldTX H, const CoefficientSet& coeffs, double a, const JOptions& opt)
    : H_(std::move(H)), coeffs_(coeffs), a_(a), anchor_(g_inverse(coeffs, a)), x_ref_(0.0) {
  const Axis& ta = H_.t_axis();
  const Axis& xa = H_.x_axis();
  anchor_ = snap_anchor(xa, anchor_, a);
  x_ref_ = resolve_x_ref(opt, coeffs, xa);
  J_ = FieldTX(ta, xa);
  f_field_ = FieldTX(ta, xa);
  f_.assign(ta.n, 0.0);
  const FieldTX Ht = H_.d_dt(), Hx = H_.d_dx();
  const std::size_t n = xa.n;
  std::vector<double> N(n), M(n), C, CM;
  for (std::size_t k = 0; k < ta.n; ++k) {
    const double t = ta.at(k);
    const RhoLine r = rho_line(coeffs, xa, t);
    const auto rho_at = [&](double y) { return coeffs.rho(t, y); };
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xa.at(i), rho = r[2 * i];
      N[i] = H_.at(k, i) - a;
      M[i] = Ht.at(k, i) - N[i] * detail::coef_dt(coeffs.rho, t, x, coeffs.T) / rho;
    }
    cumulative(xa, N.data(), r, C);
    cumulative(xa, M.data(), r, CM);
    const double c0 = partial(xa, N.data(), r, C, rho_at, anchor_);
    const double m0 = partial(xa, M.data(), r, CM, rho_at, anchor_);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = xa.at(i), rho = r[2 * i];
      J_.at(k, i) = C[i] - c0;
      f_field_.at(k, i) = (coeffs.mu(t, x) / rho - 0.5 * detail::coef_dx(coeffs.rho, t, x)) * N[i] +
                          0.5 * Hx.at(k, i) * rho + (CM[i] - m0);
    }
    f_[k] = lerp_row(xa, f_field_.slice(k), x_ref_);
    for (std::size_t i = n / 4; i <= 3 * n / 4; ++i)
      f_spread_ = std::max(f_spread_, std::abs(f_field_.at(k, i) - f_[k]));
  }
  if (opt.enforce && f_spread_ > opt.tol)
    throw Error(ErrorKind::compatibility_violated,
                "f(t; a) depends on x: spread " + std::to_string(f_spread_) + " > " + std::to_string(opt.tol));
  // int_t^T f by the trapezoid rule on the time nodes.
  double tail = 0.0;
  for (std::size_t k = ta.n; k-- > 0;) {
    if (k + 1 < ta.n) tail += 0.5 * ta.h() * (f_[k] + f_[k + 1]);
    for (std::size_t i = 0; i < n; ++i) J_.at(k, i) += tail;
  }
}

double MartingaleJ::gradient(double t, double x) const { return (H_(t, x) - a_) / coeffs_.rho(t, x); }

MartingaleJ build_J_martingale_case(const FieldTX& H, const CoefficientSet& coeffs, double a, const JOptions& opt) {
  return MartingaleJ(H, coeffs, a, opt);
}

GeneralJ::GeneralJ(const FieldTX& H, FieldTVX F, const CoefficientSet& coeffs, const PDEConfig& cfg,
                   const JOptions& opt)
    : F_(std::move(F)), coeffs_(coeffs), x_ref_(0.0) {
  const Axis& ta = F_.t_axis();
  const Axis& va = F_.v_axis();
  const Axis& xa = F_.x_axis();
  x_ref_ = resolve_x_ref(opt, coeffs, xa);
  Hs_ = FieldTX(ta, xa);
  for (std::size_t k = 0; k < ta.n; ++k)
    for (std::size_t i = 0; i < xa.n; ++i) {
      if (!H.covers(ta.at(k), xa.at(i))) throw Error(ErrorKind::out_of_domain, "F grid extends beyond the H grid");
      Hs_.at(k, i) = H(ta.at(k), xa.at(i));
    }

  const std::size_t nv = va.n, nx = xa.n;
  Jbar_ = FieldTVX(ta, va, xa);
  std::vector<double> N(nx), C;
  for (std::size_t k = 0; k < ta.n; ++k) {
    const double t = ta.at(k);
    const RhoLine r = rho_line(coeffs, xa, t);
    const auto rho_at = [&](double y) { return coeffs.rho(t, y); };
    for (std::size_t j = 0; j < nv; ++j) {
      const double anchor = snap_anchor(xa, g_inverse(coeffs, va.at(j)), va.at(j));
      for (std::size_t i = 0; i < nx; ++i) N[i] = Hs_.at(k, i) - F_.at(k, j, i);
      cumulative(xa, N.data(), r, C);
      const double c0 = partial(xa, N.data(), r, C, rho_at, anchor);
      for (std::size_t i = 0; i < nx; ++i) Jbar_.at(k, j, i) = C[i] - c0;
    }
  }

  // Source of the G equation on every node, then its spread in x against x_ref.
  const FieldTVX Jt = Jbar_.d_dt(), Jv = Jbar_.d_dv(), Jvv = Jbar_.d_dvv(), Fx = F_.d_dx();
  const FieldTX Hx = Hs_.d_dx();
  FieldTX R_ref(ta, va);
  std::vector<double> row(nx);
  for (std::size_t k = 0; k < ta.n; ++k) {
    const double t = ta.at(k);
    for (std::size_t j = 0; j < nv; ++j) {
      const double v = va.at(j);
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = xa.at(i), rho = coeffs.rho(t, x), s = coeffs.sigma(t, v, x);
        const double d = Hs_.at(k, i) - F_.at(k, j, i);
        row[i] = Jt.at(k, j, i) + coeffs.b(t, v, x) * Jv.at(k, j, i) + 0.5 * s * s * Jvv.at(k, j, i) +
                 coeffs.mu(t, x) * d / rho +
                 0.5 * ((Hx.at(k, i) - Fx.at(k, j, i)) * rho - d * detail::coef_dx(coeffs.rho, t, x));
      }
      R_ref.at(k, j) = lerp_row(xa, row.data(), x_ref_);
      for (std::size_t i = nx / 4; i <= 3 * nx / 4; ++i) spread_ = std::max(spread_, std::abs(row[i] - R_ref.at(k, j)));
    }
  }
  if (opt.enforce && spread_ > opt.tol)
    throw Error(ErrorKind::compatibility_violated,
                "G source depends on x: spread " + std::to_string(spread_) + " > " + std::to_string(opt.tol));

  G_ = FieldTX(ta, va);
  detail::LineCoefficients now, later;
  now.resize(nv);
  later.resize(nv);
  auto fill = [&](detail::LineCoefficients& c, std::size_t k) {
    const double t = ta.at(k);
    for (std::size_t j = 0; j < nv; ++j) {
      const double v = va.at(j), s = coeffs.sigma(t, v, x_ref_);
      c.a[j] = coeffs.b(t, v, x_ref_);
      c.d[j] = 0.5 * s * s;
      c.s[j] = R_ref.at(k, j);
    }
  };
  const double theta = cfg.scheme == TimeScheme::crank_nicolson ? 0.5 : 1.0;
  const auto rule = cfg.boundary == BoundaryPolicy::linear_extrapolation ? detail::EdgeRule::linear_extrapolation
                                                                         : detail::EdgeRule::neumann_zero;
  detail::LineWork w;
  fill(later, ta.n - 1);
  for (std::size_t k = ta.n - 1; k-- > 0;) {
    fill(now, k);
    detail::theta_step(nv, va.h(), ta.h(), theta, now, later, G_.slice(k + 1), G_.slice(k), rule, w);
    std::swap(now, later);
  }
  if (!G_.all_finite()) throw Error(ErrorKind::solver_diverged, "G became non-finite");

  J_ = Jbar_;
  for (std::size_t k = 0; k < ta.n; ++k)
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) J_.at(k, j, i) += G_.at(k, j);
}

double GeneralJ::gradient(double t, double v, double x) const {
  return (Hs_(t, x) - F_(t, v, x)) / coeffs_.rho(t, x);
}

GeneralJ build_J_general(const FieldTX& H, const FieldTVX& F, const CoefficientSet& coeffs, const PDEConfig& cfg,
                         const JOptions& opt) {
  return GeneralJ(H, F, coeffs, cfg, opt);
}

namespace {

void finish(VerificationReport& r) {
  double ss = 0.0;
  for (double e : r.residual) {
    r.max_pde = std::max(r.max_pde, std::abs(e));
    ss += e * e;
  }
  r.n_points = r.residual.size();
  r.l2_pde = r.n_points ? std::sqrt(ss / static_cast<double>(r.n_points)) : 0.0;
  r.pass = r.max_pde <= r.tolerance && r.max_gradient <= 1e-10;
}

}  // namespace

VerificationReport verification_pde_residual(const MartingaleJ& J, const CoefficientSet& coeffs,
                                             const ProbeGrid& probe, double tol) {
  probe.validate();
  VerificationReport r;
  r.tolerance = tol;
  const FieldTX Jt = J.field().d_dt();
  const double h = J.field().x_axis().h();
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double t = probe.t.at(k), x = probe.x.at(i);
      if (!J.field().covers(t, x - h) || !J.field().covers(t, x + h))
        throw Error(ErrorKind::out_of_domain, "verification probe leaves the J grid");
      const double rho = coeffs.rho(t, x), jx = J.gradient(t, x);
      const double jxx = (J.gradient(t, x + h) - J.gradient(t, x - h)) / (2 * h);
      r.residual.push_back(Jt(t, x) + coeffs.mu(t, x) * jx + 0.5 * rho * rho * jxx);
      r.max_gradient = std::max(r.max_gradient, std::abs(jx * rho - (J.H()(t, x) - J.a())));
    }
  finish(r);
  return r;
}

VerificationReport verification_pde_residual(const GeneralJ& J, const CoefficientSet& coeffs,
                                             const ProbeGrid& probe, double tol) {
  probe.validate();
  VerificationReport r;
  r.tolerance = tol;
  const FieldTVX Jt = J.field().d_dt(), Jv = J.field().d_dv(), Jvv = J.field().d_dvv();
  const double h = J.field().x_axis().h();
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t j = 0; j < probe.v.n; ++j)
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double t = probe.t.at(k), v = probe.v.at(j), x = probe.x.at(i);
        if (!J.field().covers(t, v, x - h) || !J.field().covers(t, v, x + h))
          throw Error(ErrorKind::out_of_domain, "verification probe leaves the J grid");
        const double rho = coeffs.rho(t, x), s = coeffs.sigma(t, v, x), jx = J.gradient(t, v, x);
        const double jxx = (J.gradient(t, v, x + h) - J.gradient(t, v, x - h)) / (2 * h);
        r.residual.push_back(Jt(t, v, x) + coeffs.b(t, v, x) * Jv(t, v, x) + coeffs.mu(t, x) * jx +
                             0.5 * s * s * Jvv(t, v, x) + 0.5 * rho * rho * jxx);
        r.max_gradient = std::max(r.max_gradient, std::abs(jx * rho - (J.H(t, x) - J.F(t, v, x))));
      }
  finish(r);
  return r;
}

}  // namespace kyleback
