#include "kyleback/affine.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kyleback/errors.hpp"

namespace kyleback {

Fn3 AffineStrategy::as_function() const {
  return [u0 = u0, u1 = u1](double t, double v, double x) { return u0(t, x) + u1(t, x) * v; };
}

GrowthReport linear_growth_check(const AffineStrategy& s, const ProbeGrid& probe, double bound) {
  probe.validate();
  GrowthReport r;
  for (std::size_t k = 0; k < probe.t.n; ++k) {
    const double t = probe.t.at(k);
    double worst = 0.0;
    for (std::size_t j = 0; j < probe.v.n; ++j)
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double v = probe.v.at(j), x = probe.x.at(i);
        worst = std::max(worst, std::abs(s(t, v, x)) / (1.0 + std::abs(v) + std::abs(x)));
      }
    r.k_of_t.push_back(worst);
    r.k_max = std::max(r.k_max, worst);
  }
  r.pass = std::isfinite(r.k_max) && r.k_max <= bound;
  return r;
}

ABFields::ABFields(AffineStrategy strategy, Fn2 rho, Axis t, Axis x, double quad_step, double rho_floor)
    : strategy_(std::move(strategy)), rho_(std::move(rho)), quad_step_(quad_step), rho_floor_(rho_floor),
      a_(t, x), b_(t, x) {
  if (!(quad_step > 0.0)) throw Error(ErrorKind::invalid_argument, "quadrature step must be positive");
  for (std::size_t k = 0; k < t.n; ++k)
    for (std::size_t i = 0; i < x.n; ++i) {
      a_.at(k, i) = A(t.at(k), x.at(i));
      b_.at(k, i) = B(t.at(k), x.at(i));
    }
}

double ABFields::integrate(const Fn2& num, double t, double x) const {
  if (x == 0.0) return 0.0;
  auto n = static_cast<std::size_t>(std::ceil(std::abs(x) / quad_step_));
  n += n % 2;
  n = std::max<std::size_t>(n, 2);
  const double h = x / static_cast<double>(n);
  auto f = [&](double y) {
    const double r = rho_(t, y);
    if (!(std::abs(r) >= rho_floor_))
      throw Error(ErrorKind::assumption_violated,
                  "division guard: rho below floor at t = " + std::to_string(t) + ", x = " + std::to_string(y));
    return num(t, y) / r;
  };
  double acc = f(0.0) + f(x);
  for (std::size_t i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(h * static_cast<double>(i));
  return acc * h / 3.0;
}

double ABFields::A_x(double t, double x) const { return strategy_.u0(t, x) / rho_(t, x); }
double ABFields::B_x(double t, double x) const { return strategy_.u1(t, x) / rho_(t, x); }

ABFields build_AB(const AffineStrategy& strategy, const CoefficientSet& coeffs, Axis t, Axis x, double quad_step,
                  double rho_floor) {
  t.validate("t");
  x.validate("x");
  return ABFields(strategy, coeffs.rho, t, x, quad_step, rho_floor);
}

HSpec HSpec::zero() {
  HSpec h;
  h.h = [](double, double) { return 0.0; };
  h.h_t = h.h;
  h.h_v = h.h;
  h.h_vv = h.h;
  return h;
}

double HSpec::dt(double t, double v) const {
  if (h_t) return h_t(t, v);
  const double e = 1e-5;
  return (h(t + e, v) - h(t - e, v)) / (2 * e);
}

double HSpec::dv(double t, double v) const {
  if (h_v) return h_v(t, v);
  const double e = 1e-5;
  return (h(t, v + e) - h(t, v - e)) / (2 * e);
}

double HSpec::dvv(double t, double v) const {
  if (h_vv) return h_vv(t, v);
  const double e = 1e-3;
  return (h(t, v + e) - 2 * h(t, v) + h(t, v - e)) / (e * e);
}

namespace {

// Coefficient pieces shared by the general residual and the structured cases.
struct XTerms {
  double A, B, A_t, B_t, A_x, B_x, A_xx, B_xx, mu, rho;
};

XTerms x_terms(const ABFields& ab, const CoefficientSet& c, double t, double x, const DerivativeSteps& st) {
  XTerms q{};
  q.A = ab.A(t, x);
  q.B = ab.B(t, x);
  q.A_t = (ab.A(t + st.t, x) - ab.A(t - st.t, x)) / (2 * st.t);
  q.B_t = (ab.B(t + st.t, x) - ab.B(t - st.t, x)) / (2 * st.t);
  q.A_x = ab.A_x(t, x);
  q.B_x = ab.B_x(t, x);
  q.A_xx = (ab.A_x(t, x + st.x) - ab.A_x(t, x - st.x)) / (2 * st.x);
  q.B_xx = (ab.B_x(t, x + st.x) - ab.B_x(t, x - st.x)) / (2 * st.x);
  q.mu = c.mu(t, x);
  q.rho = c.rho(t, x);
  return q;
}

double i0_core(const XTerms& q) { return q.A_t + q.mu * q.A_x + 0.5 * q.rho * q.rho * (q.A_xx + q.A_x * q.A_x); }
double i1_core(const XTerms& q) {
  return q.B_t + q.mu * q.B_x + 0.5 * q.rho * q.rho * q.B_xx + q.rho * q.rho * q.A_x * q.B_x;
}
double i2_core(const XTerms& q) { return 0.5 * q.rho * q.rho * q.B_x * q.B_x; }

double g_term(const HSpec& h, const CoefficientSet& c, double t, double v, double x, double B) {
  const double hv = h.dv(t, v) + B;
  const double s = c.sigma(t, v, x);
  return h.dt(t, v) + c.b(t, v, x) * hv + 0.5 * s * s * (h.dvv(t, v) + hv * hv);
}

}  // namespace

CompatibilityReport compatibility_residual(const AffineStrategy& strategy, const CoefficientSet& coeffs,
                                           const HSpec& h, const ProbeGrid& probe, const DerivativeSteps& st,
                                           double quad_step) {
  probe.validate();
  const ABFields ab(strategy, coeffs.rho, probe.t, probe.x, quad_step, 1e-10);
  CompatibilityReport r;
  r.I0 = FieldTX(probe.t, probe.x);
  r.I1 = FieldTX(probe.t, probe.x);
  r.I2 = FieldTX(probe.t, probe.x);
  r.G = FieldTVX(probe.t, probe.v, probe.x);
  r.G_vvv = FieldTVX(probe.t, probe.v, probe.x);
  r.residual = FieldTVX(probe.t, probe.v, probe.x);
  double ss = 0.0;
  for (std::size_t k = 0; k < probe.t.n; ++k) {
    const double t = probe.t.at(k);
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double x = probe.x.at(i);
      const XTerms q = x_terms(ab, coeffs, t, x, st);
      const double i0 = i0_core(q), i1 = i1_core(q), i2 = i2_core(q);
      r.I0.at(k, i) = i0;
      r.I1.at(k, i) = i1;
      r.I2.at(k, i) = i2;
      for (std::size_t j = 0; j < probe.v.n; ++j) {
        const double v = probe.v.at(j);
        const double g = g_term(h, coeffs, t, v, x, q.B);
        const double e = st.v3;
        auto gv = [&](double vv) { return g_term(h, coeffs, t, vv, x, q.B); };
        const double g3 = (gv(v + 2 * e) - 2 * gv(v + e) + 2 * gv(v - e) - gv(v - 2 * e)) / (2 * e * e * e);
        const double res = i2 * v * v + i1 * v + i0 + g;
        r.G.at(k, j, i) = g;
        r.G_vvv.at(k, j, i) = g3;
        r.residual.at(k, j, i) = res;
        r.max_abs = std::max(r.max_abs, std::abs(res));
        r.max_abs_G_vvv = std::max(r.max_abs_G_vvv, std::abs(g3));
        ss += res * res;
        ++r.n_points;
      }
    }
  }
  r.l2 = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(1, r.n_points)));
  r.cubic_vanishes = r.max_abs_G_vvv <= r.cubic_tolerance;
  return r;
}

namespace {

// Polynomial pieces of b and sigma in v, read off at v in {-1, 0, 1} and confirmed at v = +-2.
struct VShape {
  double c0, c1, c2;
  double misfit;
};

VShape v_shape(const std::function<double(double)>& f) {
  const double fm = f(-1.0), f0 = f(0.0), fp = f(1.0);
  VShape s{f0, 0.5 * (fp - fm), 0.5 * (fp - 2 * f0 + fm), 0.0};
  for (double v : {-2.0, 2.0, 0.5}) {
    const double pred = s.c0 + s.c1 * v + s.c2 * v * v;
    s.misfit = std::max(s.misfit, std::abs(f(v) - pred) / (1.0 + std::abs(pred)));
  }
  return s;
}

double deriv1(const Fn1& f, const Fn1& df, double t, double e) {
  if (df) return df(t);
  return (f(t + e) - f(t - e)) / (2 * e);
}

}  // namespace

CaseReport case_check(int case_id, const AffineStrategy& strategy, const CoefficientSet& coeffs, const CaseH& h,
                      const ProbeGrid& probe, double tolerance, const DerivativeSteps& st) {
  if (case_id < 1 || case_id > 5) throw Error(ErrorKind::invalid_argument, "case id must be in 1..5");
  probe.validate();
  CaseReport r;
  r.case_id = case_id;
  r.tolerance = tolerance;
  r.validated_on_degenerate_inputs_only = case_id >= 4;
  const double shape_tol = 1e-9;
  // Admissible polynomial degree in v of b and sigma per case.
  const int b_deg = case_id == 1 ? 0 : (case_id == 2 || case_id == 5) ? 1 : 2;
  const int s_deg = (case_id == 1 || case_id == 5) ? 0 : 1;
  const int h_deg = case_id <= 3 ? 0 : case_id == 4 ? 1 : 2;
  auto zero1 = [](double) { return 0.0; };
  const Fn1 h0 = h.h0 ? h.h0 : Fn1(zero1), h1 = h.h1 ? h.h1 : Fn1(zero1), h2 = h.h2 ? h.h2 : Fn1(zero1);
  if (h_deg < 1 && h.h1) throw Error(ErrorKind::shape_mismatch, "case " + std::to_string(case_id) + ": h must not depend on v");
  if (h_deg < 2 && h.h2)
    throw Error(ErrorKind::shape_mismatch, "case " + std::to_string(case_id) + ": h must be at most linear in v");

  const ABFields ab(strategy, coeffs.rho, probe.t, probe.x, 1e-2, 1e-10);
  double e15 = 0.0, e17 = 0.0, e13 = 0.0;
  for (std::size_t k = 0; k < probe.t.n; ++k) {
    const double t = probe.t.at(k);
    const double H0t = deriv1(h0, h.dh0, t, st.t), H1t = deriv1(h1, h.dh1, t, st.t), H2t = deriv1(h2, h.dh2, t, st.t);
    const double H1 = h1(t), H2 = h2(t);
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double x = probe.x.at(i);
      const VShape bs = v_shape([&](double v) { return coeffs.b(t, v, x); });
      const VShape ss = v_shape([&](double v) { return coeffs.sigma(t, v, x); });
      if (bs.misfit > shape_tol || (b_deg < 2 && std::abs(bs.c2) > shape_tol) || (b_deg < 1 && std::abs(bs.c1) > shape_tol))
        throw Error(ErrorKind::shape_mismatch, "case " + std::to_string(case_id) + ": b has a higher-order dependence on v than allowed");
      if (ss.misfit > shape_tol || std::abs(ss.c2) > shape_tol || (s_deg < 1 && std::abs(ss.c1) > shape_tol))
        throw Error(ErrorKind::shape_mismatch,
                    case_id == 5 ? "case 5: sigma(t,v,x) must be independent of v"
                                 : "case " + std::to_string(case_id) + ": sigma has a higher-order dependence on v than allowed");
      const XTerms q = x_terms(ab, coeffs, t, x, st);
      const double b0 = bs.c0, b1 = bs.c1, b2 = bs.c2, s0 = ss.c0, s1 = ss.c1;
      const double hb = H1 + q.B;
      double I0 = 0, I1 = 0, I2 = 0;
      switch (case_id) {
        case 1:
          I0 = H0t + b0 * q.B + 0.5 * s0 * s0 * q.B * q.B + i0_core(q);
          I1 = i1_core(q);
          I2 = i2_core(q);
          e13 = std::max(e13, std::abs(H0t + i0_core(q)));
          break;
        case 2:
          I0 = H0t + b0 * q.B + 0.5 * s0 * s0 * q.B * q.B + i0_core(q);
          I1 = b1 * q.B + s0 * s1 * q.B * q.B + i1_core(q);
          I2 = i2_core(q) + 0.5 * s1 * s1 * q.B * q.B;
          e13 = std::max(e13, std::abs(H0t + i0_core(q)));
          break;
        case 3: {
          I0 = H0t + b0 * q.B + 0.5 * s0 * s0 * q.B * q.B + i0_core(q);
          I1 = b1 * q.B + s0 * s1 * q.B * q.B + i1_core(q);
          I2 = i2_core(q) + 0.5 * s1 * s1 * q.B * q.B + b2 * q.B;
          const double bt = q.B - ab.B(t, h.case3_lower_limit);
          const double u1 = strategy.u1(t, x);
          e15 = std::max(e15, std::abs(u1 * u1 + s1 * s1 * bt * bt + 2 * b2 * bt));
          if (std::abs(u1) > 1e-12) {
            const double u0 =
                (-q.B_t - q.mu * q.B_x - 0.5 * q.rho * q.rho * q.B_xx - b1 * q.B - s0 * s1 * q.B * q.B) / u1;
            e17 = std::max(e17, std::abs(strategy.u0(t, x) - u0));
          }
          break;
        }
        case 4:
          I0 = H0t + b0 * hb + 0.5 * s0 * s0 * hb * hb + i0_core(q);
          I1 = H1t + b1 * hb + s0 * s1 * hb * hb + i1_core(q);
          I2 = i2_core(q) + 0.5 * s1 * s1 * hb * hb + b2 * hb;
          break;
        case 5:
          I0 = H0t + b0 * hb + 0.5 * s0 * s0 * (2 * H2 + hb * hb) + i0_core(q);
          I1 = H1t + 2 * b0 * H2 + b1 * hb + 2 * s0 * s0 * hb * H2 + i1_core(q);
          I2 = H2t + 2 * b1 * H2 + 2 * s0 * s0 * H2 * H2 + i2_core(q);
          break;
      }
      r.max_I0 = std::max(r.max_I0, std::abs(I0));
      r.max_I1 = std::max(r.max_I1, std::abs(I1));
      r.max_I2 = std::max(r.max_I2, std::abs(I2));
      r.max_u1 = std::max(r.max_u1, std::abs(strategy.u1(t, x)));
    }
  }
  if ((case_id == 1 || case_id == 2) && r.max_u1 > tolerance)
    r.failures.push_back("Case " + std::to_string(case_id) + " forces u1 ≡ 0");
  if (case_id <= 2) r.extra.emplace_back("necessary_condition_u1_zero", e13);
  if (case_id == 3) {
    r.extra.emplace_back("u1_squared_identity", e15);
    r.extra.emplace_back("u0_from_I1", e17);
    if (e15 > tolerance) r.failures.push_back("Case 3 identity for u1^2 violated");
    if (e17 > tolerance) r.failures.push_back("Case 3 u0 does not match the I1 relation");
  }
  if (r.max_I0 > tolerance) r.failures.push_back("I0 residual above tolerance");
  if (r.max_I1 > tolerance) r.failures.push_back("I1 residual above tolerance");
  if (r.max_I2 > tolerance) r.failures.push_back("I2 residual above tolerance");
  r.pass = r.failures.empty();
  return r;
}

namespace {

struct HermiteSeg {
  double value, slope;
};

HermiteSeg hermite(double t0, double t1, double y0, double y1, double m0, double m1, double t) {
  const double h = t1 - t0, s = (t - t0) / h, s2 = s * s, s3 = s2 * s;
  const double v = (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * m0 + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * m1;
  const double d = ((6 * s2 - 6 * s) * y0 + (3 * s2 - 4 * s + 1) * h * m0 + (-6 * s2 + 6 * s) * y1 + (3 * s2 - 2 * s) * h * m1) / h;
  return {v, d};
}

}  // namespace

double RiccatiPath::value(double time) const {
  if (t.size() < 2) return S.empty() ? 0.0 : S.front();
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  i = std::min(i, t.size() - 2);
  return hermite(t[i], t[i + 1], S[i], S[i + 1], rhs(t[i], S[i]), rhs(t[i + 1], S[i + 1]), time).value;
}

double RiccatiPath::derivative(double time) const {
  if (t.size() < 2) return 0.0;
  auto it = std::upper_bound(t.begin(), t.end(), time);
  std::size_t i = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  i = std::min(i, t.size() - 2);
  return hermite(t[i], t[i + 1], S[i], S[i + 1], rhs(t[i], S[i]), rhs(t[i + 1], S[i + 1]), time).slope;
}

void RiccatiPath::require_finite() const {
  if (blow_up) throw Error(ErrorKind::blow_up, "Riccati solution left its range at t = " + std::to_string(blow_up_time));
}

RiccatiPath riccati_solve(const Fn1& f, const Fn1& beta, double s0, const TimeGrid& grid, double forcing,
                          double s_max) {
  if (!(s0 >= 0.0)) throw Error(ErrorKind::invalid_argument, "Riccati start value must be non-negative");
  if (grid.n_steps == 0 || !(grid.t_end > grid.t_start)) throw Error(ErrorKind::invalid_argument, "bad Riccati grid");
  RiccatiPath p;
  p.f = f;
  p.beta = beta;
  p.forcing = forcing;
  p.t.push_back(grid.t_start);
  p.S.push_back(s0);
  double s = s0;
  const double h = grid.dt();
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const double t = grid.t(k);
    const double k1 = p.rhs(t, s);
    const double k2 = p.rhs(t + 0.5 * h, s + 0.5 * h * k1);
    const double k3 = p.rhs(t + 0.5 * h, s + 0.5 * h * k2);
    const double k4 = p.rhs(t + h, s + h * k3);
    s += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    if (!std::isfinite(s) || s < 0.0 || s > s_max) {
      p.blow_up = true;
      p.blow_up_time = grid.t(k + 1);
      break;
    }
    p.t.push_back(grid.t(k + 1));
    p.S.push_back(s);
  }
  return p;
}

LinearReferenceModel linear_reference_model(const Fn1& f, const Fn1& g, const Fn1& k, const Fn1& beta, double s0,
                                            const LinearReferenceOptions& opt) {
  const auto steps = static_cast<std::size_t>(std::llround(opt.horizon / opt.dt));
  LinearReferenceModel m;
  m.S = riccati_solve(f, beta, s0, TimeGrid{0.0, opt.horizon, std::max<std::size_t>(steps, 1)}, opt.forcing);
  m.S.require_finite();
  auto S = std::make_shared<RiccatiPath>(m.S);
  CoefficientSet& c = m.coeffs;
  c.name = "linear";
  c.T = opt.horizon;
  c.b = [f, g, k](double t, double v, double x) { return f(t) * v + g(t) * x + k(t); };
  c.sigma = [](double, double, double) { return 1.0; };
  c.mu = [f, g, k](double t, double x) { return (f(t) + g(t)) * x + k(t); };
  c.rho = [S, beta](double t, double) { return S->value(t) * beta(t); };
  c.g = [](double x) { return x; };
  c.m_star = TerminalLaw::gaussian(0.0, 1.0);
  LinearGaussianSpec spec;
  spec.f = f;
  spec.gx = g;
  spec.k = k;
  spec.m1 = [f, g](double t) { return f(t) + g(t); };
  spec.m0 = k;
  spec.sv = [](double) { return 1.0; };
  spec.sx = [S, beta](double t) { return S->value(t) * beta(t); };
  c.linear = spec;
  m.strategy.u0 = [beta](double t, double x) { return -beta(t) * x; };
  m.strategy.u1 = [beta](double t, double) { return beta(t); };
  m.h.h = [S](double t, double v) {
    // h0 is only known through its derivative; the residual uses h_t, h_v and h_vv.
    return -v * v / (2.0 * S->value(t));
  };
  m.h.h_t = [S, beta](double t, double v) {
    const double s = S->value(t), b = beta(t);
    return 0.5 * b * b * s + 0.5 / s + v * v * S->derivative(t) / (2.0 * s * s);
  };
  m.h.h_v = [S](double t, double v) { return -v / S->value(t); };
  m.h.h_vv = [S](double t, double) { return -1.0 / S->value(t); };
  return m;
}

}  // namespace kyleback
