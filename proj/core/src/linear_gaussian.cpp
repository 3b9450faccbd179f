#include <cmath>
#include <numbers>

#include "kyleback/conditioning.hpp"
#include "kyleback/errors.hpp"

namespace kyleback {

Mat2 Mat2::inverse() const {
  const double dt = det();
  if (dt == 0.0 || !std::isfinite(dt)) throw Error(ErrorKind::singular_covariance, "2x2 matrix is singular");
  return {d / dt, -b / dt, -c / dt, a / dt};
}

double log_gaussian2(const Vec2& r, const Mat2& cov) {
  const double dt = cov.det();
  if (!(dt > 0.0)) throw Error(ErrorKind::singular_covariance, "covariance is not positive definite");
  const Mat2 inv = cov.inverse();
  const Vec2 s = inv * r;
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(dt) - 0.5 * (r.v * s.v + r.x * s.x);
}

namespace {

Mat2 drift_matrix(const LinearGaussianSpec& s, double t) { return {s.f(t), s.gx(t), 0.0, s.m1(t)}; }
Vec2 drift_shift(const LinearGaussianSpec& s, double t) { return {s.k(t), s.m0(t)}; }
Mat2 noise_matrix(const LinearGaussianSpec& s, double t) {
  const double a = s.sv(t), b = s.sx(t);
  return {a * a, 0.0, 0.0, b * b};
}

// Cubic Hermite basis on [0, 1].
struct Hermite {
  double h00, h10, h01, h11, d00, d10, d01, d11;
  explicit Hermite(double s) {
    const double s2 = s * s, s3 = s2 * s;
    h00 = 2 * s3 - 3 * s2 + 1;
    h10 = s3 - 2 * s2 + s;
    h01 = -2 * s3 + 3 * s2;
    h11 = s3 - s2;
    d00 = 6 * s2 - 6 * s;
    d10 = 3 * s2 - 4 * s + 1;
    d01 = -6 * s2 + 6 * s;
    d11 = 3 * s2 - 2 * s;
  }
  double value(double y0, double m0, double y1, double m1, double h) const {
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
  }
  double slope(double y0, double m0, double y1, double m1, double h) const {
    return (d00 * y0 + d10 * h * m0 + d01 * y1 + d11 * h * m1) / h;
  }
};

}  // namespace

GaussianPropagator::Node GaussianPropagator::rhs_node(double t, const Mat2& phi) const {
  Node n;
  n.phi = phi;
  n.dphi = (phi * drift_matrix(spec_, t)) * -1.0;
  const Vec2 c = drift_shift(spec_, t);
  const Vec2 pc = phi * c;
  n.dshift = {-pc.v, -pc.x};
  n.dcov = (phi * noise_matrix(spec_, t) * phi.transpose()) * -1.0;
  return n;
}

GaussianPropagator::GaussianPropagator(const LinearGaussianSpec& spec, double horizon, std::size_t n_intervals)
    : spec_(spec), horizon_(horizon) {
  if (!spec.f || !spec.gx || !spec.k || !spec.m1 || !spec.m0 || !spec.sv || !spec.sx)
    throw Error(ErrorKind::shape_mismatch, "linear-Gaussian spec is incomplete");
  if (!(horizon > 0.0) || n_intervals < 2) throw Error(ErrorKind::invalid_argument, "propagator needs T > 0");
  nodes_.resize(n_intervals + 1);
  const double h = horizon / static_cast<double>(n_intervals);
  Mat2 phi = Mat2::identity(), cov{};
  Vec2 shift{};
  auto node_at = [&](std::size_t j, double t) {
    Node n = rhs_node(t, phi);
    n.cov = cov;
    n.shift = shift;
    nodes_[j] = n;
  };
  node_at(n_intervals, horizon);
  // Backward RK4 in t on (phi, shift, cov); shift and cov derivatives depend on phi only.
  for (std::size_t j = n_intervals; j-- > 0;) {
    const double t1 = horizon * static_cast<double>(j + 1) / static_cast<double>(n_intervals);
    const double t0 = horizon * static_cast<double>(j) / static_cast<double>(n_intervals);
    const double tm = 0.5 * (t0 + t1);
    const Node k1 = rhs_node(t1, phi);
    const Node k2 = rhs_node(tm, phi + k1.dphi * (-0.5 * h));
    const Node k3 = rhs_node(tm, phi + k2.dphi * (-0.5 * h));
    const Node k4 = rhs_node(t0, phi + k3.dphi * (-h));
    auto comb = [h](const Mat2& a, const Mat2& b, const Mat2& c, const Mat2& d) {
      return (a + b * 2.0 + c * 2.0 + d) * (-h / 6.0);
    };
    phi = phi + comb(k1.dphi, k2.dphi, k3.dphi, k4.dphi);
    cov = cov + comb(k1.dcov, k2.dcov, k3.dcov, k4.dcov);
    shift.v += -h / 6.0 * (k1.dshift.v + 2 * k2.dshift.v + 2 * k3.dshift.v + k4.dshift.v);
    shift.x += -h / 6.0 * (k1.dshift.x + 2 * k2.dshift.x + 2 * k3.dshift.x + k4.dshift.x);
    node_at(j, t0);
  }
}

GaussianPropagator::State GaussianPropagator::at(double t) const {
  const std::size_t n = nodes_.size() - 1;
  const double h = horizon_ / static_cast<double>(n);
  double s = t / h;
  std::size_t j = s <= 0.0 ? 0 : static_cast<std::size_t>(s);
  if (j >= n) j = n - 1;
  s -= static_cast<double>(j);
  const Node& a = nodes_[j];
  const Node& b = nodes_[j + 1];
  const Hermite hb(s);
  auto mat = [&](const Mat2& y0, const Mat2& m0, const Mat2& y1, const Mat2& m1, bool slope) {
    auto f = [&](double p, double q, double r, double u) { return slope ? hb.slope(p, q, r, u, h) : hb.value(p, q, r, u, h); };
    return Mat2{f(y0.a, m0.a, y1.a, m1.a), f(y0.b, m0.b, y1.b, m1.b), f(y0.c, m0.c, y1.c, m1.c),
                f(y0.d, m0.d, y1.d, m1.d)};
  };
  State st;
  st.phi = mat(a.phi, a.dphi, b.phi, b.dphi, false);
  st.dphi = mat(a.phi, a.dphi, b.phi, b.dphi, true);
  st.cov = mat(a.cov, a.dcov, b.cov, b.dcov, false);
  st.dcov = mat(a.cov, a.dcov, b.cov, b.dcov, true);
  st.shift = {hb.value(a.shift.v, a.dshift.v, b.shift.v, b.dshift.v, h),
              hb.value(a.shift.x, a.dshift.x, b.shift.x, b.dshift.x, h)};
  st.dshift = {hb.slope(a.shift.v, a.dshift.v, b.shift.v, b.dshift.v, h),
               hb.slope(a.shift.x, a.dshift.x, b.shift.x, b.dshift.x, h)};
  return st;
}

void GaussianPropagator::forward_moments(double s, const Vec2& z, double t, Vec2& mean, Mat2& cov) const {
  if (!(t > s)) throw Error(ErrorKind::invalid_argument, "forward moments need t > s");
  const auto steps = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil((t - s) / 1e-3)));
  const double h = (t - s) / static_cast<double>(steps);
  mean = z;
  cov = Mat2{};
  auto dm = [&](double u, const Vec2& m) {
    const Vec2 am = drift_matrix(spec_, u) * m;
    const Vec2 c = drift_shift(spec_, u);
    return Vec2{am.v + c.v, am.x + c.x};
  };
  auto dp = [&](double u, const Mat2& p) {
    const Mat2 a = drift_matrix(spec_, u);
    return a * p + p * a.transpose() + noise_matrix(spec_, u);
  };
  for (std::size_t i = 0; i < steps; ++i) {
    const double u = s + static_cast<double>(i) * h;
    const Vec2 k1 = dm(u, mean);
    const Vec2 k2 = dm(u + 0.5 * h, {mean.v + 0.5 * h * k1.v, mean.x + 0.5 * h * k1.x});
    const Vec2 k3 = dm(u + 0.5 * h, {mean.v + 0.5 * h * k2.v, mean.x + 0.5 * h * k2.x});
    const Vec2 k4 = dm(u + h, {mean.v + h * k3.v, mean.x + h * k3.x});
    const Mat2 p1 = dp(u, cov);
    const Mat2 p2 = dp(u + 0.5 * h, cov + p1 * (0.5 * h));
    const Mat2 p3 = dp(u + 0.5 * h, cov + p2 * (0.5 * h));
    const Mat2 p4 = dp(u + h, cov + p3 * h);
    mean.v += h / 6.0 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v);
    mean.x += h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x);
    cov = cov + (p1 + p2 * 2.0 + p3 * 2.0 + p4) * (h / 6.0);
  }
}

LinearGaussianDensity::LinearGaussianDensity(const LinearGaussianSpec& spec, double horizon)
    : spec_(spec),
      propagator_(std::make_shared<GaussianPropagator>(spec, horizon)),
      homogeneous_(spec.time_homogeneous) {}

double LinearGaussianDensity::density(double s, const Vec2& z, double t, const Vec2& y) const {
  Vec2 mean;
  Mat2 cov;
  propagator_->forward_moments(s, z, t, mean, cov);
  if (!(cov.det() >= 1e-14)) throw Error(ErrorKind::singular_covariance, "transition covariance is degenerate");
  return std::exp(log_gaussian2({y.v - mean.v, y.x - mean.x}, cov));
}

double gaussian_density(const LinearGaussianSpec& spec, double horizon, double s, const Vec2& z, double t,
                        const Vec2& y) {
  if (!(t > s)) throw Error(ErrorKind::invalid_argument, "gaussian density needs t > s");
  const GaussianPropagator prop(spec, std::max(horizon, t), 2);
  Vec2 mean;
  Mat2 cov;
  prop.forward_moments(s, z, t, mean, cov);
  if (!(cov.det() >= 1e-14)) throw Error(ErrorKind::singular_covariance, "transition covariance is degenerate");
  return std::exp(log_gaussian2({y.v - mean.v, y.x - mean.x}, cov));
}

}  // namespace kyleback
