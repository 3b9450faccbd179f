#include "kyleback/density_fd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kyleback/errors.hpp"
#include "kyleback/stats.hpp"

namespace kyleback {

namespace {

// One implicit sweep (I - c dt L) u = rhs along a line with zero boundary values, for the
// conservative operator L u = -(a u)' + (d u)'' / 2 with node values a (drift) and d (variance).
void implicit_line(std::size_t n, double h, double c_dt, const double* a, const double* d, double* rhs,
                   std::vector<double>& lo, std::vector<double>& di, std::vector<double>& up, std::vector<double>& r) {
  lo.assign(n - 2, 0.0);
  di.assign(n - 2, 0.0);
  up.assign(n - 2, 0.0);
  r.assign(n - 2, 0.0);
  const double ih = 1.0 / (2.0 * h), ih2 = 1.0 / (2.0 * h * h);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const std::size_t q = j - 1;
    // L coefficients acting on u_{j-1}, u_j, u_{j+1}.
    const double cm = a[j - 1] * ih + d[j - 1] * ih2;
    const double c0 = -2.0 * d[j] * ih2;
    const double cp = -a[j + 1] * ih + d[j + 1] * ih2;
    lo[q] = -c_dt * cm;
    di[q] = 1.0 - c_dt * c0;
    up[q] = -c_dt * cp;
    r[q] = rhs[j];
  }
  solve_tridiagonal(lo, di, up, r);
  rhs[0] = 0.0;
  rhs[n - 1] = 0.0;
  for (std::size_t j = 1; j + 1 < n; ++j) rhs[j] = r[j - 1];
}

// L u along a strided line, zero at the boundary nodes.
template <class Get>
double apply_line(std::size_t j, std::size_t n, double h, Get u, const double* a, const double* d) {
  if (j == 0 || j + 1 == n) return 0.0;
  return -(a[j + 1] * u(j + 1) - a[j - 1] * u(j - 1)) / (2.0 * h) +
         (d[j + 1] * u(j + 1) - 2.0 * d[j] * u(j) + d[j - 1] * u(j - 1)) / (2.0 * h * h);
}

}  // namespace

FokkerPlanckDensity::FokkerPlanckDensity(const CoefficientSet& coeffs, const FokkerPlanckConfig& cfg)
    : v_(cfg.v), x_(cfg.x), horizon_(coeffs.T), z0_{coeffs.v0, coeffs.x0},
      homogeneous_(coeffs.linear ? coeffs.linear->time_homogeneous : false) {
  coeffs.check_complete();
  v_.validate("v");
  x_.validate("x");
  if (cfg.n_steps == 0) throw Error(ErrorKind::invalid_argument, "Fokker-Planck solve needs n_steps > 0");
  if (!v_.contains(z0_.v) || !x_.contains(z0_.x))
    throw Error(ErrorKind::out_of_domain, "start point lies outside the Fokker-Planck domain");
  const std::size_t nv = v_.n, nx = x_.n;
  const double hv = v_.h(), hx = x_.h();
  b0_ = coeffs.b(0.0, z0_.v, z0_.x);
  m0_ = coeffs.mu(0.0, z0_.x);
  s0_ = coeffs.sigma(0.0, z0_.v, z0_.x);
  r0_ = coeffs.rho(0.0, z0_.x);
  const double smin = std::min(std::abs(s0_), std::abs(r0_));
  if (!(smin > 0.0)) throw Error(ErrorKind::assumption_violated, "diffusion vanishes at the start point");
  t_init_ = std::min(0.25 * horizon_, std::pow(3.0 * std::max(hv, hx) / smin, 2));
  const double dt = (horizon_ - t_init_) / static_cast<double>(cfg.n_steps);
  if (cfg.explicit_scheme) {
    double dmax = 0.0;
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double s = coeffs.sigma(0.0, v_.at(j), x_.at(i)), r = coeffs.rho(0.0, x_.at(i));
        dmax = std::max(dmax, s * s / (hv * hv) + r * r / (hx * hx));
      }
    if (dt * dmax > 1.0)
      throw Error(ErrorKind::configuration, "explicit Fokker-Planck step violates the stability bound");
  }

  std::vector<double> p(nv * nx, 0.0);
  double mass0 = 0.0;
  for (std::size_t j = 0; j < nv; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double val = short_time(t_init_, v_.at(j), x_.at(i));
      p[j * nx + i] = (j == 0 || i == 0 || j + 1 == nv || i + 1 == nx) ? 0.0 : val;
      mass0 += p[j * nx + i];
    }
  for (double& val : p) val /= mass0 * hv * hx;

  std::vector<std::size_t> store_steps;
  const std::size_t n_store = std::max<std::size_t>(1, std::min(cfg.n_stored, cfg.n_steps));
  for (std::size_t s = 0; s <= n_store; ++s) store_steps.push_back(s * cfg.n_steps / n_store);
  store_steps.erase(std::unique(store_steps.begin(), store_steps.end()), store_steps.end());
  std::size_t next_store = 0;
  auto maybe_store = [&](std::size_t step) {
    if (next_store < store_steps.size() && store_steps[next_store] == step) {
      times_.push_back(step == cfg.n_steps ? horizon_ : t_init_ + static_cast<double>(step) * dt);
      slices_.push_back(p);
      ++next_store;
    }
  };
  maybe_store(0);

  std::vector<double> av(nv * nx), dv(nv * nx), ax(nv * nx), dx(nv * nx), y0(nv * nx), lv(nv * nx), lx(nv * nx);
  std::vector<double> line_a, line_d, line_u, lo, di, up, r;
  for (std::size_t step = 0; step < cfg.n_steps; ++step) {
    const double t = t_init_ + (static_cast<double>(step) + 0.5) * dt;
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double v = v_.at(j), x = x_.at(i);
        const double s = coeffs.sigma(t, v, x), rr = coeffs.rho(t, x);
        av[j * nx + i] = coeffs.b(t, v, x);
        dv[j * nx + i] = s * s;
        ax[j * nx + i] = coeffs.mu(t, x);
        dx[j * nx + i] = rr * rr;
      }
    // Explicit operator pieces.
    line_a.resize(nv);
    line_d.resize(nv);
    for (std::size_t i = 0; i < nx; ++i) {
      for (std::size_t j = 0; j < nv; ++j) {
        line_a[j] = av[j * nx + i];
        line_d[j] = dv[j * nx + i];
      }
      for (std::size_t j = 0; j < nv; ++j)
        lv[j * nx + i] =
            apply_line(j, nv, hv, [&](std::size_t q) { return p[q * nx + i]; }, line_a.data(), line_d.data());
    }
    for (std::size_t j = 0; j < nv; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        lx[j * nx + i] = apply_line(
            i, nx, hx, [&](std::size_t q) { return p[j * nx + q]; }, ax.data() + j * nx, dx.data() + j * nx);
    if (cfg.explicit_scheme) {
      for (std::size_t q = 0; q < p.size(); ++q) p[q] += dt * (lv[q] + lx[q]);
    } else {
      for (std::size_t q = 0; q < p.size(); ++q) y0[q] = p[q] + dt * (lv[q] + lx[q]) - 0.5 * dt * lv[q];
      line_u.resize(nv);
      for (std::size_t i = 0; i < nx; ++i) {
        for (std::size_t j = 0; j < nv; ++j) {
          line_a[j] = av[j * nx + i];
          line_d[j] = dv[j * nx + i];
          line_u[j] = y0[j * nx + i];
        }
        implicit_line(nv, hv, 0.5 * dt, line_a.data(), line_d.data(), line_u.data(), lo, di, up, r);
        for (std::size_t j = 0; j < nv; ++j) y0[j * nx + i] = line_u[j];
      }
      for (std::size_t j = 0; j < nv; ++j) {
        double* row = y0.data() + j * nx;
        for (std::size_t i = 0; i < nx; ++i) row[i] -= 0.5 * dt * lx[j * nx + i];
        implicit_line(nx, hx, 0.5 * dt, ax.data() + j * nx, dx.data() + j * nx, row, lo, di, up, r);
      }
      p.swap(y0);
    }
    for (std::size_t q = 0; q < p.size(); ++q)
      if (!std::isfinite(p[q]))
        throw Error(ErrorKind::solver_diverged, "Fokker-Planck solution is not finite at t = " + std::to_string(t));
    maybe_store(step + 1);
  }
}

double FokkerPlanckDensity::short_time(double t, double v, double x) const {
  const double mv = z0_.v + b0_ * t, mx = z0_.x + m0_ * t;
  const double sv2 = s0_ * s0_ * t, sx2 = r0_ * r0_ * t;
  return std::exp(-0.5 * (v - mv) * (v - mv) / sv2 - 0.5 * (x - mx) * (x - mx) / sx2) /
         (2.0 * std::numbers::pi * std::sqrt(sv2 * sx2));
}

double FokkerPlanckDensity::at_slice(std::size_t s, double v, double x) const {
  if (!v_.contains(v) || !x_.contains(x)) return 0.0;
  const auto [j, a] = v_.locate(v);
  const auto [i, b] = x_.locate(x);
  const auto& p = slices_[s];
  const std::size_t nx = x_.n;
  return (1 - a) * ((1 - b) * p[j * nx + i] + b * p[j * nx + i + 1]) +
         a * ((1 - b) * p[(j + 1) * nx + i] + b * p[(j + 1) * nx + i + 1]);
}

double FokkerPlanckDensity::density(double s, const Vec2& z, double t, const Vec2& y) const {
  const bool at_start = std::abs(z.v - z0_.v) < 1e-12 && std::abs(z.x - z0_.x) < 1e-12;
  if (!at_start || (s != 0.0 && !homogeneous_))
    throw Error(ErrorKind::configuration, "Fokker-Planck backend only serves transitions from the start point");
  const double tau = t - s;
  if (!(tau > 0.0) || tau > horizon_ * (1.0 + 1e-12))
    throw Error(ErrorKind::out_of_domain, "Fokker-Planck density requested outside (0, T]");
  if (tau < t_init_) return v_.contains(y.v) && x_.contains(y.x) ? short_time(tau, y.v, y.x) : 0.0;
  const auto it = std::lower_bound(times_.begin(), times_.end(), tau);
  if (it == times_.end()) return at_slice(times_.size() - 1, y.v, y.x);
  const auto hi = static_cast<std::size_t>(it - times_.begin());
  if (hi == 0 || *it == tau) return at_slice(hi, y.v, y.x);
  const double w = (tau - times_[hi - 1]) / (times_[hi] - times_[hi - 1]);
  return (1 - w) * at_slice(hi - 1, y.v, y.x) + w * at_slice(hi, y.v, y.x);
}

double FokkerPlanckDensity::mass(std::size_t slice) const {
  double acc = 0.0;
  for (double val : slices_.at(slice)) acc += val;
  return acc * v_.h() * x_.h();
}

std::unique_ptr<FokkerPlanckDensity> estimate_density_fd(const CoefficientSet& coeffs,
                                                         const FokkerPlanckConfig& config) {
  return std::make_unique<FokkerPlanckDensity>(coeffs, config);
}

KernelDensity::KernelDensity(const CoefficientSet& coeffs, std::size_t n_paths, std::size_t n_steps,
                             std::size_t n_snapshots, std::uint64_t seed, double bandwidth_scale)
    : horizon_(coeffs.T), z0_{coeffs.v0, coeffs.x0} {
  if (n_snapshots == 0 || n_steps % n_snapshots != 0)
    throw Error(ErrorKind::invalid_argument, "snapshot count must divide the step count");
  EngineOptions opt;
  opt.seed = seed;
  opt.n_paths = n_paths;
  opt.record_stride = n_steps / n_snapshots;
  const TimeGrid grid{0.0, coeffs.T, n_steps};
  const auto paths = collect_paths(coeffs, ControlLaw::zero(), grid, opt);
  const std::size_t n_rec = paths.front().size();
  for (std::size_t r = 1; r < n_rec; ++r) {
    times_.push_back(paths.front().t[r]);
    std::vector<Vec2> cloud;
    std::vector<double> vs, xs;
    cloud.reserve(paths.size());
    for (const auto& p : paths) {
      cloud.push_back({p.V[r], p.X[r]});
      vs.push_back(p.V[r]);
      xs.push_back(p.X[r]);
    }
    // Silverman's rule for a product Gaussian kernel in two dimensions.
    const double factor = bandwidth_scale * std::pow(static_cast<double>(paths.size()), -1.0 / 6.0);
    bandwidths_.push_back({factor * mean_estimate(vs).std_dev, factor * mean_estimate(xs).std_dev});
    clouds_.push_back(std::move(cloud));
  }
}

double KernelDensity::at_snapshot(std::size_t s, const Vec2& y) const {
  const auto& cloud = clouds_[s];
  const Vec2 h = bandwidths_[s];
  double acc = 0.0;
  for (const auto& z : cloud) {
    const double a = (y.v - z.v) / h.v, b = (y.x - z.x) / h.x;
    acc += std::exp(-0.5 * (a * a + b * b));
  }
  return acc / (static_cast<double>(cloud.size()) * 2.0 * std::numbers::pi * h.v * h.x);
}

double KernelDensity::density(double s, const Vec2& z, double t, const Vec2& y) const {
  if (s != 0.0 || std::abs(z.v - z0_.v) > 1e-12 || std::abs(z.x - z0_.x) > 1e-12)
    throw Error(ErrorKind::configuration, "kernel backend only serves transitions from the start point");
  const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-12);
  if (it == times_.end()) throw Error(ErrorKind::out_of_domain, "kernel density requested beyond the horizon");
  const auto hi = static_cast<std::size_t>(it - times_.begin());
  if (hi == 0 || std::abs(*it - t) < 1e-12) return at_snapshot(hi, y);
  const double w = (t - times_[hi - 1]) / (times_[hi] - times_[hi - 1]);
  return (1 - w) * at_snapshot(hi - 1, y) + w * at_snapshot(hi, y);
}

}  // namespace kyleback
