#include "fd_lines.hpp"

#include "kyleback/errors.hpp"
#include "kyleback/grid.hpp"

namespace kyleback::detail {

void implicit_solve(std::size_t n, double h, double k, const double* a, const double* d, const double* c,
                    std::size_t cs, double* u, std::size_t stride, EdgeRule rule, LineWork& w) {
  if (n < 4) throw Error(ErrorKind::invalid_argument, "finite-difference line needs at least 4 nodes");
  const std::size_t m = n - 2;
  w.lo.assign(m, 0.0);
  w.di.assign(m, 0.0);
  w.up.assign(m, 0.0);
  w.r.assign(m, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const double aj = a[j * cs], dj = d[j * cs], cj = c ? c[j * cs] : 0.0;
    const double cm = -aj / (2 * h) + dj / (h * h);
    const double c0 = -2 * dj / (h * h) + cj;
    const double cp = aj / (2 * h) + dj / (h * h);
    w.lo[j - 1] = -k * cm;
    w.di[j - 1] = 1.0 - k * c0;
    w.up[j - 1] = -k * cp;
    w.r[j - 1] = u[j * stride];
  }
  if (rule == EdgeRule::linear_extrapolation) {
    w.di[0] += 2.0 * w.lo[0];
    w.up[0] -= w.lo[0];
    w.di[m - 1] += 2.0 * w.up[m - 1];
    w.lo[m - 1] -= w.up[m - 1];
  } else {
    w.di[0] += w.lo[0];
    w.di[m - 1] += w.up[m - 1];
  }
  solve_tridiagonal(w.lo, w.di, w.up, w.r);
  for (std::size_t j = 1; j + 1 < n; ++j) u[j * stride] = w.r[j - 1];
  close_edges(n, u, stride, rule);
}

void theta_step(std::size_t n, double h, double dt, double theta, const LineCoefficients& now,
                const LineCoefficients& later, const double* next, double* out, EdgeRule rule, LineWork& w) {
  for (std::size_t j = 0; j < n; ++j) {
    const double explicit_part =
        apply_at(j, n, h, next, 1, later.a[j], later.d[j], later.c[j]) + later.s[j];
    out[j] = next[j] + dt * ((1.0 - theta) * explicit_part + theta * now.s[j]);
  }
  implicit_solve(n, h, theta * dt, now.a.data(), now.d.data(), now.c.data(), 1, out, 1, rule, w);
}

void douglas_step(std::size_t nv, std::size_t nx, double hv, double hx, double dt, const PlaneCoefficients& c,
                  const double* next, double* out, EdgeRule rule, PlaneWork& w) {
  const std::size_t n = nv * nx;
  w.lv.resize(n);
  w.lx.resize(n);
  w.y.resize(n);
  for (std::size_t j = 0; j < nv; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t q = j * nx + i;
      w.lv[q] = apply_at(j, nv, hv, next + i, nx, c.av[q], c.dv[q], 0.0);
      w.lx[q] = apply_at(i, nx, hx, next + j * nx, 1, c.ax[q], c.dx[q], 0.0);
      w.y[q] = next[q] + dt * (0.5 * w.lv[q] + w.lx[q]);
    }
  for (std::size_t i = 0; i < nx; ++i) {
    implicit_solve(nv, hv, 0.5 * dt, c.av.data() + i, c.dv.data() + i, nullptr, nx, w.y.data() + i, nx, rule, w.line);
    for (std::size_t j = 0; j < nv; ++j) w.y[j * nx + i] -= 0.5 * dt * w.lx[j * nx + i];
  }
  for (std::size_t j = 0; j < nv; ++j) {
    double* row = w.y.data() + j * nx;
    implicit_solve(nx, hx, 0.5 * dt, c.ax.data() + j * nx, c.dx.data() + j * nx, nullptr, 1, row, 1, rule, w.line);
    for (std::size_t i = 0; i < nx; ++i) out[j * nx + i] = row[i];
  }
}

}  // namespace kyleback::detail
