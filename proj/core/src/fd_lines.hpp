#pragma once

// Line operators shared by the backward finite-difference solvers.

#include <cstddef>
#include <functional>
#include <vector>

namespace kyleback::detail {

enum class EdgeRule { linear_extrapolation, neumann_zero };

// Central differences of a coefficient c(t, x); one-sided in t near the ends of [0, horizon].
inline constexpr double kCoefStep = 1e-4;
inline constexpr double kCoefStep2 = 1e-3;

inline double coef_dt(const std::function<double(double, double)>& f, double t, double x, double horizon) {
  const double h = kCoefStep;
  if (t - h < 0.0) return (-3 * f(t, x) + 4 * f(t + h, x) - f(t + 2 * h, x)) / (2 * h);
  if (t + h > horizon) return (3 * f(t, x) - 4 * f(t - h, x) + f(t - 2 * h, x)) / (2 * h);
  return (f(t + h, x) - f(t - h, x)) / (2 * h);
}
inline double coef_dx(const std::function<double(double, double)>& f, double t, double x) {
  return (f(t, x + kCoefStep) - f(t, x - kCoefStep)) / (2 * kCoefStep);
}
inline double coef_dxx(const std::function<double(double, double)>& f, double t, double x) {
  const double h = kCoefStep2;
  return (f(t, x + h) - 2 * f(t, x) + f(t, x - h)) / (h * h);
}

struct LineWork {
  std::vector<double> lo, di, up, r;
};

// L u = a u' + d u'' + c u at interior node j (central differences); 0 at the edges.
inline double apply_at(std::size_t j, std::size_t n, double h, const double* u, std::size_t stride, double a, double d,
                       double c) {
  if (j == 0 || j + 1 == n) return 0.0;
  const double um = u[(j - 1) * stride], u0 = u[j * stride], up = u[(j + 1) * stride];
  return a * (up - um) / (2 * h) + d * (up - 2 * u0 + um) / (h * h) + c * u0;
}

// Fills the edge values of a line from its interior.
inline void close_edges(std::size_t n, double* u, std::size_t stride, EdgeRule rule) {
  if (rule == EdgeRule::linear_extrapolation) {
    u[0] = 2 * u[stride] - u[2 * stride];
    u[(n - 1) * stride] = 2 * u[(n - 2) * stride] - u[(n - 3) * stride];
  } else {
    u[0] = u[stride];
    u[(n - 1) * stride] = u[(n - 2) * stride];
  }
}

// Solves (I - k L) w = u in place along a strided line, with L as in apply_at and the edge
// rule eliminated into the first and last interior rows. c may be null.
void implicit_solve(std::size_t n, double h, double k, const double* a, const double* d, const double* c,
                    std::size_t coeff_stride, double* u, std::size_t stride, EdgeRule rule, LineWork& w);

// Coefficients of a backward equation u_t + a u' + d u'' + c u + s = 0 along one line.
struct LineCoefficients {
  std::vector<double> a, d, c, s;
  void resize(std::size_t n) {
    a.assign(n, 0.0);
    d.assign(n, 0.0);
    c.assign(n, 0.0);
    s.assign(n, 0.0);
  }
};

// Theta step from next (time t + dt) to out (time t); theta = 1/2 is Crank-Nicolson,
// theta = 1 implicit Euler.
void theta_step(std::size_t n, double h, double dt, double theta, const LineCoefficients& now,
                const LineCoefficients& later, const double* next, double* out, EdgeRule rule, LineWork& w);

// Coefficients of a backward equation u_t + Lv u + Lx u = 0 on an nv x nx grid (row-major,
// x fastest), each L of the apply_at form without the reaction term.
struct PlaneCoefficients {
  std::vector<double> av, dv, ax, dx;
  void resize(std::size_t n) {
    av.assign(n, 0.0);
    dv.assign(n, 0.0);
    ax.assign(n, 0.0);
    dx.assign(n, 0.0);
  }
};

struct PlaneWork {
  std::vector<double> lv, lx, y;
  LineWork line;
};

// One Douglas ADI step (theta = 1/2) from next (time t + dt) to out (time t).
void douglas_step(std::size_t nv, std::size_t nx, double hv, double hx, double dt, const PlaneCoefficients& c,
                  const double* next, double* out, EdgeRule rule, PlaneWork& w);

}  // namespace kyleback::detail
