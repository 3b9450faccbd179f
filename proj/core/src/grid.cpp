#include "kyleback/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kyleback/errors.hpp"

namespace kyleback {

void TimeGrid::validate(double horizon) const {
  if (n_steps == 0) throw Error(ErrorKind::invalid_argument, "time grid needs n_steps > 0");
  if (!(t_end > t_start)) throw Error(ErrorKind::invalid_argument, "time grid needs t_end > t_start");
  if (t_end > horizon * (1.0 + 1e-14))
    throw Error(ErrorKind::invalid_argument, "time grid ends after the horizon");
}

TimeGrid TimeGrid::bridge(double horizon, double delta, std::size_t n_steps) {
  if (!(delta > 0.0) || !(delta < horizon / 10.0))
    throw Error(ErrorKind::invalid_argument, "time guard delta must lie in (0, T/10)");
  TimeGrid grid{0.0, horizon - delta, n_steps};
  grid.validate(horizon);
  return grid;
}

std::pair<std::size_t, double> Axis::locate(double x) const noexcept {
  if (x <= lo) return {0, 0.0};
  if (x >= hi) return {n - 2, 1.0};
  const double s = (x - lo) / h();
  auto i = static_cast<std::size_t>(s);
  if (i > n - 2) i = n - 2;
  return {i, s - static_cast<double>(i)};
}

void Axis::validate(const char* name) const {
  if (n < 2 || !(hi > lo)) throw Error(ErrorKind::invalid_argument, std::string("axis ") + name + " is degenerate");
}

Axis Axis::with_step(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw Error(ErrorKind::invalid_argument, "axis needs hi > lo and step > 0");
  const auto cells = static_cast<std::size_t>(std::llround((hi - lo) / step));
  return Axis{lo, lo + static_cast<double>(cells) * step, cells + 1};
}

void ProbeGrid::validate() const {
  t.validate("t");
  v.validate("v");
  x.validate("x");
}

namespace {

// Derivative along a strided line of n values with spacing h.
template <class Get, class Put>
void line_derivative(std::size_t n, double h, Get get, Put put) {
  if (n < 3) {
    const double d = (get(1) - get(0)) / h;
    put(0, d);
    put(1, d);
    return;
  }
  put(0, (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h));
  for (std::size_t i = 1; i + 1 < n; ++i) put(i, (get(i + 1) - get(i - 1)) / (2.0 * h));
  put(n - 1, (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h));
}

template <class Get, class Put>
void line_second_derivative(std::size_t n, double h, Get get, Put put) {
  const double h2 = h * h;
  for (std::size_t i = 1; i + 1 < n; ++i) put(i, (get(i + 1) - 2.0 * get(i) + get(i - 1)) / h2);
  if (n >= 4) {
    put(0, (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / h2);
    put(n - 1, (2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3) - get(n - 4)) / h2);
  } else {
    put(0, n >= 3 ? (get(2) - 2.0 * get(1) + get(0)) / h2 : 0.0);
    put(n - 1, n >= 3 ? (get(n - 1) - 2.0 * get(n - 2) + get(n - 3)) / h2 : 0.0);
  }
}

}  // namespace

FieldTX::FieldTX(Axis t, Axis x, double fill) : t_(t), x_(x), data_(t.n * x.n, fill) {
  t_.validate("t");
  x_.validate("x");
}

double FieldTX::operator()(double t, double x) const noexcept {
  const auto [k, a] = t_.locate(t);
  const auto [i, b] = x_.locate(x);
  const double v00 = at(k, i), v01 = at(k, i + 1), v10 = at(k + 1, i), v11 = at(k + 1, i + 1);
  return (1 - a) * ((1 - b) * v00 + b * v01) + a * ((1 - b) * v10 + b * v11);
}

FieldTX FieldTX::d_dx() const {
  FieldTX out(t_, x_);
  for (std::size_t k = 0; k < t_.n; ++k)
    line_derivative(
        x_.n, x_.h(), [&](std::size_t i) { return at(k, i); }, [&](std::size_t i, double d) { out.at(k, i) = d; });
  return out;
}

FieldTX FieldTX::d_dxx() const {
  FieldTX out(t_, x_);
  for (std::size_t k = 0; k < t_.n; ++k)
    line_second_derivative(
        x_.n, x_.h(), [&](std::size_t i) { return at(k, i); }, [&](std::size_t i, double d) { out.at(k, i) = d; });
  return out;
}

FieldTX FieldTX::d_dt() const {
  FieldTX out(t_, x_);
  for (std::size_t i = 0; i < x_.n; ++i)
    line_derivative(
        t_.n, t_.h(), [&](std::size_t k) { return at(k, i); }, [&](std::size_t k, double d) { out.at(k, i) = d; });
  return out;
}

bool FieldTX::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

FieldTVX::FieldTVX(Axis t, Axis v, Axis x, double fill) : t_(t), v_(v), x_(x), data_(t.n * v.n * x.n, fill) {
  t_.validate("t");
  v_.validate("v");
  x_.validate("x");
}

double FieldTVX::operator()(double t, double v, double x) const noexcept {
  const auto [k, a] = t_.locate(t);
  const auto [j, b] = v_.locate(v);
  const auto [i, c] = x_.locate(x);
  auto plane = [&](std::size_t kk) {
    const double v00 = at(kk, j, i), v01 = at(kk, j, i + 1), v10 = at(kk, j + 1, i), v11 = at(kk, j + 1, i + 1);
    return (1 - b) * ((1 - c) * v00 + c * v01) + b * ((1 - c) * v10 + c * v11);
  };
  return (1 - a) * plane(k) + a * plane(k + 1);
}

FieldTVX FieldTVX::d_dv() const {
  FieldTVX out(t_, v_, x_);
  for (std::size_t k = 0; k < t_.n; ++k)
    for (std::size_t i = 0; i < x_.n; ++i)
      line_derivative(
          v_.n, v_.h(), [&](std::size_t j) { return at(k, j, i); },
          [&](std::size_t j, double d) { out.at(k, j, i) = d; });
  return out;
}

FieldTVX FieldTVX::d_dvv() const {
  FieldTVX out(t_, v_, x_);
  for (std::size_t k = 0; k < t_.n; ++k)
    for (std::size_t i = 0; i < x_.n; ++i)
      line_second_derivative(
          v_.n, v_.h(), [&](std::size_t j) { return at(k, j, i); },
          [&](std::size_t j, double d) { out.at(k, j, i) = d; });
  return out;
}

FieldTVX FieldTVX::d_dx() const {
  FieldTVX out(t_, v_, x_);
  for (std::size_t k = 0; k < t_.n; ++k)
    for (std::size_t j = 0; j < v_.n; ++j)
      line_derivative(
          x_.n, x_.h(), [&](std::size_t i) { return at(k, j, i); },
          [&](std::size_t i, double d) { out.at(k, j, i) = d; });
  return out;
}

FieldTVX FieldTVX::d_dt() const {
  FieldTVX out(t_, v_, x_);
  for (std::size_t j = 0; j < v_.n; ++j)
    for (std::size_t i = 0; i < x_.n; ++i)
      line_derivative(
          t_.n, t_.h(), [&](std::size_t k) { return at(k, j, i); },
          [&](std::size_t k, double d) { out.at(k, j, i) = d; });
  return out;
}

bool FieldTVX::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                       std::vector<double>& rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) {
    const double m = lower[i] / diag[i - 1];
    diag[i] -= m * upper[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

}  // namespace kyleback
