#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace kyleback {

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  std::size_t n_steps = 1;

  double dt() const noexcept { return (t_end - t_start) / static_cast<double>(n_steps); }
  double t(std::size_t k) const noexcept {
    return k == n_steps ? t_end : t_start + static_cast<double>(k) * dt();
  }
  // Throws invalid-argument unless n_steps > 0, t_end > t_start and t_end <= horizon.
  void validate(double horizon) const;

  // Uniform grid on [0, T - delta], the guard used by every bridge run.
  static TimeGrid bridge(double horizon, double delta, std::size_t n_steps);
};

// Uniform axis with n nodes on [lo, hi].
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t n = 2;

  double h() const noexcept { return (hi - lo) / static_cast<double>(n - 1); }
  double at(std::size_t i) const noexcept { return i + 1 == n ? hi : lo + static_cast<double>(i) * h(); }
  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
  // Cell index and fractional offset for interpolation; clamps outside the axis.
  std::pair<std::size_t, double> locate(double x) const noexcept;
  void validate(const char* name) const;

  static Axis with_step(double lo, double hi, double step);
};

// Scalar field on a (t, x) tensor grid, bilinear interpolation, node values exact.
class FieldTX {
 public:
  FieldTX() = default;
  FieldTX(Axis t, Axis x, double fill = 0.0);

  const Axis& t_axis() const noexcept { return t_; }
  const Axis& x_axis() const noexcept { return x_; }

  double& at(std::size_t k, std::size_t i) noexcept { return data_[k * x_.n + i]; }
  double at(std::size_t k, std::size_t i) const noexcept { return data_[k * x_.n + i]; }
  double* slice(std::size_t k) noexcept { return data_.data() + k * x_.n; }
  const double* slice(std::size_t k) const noexcept { return data_.data() + k * x_.n; }

  double operator()(double t, double x) const noexcept;
  bool covers(double t, double x) const noexcept { return t_.contains(t) && x_.contains(x); }

  // Node-wise derivative fields: second-order central inside, one-sided at the ends.
  FieldTX d_dx() const;
  FieldTX d_dxx() const;
  FieldTX d_dt() const;

  bool all_finite() const noexcept;
  const std::vector<double>& values() const noexcept { return data_; }

 private:
  Axis t_, x_;
  std::vector<double> data_;
};

// Scalar field on a (t, v, x) tensor grid, trilinear interpolation.
class FieldTVX {
 public:
  FieldTVX() = default;
  FieldTVX(Axis t, Axis v, Axis x, double fill = 0.0);

  const Axis& t_axis() const noexcept { return t_; }
  const Axis& v_axis() const noexcept { return v_; }
  const Axis& x_axis() const noexcept { return x_; }

  std::size_t index(std::size_t k, std::size_t j, std::size_t i) const noexcept {
    return (k * v_.n + j) * x_.n + i;
  }
  double& at(std::size_t k, std::size_t j, std::size_t i) noexcept { return data_[index(k, j, i)]; }
  double at(std::size_t k, std::size_t j, std::size_t i) const noexcept { return data_[index(k, j, i)]; }
  double* slice(std::size_t k) noexcept { return data_.data() + k * v_.n * x_.n; }
  const double* slice(std::size_t k) const noexcept { return data_.data() + k * v_.n * x_.n; }

  double operator()(double t, double v, double x) const noexcept;
  bool covers(double t, double v, double x) const noexcept {
    return t_.contains(t) && v_.contains(v) && x_.contains(x);
  }

  FieldTVX d_dv() const;
  FieldTVX d_dx() const;
  FieldTVX d_dvv() const;
  FieldTVX d_dt() const;

  bool all_finite() const noexcept;
  const std::vector<double>& values() const noexcept { return data_; }

 private:
  Axis t_, v_, x_;
  std::vector<double> data_;
};

// Rectangular probe grid in (t, v, x).
struct ProbeGrid {
  Axis t;
  Axis v;
  Axis x;
  void validate() const;
};

// Solves a tridiagonal system in place (Thomas algorithm). lower[0] and upper[n-1] are ignored.
void solve_tridiagonal(std::vector<double>& lower, std::vector<double>& diag, std::vector<double>& upper,
                       std::vector<double>& rhs);

}  // namespace kyleback
