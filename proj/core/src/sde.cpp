#include "kyleback/sde.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>

#include "kyleback/conditioning.hpp"
#include "kyleback/errors.hpp"
#include "kyleback/rng.hpp"

namespace kyleback {

void CoefficientSet::check_complete() const {
  if (!b || !sigma || !mu || !rho || !g) throw Error(ErrorKind::configuration, "coefficient set is incomplete");
  if (!(T > 0.0)) throw Error(ErrorKind::invalid_argument, "horizon T must be positive");
}

CoefficientSet brownian_benchmark(TerminalLaw m_star, double horizon) {
  CoefficientSet c;
  c.b = [](double, double, double) { return 0.0; };
  c.sigma = [](double, double, double) { return 1.0; };
  c.mu = [](double, double) { return 0.0; };
  c.rho = [](double, double) { return 1.0; };
  c.g = [](double x) { return x; };
  c.m_star = std::move(m_star);
  c.T = horizon;
  auto zero = [](double) { return 0.0; };
  auto one = [](double) { return 1.0; };
  c.linear = LinearGaussianSpec{zero, zero, zero, zero, zero, one, one, true};
  c.name = "brownian";
  return c;
}

double g_inverse(const CoefficientSet& coeffs, double v) {
  double lo = coeffs.x_min, hi = coeffs.x_max;
  const double g_lo = coeffs.g(lo), g_hi = coeffs.g(hi);
  if (!(v >= g_lo && v <= g_hi)) {
    std::ostringstream msg;
    msg << "value " << v << " outside g range [" << g_lo << ", " << g_hi << "] on [" << lo << ", " << hi << "]";
    throw Error(ErrorKind::out_of_domain, msg.str());
  }
  const double tol = 1e-12 * std::max(1.0, std::abs(v));
  if (std::abs(g_lo - v) <= tol) return lo;
  if (std::abs(g_hi - v) <= tol) return hi;
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double gm = coeffs.g(mid);
    if (std::abs(gm - v) <= tol) return mid;
    (gm < v ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  return mid;
}

AssumptionReport validate_assumptions(const CoefficientSet& coeffs, const ProbeGrid& probe,
                                      double declared_lipschitz, double ellipticity_floor) {
  coeffs.check_complete();
  probe.validate();
  AssumptionReport rep;
  rep.declared_lipschitz = declared_lipschitz;
  rep.min_sigma = std::numeric_limits<double>::infinity();
  rep.min_rho = std::numeric_limits<double>::infinity();
  bool non_finite = false;
  auto node_name = [](double t, double v, double x) {
    std::ostringstream s;
    s << "(t=" << t << ", v=" << v << ", x=" << x << ")";
    return s.str();
  };
  auto finite_or_report = [&](double value, const char* what, double t, double v, double x) {
    if (std::isfinite(value)) return true;
    if (!non_finite) rep.failures.push_back(std::string("non-finite ") + what + " at " + node_name(t, v, x));
    non_finite = true;
    return false;
  };
  const double hv = probe.v.h(), hx = probe.x.h();
  for (std::size_t k = 0; k < probe.t.n; ++k) {
    const double t = probe.t.at(k);
    for (std::size_t j = 0; j < probe.v.n; ++j) {
      const double v = probe.v.at(j);
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double x = probe.x.at(i);
        const double b = coeffs.b(t, v, x), s = coeffs.sigma(t, v, x);
        if (!finite_or_report(b, "b", t, v, x) || !finite_or_report(s, "sigma", t, v, x)) continue;
        rep.min_sigma = std::min(rep.min_sigma, s);
        if (j + 1 < probe.v.n) {
          const double v1 = probe.v.at(j + 1);
          const double b1 = coeffs.b(t, v1, x), s1 = coeffs.sigma(t, v1, x);
          if (std::isfinite(b1) && std::isfinite(s1)) {
            rep.lipschitz_b = std::max(rep.lipschitz_b, std::abs(b1 - b) / hv);
            rep.lipschitz_sigma = std::max(rep.lipschitz_sigma, std::abs(s1 - s) / hv);
          }
        }
        if (i + 1 < probe.x.n) {
          const double x1 = probe.x.at(i + 1);
          const double b1 = coeffs.b(t, v, x1), s1 = coeffs.sigma(t, v, x1);
          if (std::isfinite(b1) && std::isfinite(s1)) {
            rep.lipschitz_b = std::max(rep.lipschitz_b, std::abs(b1 - b) / hx);
            rep.lipschitz_sigma = std::max(rep.lipschitz_sigma, std::abs(s1 - s) / hx);
          }
        }
      }
    }
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double x = probe.x.at(i);
      const double m = coeffs.mu(t, x), r = coeffs.rho(t, x);
      if (!finite_or_report(m, "mu", t, 0.0, x) || !finite_or_report(r, "rho", t, 0.0, x)) continue;
      rep.min_rho = std::min(rep.min_rho, r);
      if (i + 1 < probe.x.n) {
        const double x1 = probe.x.at(i + 1);
        const double m1 = coeffs.mu(t, x1), r1 = coeffs.rho(t, x1);
        if (std::isfinite(m1) && std::isfinite(r1)) {
          rep.lipschitz_mu = std::max(rep.lipschitz_mu, std::abs(m1 - m) / hx);
          rep.lipschitz_rho = std::max(rep.lipschitz_rho, std::abs(r1 - r) / hx);
        }
      }
    }
  }
  for (std::size_t i = 0; i + 1 < probe.x.n; ++i) {
    const double a = coeffs.g(probe.x.at(i)), b = coeffs.g(probe.x.at(i + 1));
    if (!finite_or_report(a, "g", 0.0, 0.0, probe.x.at(i))) continue;
    if (!(b > a)) rep.g_increasing = false;
  }
  rep.lambda0 = std::min(rep.min_sigma, rep.min_rho);
  if (!rep.g_increasing) rep.failures.push_back("g not strictly increasing");
  if (!(rep.min_sigma > ellipticity_floor)) {
    std::ostringstream s;
    s << "ellipticity violated: min sigma = " << rep.min_sigma;
    rep.failures.push_back(s.str());
  }
  if (!(rep.min_rho > ellipticity_floor)) {
    std::ostringstream s;
    s << "rho not positive: min rho = " << rep.min_rho;
    rep.failures.push_back(s.str());
  }
  const double worst = std::max({rep.lipschitz_b, rep.lipschitz_sigma, rep.lipschitz_mu, rep.lipschitz_rho});
  if (worst > declared_lipschitz) {
    std::ostringstream s;
    s << "Lipschitz quotient " << worst << " exceeds declared bound " << declared_lipschitz;
    rep.failures.push_back(s.str());
  }
  rep.pass = rep.failures.empty();
  return rep;
}

ControlLaw ControlLaw::zero() {
  return ControlLaw{[](double, double, double, double& tv, double& a) {
                      tv = 0.0;
                      a = 0.0;
                      return true;
                    },
                    false};
}

ControlLaw ControlLaw::strategy(Fn3 u) {
  return ControlLaw{[u = std::move(u)](double t, double v, double x, double& tv, double& a) {
                      tv = 0.0;
                      a = u(t, v, x);
                      return std::isfinite(a);
                    },
                    false};
}

namespace {

void prepare(PathBundle& p, const TimeGrid& grid, const EngineOptions& opt) {
  const std::size_t n_rec = (grid.n_steps + opt.record_stride - 1) / opt.record_stride + 1;
  p.grid = grid;
  p.stride = opt.record_stride;
  for (auto* v : {&p.t, &p.V, &p.X, &p.Y, &p.B1, &p.B2, &p.alpha}) v->assign(n_rec, 0.0);
  p.M.assign(opt.track_M ? n_rec : 0, 1.0);
  p.L.assign(opt.l_field != nullptr ? n_rec : 0, 1.0);
  p.level_hits.assign(opt.truncation_levels.size(), -1);
  p.truncated = false;
  p.first_truncation = -1;
  p.terminated_early = false;
  p.termination_index = -1;
}

void simulate_one(const CoefficientSet& c, const ControlLaw& control, const TimeGrid& grid,
                  const EngineOptions& opt, const CounterRng& rng, std::uint64_t path, PathBundle& p) {
  prepare(p, grid, opt);
  p.seed = opt.seed;
  p.path_index = path;
  const double dt = grid.dt(), sdt = std::sqrt(dt);
  const std::size_t n = grid.n_steps, stride = opt.record_stride;
  double V = c.v0, X = c.x0, Y = 0.0, B1 = 0.0, B2 = 0.0, M = 1.0;
  bool frozen = false, alive = true;
  std::size_t rec = 0;
  auto record = [&](std::size_t k, double alpha) {
    p.t[rec] = grid.t(k);
    p.V[rec] = V;
    p.X[rec] = X;
    p.Y[rec] = Y;
    p.B1[rec] = B1;
    p.B2[rec] = B2;
    p.alpha[rec] = alpha;
    if (opt.track_M) p.M[rec] = M;
    if (opt.l_field != nullptr) p.L[rec] = opt.l_field->value(grid.t(k), V, X);
    ++rec;
  };
  auto active_index = [&]() -> std::optional<std::size_t> {
    if (!opt.active_level) return std::nullopt;
    for (std::size_t l = 0; l < opt.truncation_levels.size(); ++l)
      if (opt.truncation_levels[l] == *opt.active_level) return l;
    return std::nullopt;
  }();

  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.t(k);
    double tv = 0.0, a = 0.0;
    if (alive && !frozen) {
      if (!control.evaluate(t, V, X, tv, a) || !std::isfinite(tv) || !std::isfinite(a)) {
        alive = false;
        p.terminated_early = true;
        p.termination_index = static_cast<long>(k);
        tv = a = 0.0;
      }
    }
    if (alive && !frozen) {
      const double mag = control.drives_v ? std::hypot(tv, a) : std::abs(a);
      for (std::size_t l = 0; l < opt.truncation_levels.size(); ++l)
        if (p.level_hits[l] < 0 && mag >= opt.truncation_levels[l]) p.level_hits[l] = static_cast<long>(k);
      if (active_index && p.level_hits[*active_index] >= 0) {
        frozen = true;
        tv = a = 0.0;
      }
    }
    if (std::abs(a) > opt.alpha_cap || std::abs(tv) > opt.alpha_cap) {
      if (!p.truncated) p.first_truncation = static_cast<long>(k);
      p.truncated = true;
      a = std::clamp(a, -opt.alpha_cap, opt.alpha_cap);
      tv = std::clamp(tv, -opt.alpha_cap, opt.alpha_cap);
    }
    if (!alive) {
      // Hold the state; the path is excluded downstream.
      if (k % stride == 0) record(k, 0.0);
      continue;
    }
    if (k % stride == 0) record(k, a);
    const auto [z1, z2] = rng.normal_pair(path, static_cast<std::uint32_t>(k));
    const double dB1 = sdt * z1, dB2 = sdt * z2;
    const double s = c.sigma(t, V, X), r = c.rho(t, X);
    const double dV = (c.b(t, V, X) + (control.drives_v ? s * tv : 0.0)) * dt + s * dB1;
    const double dX = (c.mu(t, X) + r * a) * dt + r * dB2;
    if (opt.track_M) M *= std::exp(-a * dB2 - 0.5 * a * a * dt);
    V += dV;
    X += dX;
    Y += a * dt + dB2;
    B1 += dB1;
    B2 += dB2;
    if (!std::isfinite(V) || !std::isfinite(X)) {
      alive = false;
      p.terminated_early = true;
      p.termination_index = static_cast<long>(k + 1);
    }
  }
  double a_last = 0.0;
  if (alive && !frozen) {
    double tv = 0.0;
    if (!control.evaluate(grid.t(n), V, X, tv, a_last) || !std::isfinite(a_last))
      a_last = rec > 0 ? p.alpha[rec - 1] : 0.0;
    a_last = std::clamp(a_last, -opt.alpha_cap, opt.alpha_cap);
  }
  record(n, a_last);
}

}  // namespace

void run_paths(const CoefficientSet& coeffs, const ControlLaw& control, const TimeGrid& grid,
               const EngineOptions& options, const PathVisitor& visit) {
  coeffs.check_complete();
  grid.validate(coeffs.T);
  if (options.n_paths == 0) throw Error(ErrorKind::invalid_argument, "n_paths must be positive");
  if (options.record_stride == 0) throw Error(ErrorKind::invalid_argument, "record stride must be positive");
  if (!std::is_sorted(options.truncation_levels.begin(), options.truncation_levels.end(), std::less_equal<>()) ||
      std::adjacent_find(options.truncation_levels.begin(), options.truncation_levels.end()) !=
          options.truncation_levels.end())
    throw Error(ErrorKind::invalid_argument, "truncation levels must be strictly increasing");
  const CounterRng rng(options.seed, streams::shocks);
  const auto n = static_cast<long long>(options.n_paths);
  // Exceptions cannot cross the parallel region; the one from the lowest path index is rethrown.
  std::exception_ptr failure;
  long long failed_at = n;
  std::mutex guard;
#pragma omp parallel
  {
    PathBundle buffer;
#pragma omp for schedule(dynamic, 16)
    for (long long p = 0; p < n; ++p) {
      try {
        simulate_one(coeffs, control, grid, options, rng, options.first_path + static_cast<std::uint64_t>(p), buffer);
        visit(buffer);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(guard);
        if (p < failed_at) {
          failed_at = p;
          failure = std::current_exception();
        }
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

std::vector<PathBundle> collect_paths(const CoefficientSet& coeffs, const ControlLaw& control,
                                      const TimeGrid& grid, const EngineOptions& options) {
  std::vector<PathBundle> out(options.n_paths);
  run_paths(coeffs, control, grid, options,
            [&](const PathBundle& p) { out[p.path_index - options.first_path] = p; });
  return out;
}

std::vector<PathBundle> simulate_reference(const CoefficientSet& coeffs, const TimeGrid& grid, std::uint64_t seed,
                                           std::size_t n_paths) {
  EngineOptions opt;
  opt.seed = seed;
  opt.n_paths = n_paths;
  return collect_paths(coeffs, ControlLaw::zero(), grid, opt);
}

std::vector<PathBundle> simulate_controlled(const CoefficientSet& coeffs, const Fn3& strategy, const TimeGrid& grid,
                                            std::uint64_t seed, std::size_t n_paths, double alpha_cap) {
  EngineOptions opt;
  opt.seed = seed;
  opt.n_paths = n_paths;
  opt.alpha_cap = alpha_cap;
  return collect_paths(coeffs, ControlLaw::strategy(strategy), grid, opt);
}

}  // namespace kyleback
