#include "kyleback/filtering.hpp"

#include <algorithm>
#include <cmath>

#include "kyleback/errors.hpp"
#include "kyleback/rng.hpp"
#include "kyleback/stats.hpp"

namespace kyleback {

ObservedPath ObservedPath::from_bundle(const PathBundle& p) {
  if (p.stride != 1) throw Error(ErrorKind::invalid_argument, "observation paths must be recorded at every step");
  return ObservedPath{p.t, p.Y, p.X, p.V};
}

namespace {

void check_observation(const ObservedPath& obs) {
  if (obs.t.size() < 2 || obs.Y.size() != obs.t.size() || obs.X.size() != obs.t.size())
    throw Error(ErrorKind::invalid_argument, "observation path needs matching t, Y and X of length >= 2");
}

}  // namespace

FilterPath particle_filter(const CoefficientSet& coeffs, const AffineStrategy& strategy, const TerminalLaw& prior,
                           const ObservedPath& obs, const ParticleFilterOptions& opt) {
  check_observation(obs);
  if (opt.n_particles < 2) throw Error(ErrorKind::invalid_argument, "particle filter needs at least 2 particles");
  const std::size_t n = opt.n_particles, steps = obs.t.size() - 1;
  const CounterRng draws(opt.seed, streams::particles);
  const CounterRng prior_rng(opt.seed, streams::prior);
  const CounterRng resample_rng(opt.seed, streams::resampling);

  std::vector<double> v(n), logw(n, 0.0), w(n), scratch(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (prior.kind() == TerminalLaw::Kind::point_mass) {
      v[i] = prior.mean();
    } else {
      const double u = prior_rng.uniform_pair(i, 0).first;
      v[i] = prior.kind() == TerminalLaw::Kind::empirical
                 ? prior.samples()[std::min(prior.samples().size() - 1,
                                            static_cast<std::size_t>(u * static_cast<double>(prior.samples().size())))]
                 : prior.quantile(u);
    }
  }
  FilterPath out;
  std::size_t consecutive = 0;
  auto summarize = [&](std::size_t k, bool resampled) {
    const double t = obs.t[k], x = obs.X[k];
    double mx = -INFINITY;
    for (double lw : logw) mx = std::max(mx, lw);
    double sw = 0.0;
    for (std::size_t i = 0; i < n; ++i) sw += (w[i] = std::exp(logw[i] - mx));
    double p = 0.0, eu = 0.0, evu = 0.0, sq = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= sw;
      const double u = strategy(t, v[i], x);
      p += w[i] * v[i];
      eu += w[i] * u;
      evu += w[i] * v[i] * u;
      w2 += w[i] * w[i];
    }
    for (std::size_t i = 0; i < n; ++i) sq += w[i] * (v[i] - p) * (v[i] - p);
    out.t.push_back(t);
    out.X.push_back(x);
    out.P.push_back(p);
    out.Z.push_back(evu - p * eu);
    out.variance.push_back(sq);
    out.ESS.push_back(1.0 / w2);
    out.resampled.push_back(resampled ? 1 : 0);
  };
  summarize(0, false);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = obs.t[k], dt = obs.t[k + 1] - t, sdt = std::sqrt(dt), x = obs.X[k];
    const double dy = obs.Y[k + 1] - obs.Y[k];
    double max_raw = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = strategy(t, v[i], x);
      logw[i] += u * dy - 0.5 * u * u * dt;
      max_raw = std::max(max_raw, logw[i]);
      // Pairs of normals: even particles take the first draw, odd the second.
      const auto [z1, z2] = draws.normal_pair(i / 2, static_cast<std::uint32_t>(k));
      const double z = i % 2 == 0 ? z1 : z2;
      v[i] += coeffs.b(t, v[i], x) * dt + coeffs.sigma(t, v[i], x) * sdt * z;
    }
    // Normalised weights and ESS.
    double sw = 0.0;
    for (std::size_t i = 0; i < n; ++i) sw += (w[i] = std::exp(logw[i] - max_raw));
    double w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] /= sw;
      w2 += w[i] * w[i];
    }
    const double ess = 1.0 / w2;
    const double wmax = *std::max_element(w.begin(), w.end());
    if (wmax > 1.0 - 1e-9) {
      ++out.collapse_events;
      if (++consecutive >= opt.collapse_warning_after) out.degeneracy_warning = true;
    } else {
      consecutive = 0;
    }
    bool resampled = false;
    if (ess < opt.ess_fraction * static_cast<double>(n)) {
      const double u0 = resample_rng.uniform_pair(0, static_cast<std::uint32_t>(k)).first / static_cast<double>(n);
      double c = w[0];
      std::size_t j = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double target = u0 + static_cast<double>(i) / static_cast<double>(n);
        while (target > c && j + 1 < n) c += w[++j];
        scratch[i] = v[j];
      }
      v.swap(scratch);
      std::fill(logw.begin(), logw.end(), 0.0);
      resampled = true;
    }
    summarize(k + 1, resampled);
  }
  return out;
}

FilterPath kalman_bucy_oracle(const LinearFilterModel& m, const ObservedPath& obs) {
  if (!m.f || !m.g || !m.k || !m.beta)
    throw Error(ErrorKind::shape_mismatch, "Kalman-Bucy oracle needs the linear model functions f, g, k, beta");
  check_observation(obs);
  const std::size_t steps = obs.t.size() - 1;
  FilterPath out;
  double p = m.prior_mean, s = m.S0;
  auto rhs = [&](double t, double ss) { return 2.0 * m.f(t) * ss + 1.0 - m.beta(t) * m.beta(t) * ss * ss; };
  auto push = [&](std::size_t k) {
    out.t.push_back(obs.t[k]);
    out.X.push_back(obs.X[k]);
    out.P.push_back(p);
    out.variance.push_back(s);
    out.Z.push_back(m.beta(obs.t[k]) * s);
    out.ESS.push_back(0.0);
    out.resampled.push_back(0);
  };
  push(0);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = obs.t[k], dt = obs.t[k + 1] - t, x = obs.X[k], b = m.beta(t);
    const double dy = obs.Y[k + 1] - obs.Y[k];
    p += (m.f(t) * p + m.g(t) * x + m.k(t)) * dt + s * b * (dy - b * (p - x) * dt);
    const double k1 = rhs(t, s);
    const double k2 = rhs(t + 0.5 * dt, s + 0.5 * dt * k1);
    const double k3 = rhs(t + 0.5 * dt, s + 0.5 * dt * k2);
    const double k4 = rhs(t + dt, s + dt * k3);
    s += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    push(k + 1);
  }
  return out;
}

namespace {

std::vector<std::size_t> checkpoint_nodes(const TimeGrid& grid, const std::vector<double>& checkpoints) {
  std::vector<std::size_t> out;
  for (double c : checkpoints) {
    if (c < grid.t_start || c > grid.t_end) throw Error(ErrorKind::invalid_argument, "checkpoint outside the grid");
    out.push_back(static_cast<std::size_t>(std::llround((c - grid.t_start) / grid.dt())));
  }
  return out;
}

MartingaleReport summarize(const std::vector<std::vector<double>>& values, const std::vector<double>& times,
                           double z_threshold) {
  MartingaleReport r;
  r.z_threshold = z_threshold;
  r.pass = true;
  for (std::size_t c = 0; c < values.size(); ++c) {
    MartingaleCheckpoint cp;
    cp.t = times[c];
    cp.estimate = mean_estimate(values[c]);
    r.n_paths = cp.estimate.n;
    cp.z_score = cp.estimate.se > 0.0 ? (cp.estimate.mean - 1.0) / cp.estimate.se
                                      : (cp.estimate.mean == 1.0 ? 0.0 : INFINITY);
    cp.pass = std::abs(cp.z_score) <= z_threshold;
    r.pass = r.pass && cp.pass;
    r.checkpoints.push_back(cp);
  }
  return r;
}

// Runs paths and gathers one per-path series at the checkpoint nodes.
MartingaleReport stream_test(const CoefficientSet& coeffs, const ControlLaw& control, const TimeGrid& grid,
                             EngineOptions opt, const std::vector<double>& checkpoints, double z_threshold,
                             bool use_l) {
  const auto nodes = checkpoint_nodes(grid, checkpoints);
  std::vector<std::vector<double>> values(nodes.size(), std::vector<double>(opt.n_paths, 1.0));
  std::vector<double> times;
  for (std::size_t nd : nodes) times.push_back(grid.t(nd));
  run_paths(coeffs, control, grid, opt, [&](const PathBundle& p) {
    const std::size_t row = p.path_index - opt.first_path;
    for (std::size_t c = 0; c < nodes.size(); ++c) {
      const auto& series = use_l ? p.L : p.M;
      values[c][row] = series[nodes[c]];
    }
  });
  return summarize(values, times, z_threshold);
}

}  // namespace

MartingaleReport exponential_martingale_test(const CoefficientSet& coeffs, const ControlLaw& control,
                                             const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                             const std::vector<double>& checkpoints, double z_threshold) {
  EngineOptions opt;
  opt.seed = seed;
  opt.n_paths = n_paths;
  opt.track_M = true;
  return stream_test(coeffs, control, grid, opt, checkpoints, z_threshold, false);
}

MartingaleReport exponential_martingale_test(const std::vector<PathBundle>& paths,
                                             const std::vector<double>& checkpoints, double z_threshold) {
  if (paths.empty() || paths.front().M.empty())
    throw Error(ErrorKind::invalid_argument, "paths must carry the stochastic exponential");
  std::vector<std::vector<double>> values(checkpoints.size());
  std::vector<double> times;
  for (double c : checkpoints) {
    const auto& t = paths.front().t;
    const auto it = std::min_element(t.begin(), t.end(), [c](double a, double b) { return std::abs(a - c) < std::abs(b - c); });
    const auto idx = static_cast<std::size_t>(it - t.begin());
    times.push_back(*it);
    for (const auto& p : paths) values[times.size() - 1].push_back(p.M[idx]);
  }
  return summarize(values, times, z_threshold);
}

MartingaleReport likelihood_martingale_test(const PhiField& field, const CoefficientSet& coeffs,
                                            const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths,
                                            const std::vector<double>& checkpoints, double z_threshold) {
  EngineOptions opt;
  opt.seed = seed;
  opt.n_paths = n_paths;
  opt.l_field = &field;
  return stream_test(coeffs, ControlLaw::zero(), grid, opt, checkpoints, z_threshold, true);
}

FbsdeReport fbsde_relation_check(const FieldTX& H, const CoefficientSet& coeffs, const FilterPath& f) {
  const FieldTX Hx = H.d_dx();
  FbsdeReport r;
  double ss = 0.0, zn = 0.0, zd = 0.0;
  std::size_t outside = 0;
  for (std::size_t k = 0; k < f.t.size(); ++k) {
    const double t = f.t[k], x = f.X[k];
    if (!H.covers(t, x)) {
      ++outside;
      continue;
    }
    const double dp = f.P[k] - H(t, x);
    const double target = coeffs.rho(t, x) * Hx(t, x);
    ss += dp * dp;
    r.max_P = std::max(r.max_P, std::abs(dp));
    zn += std::abs(f.Z[k] - target);
    zd += std::abs(target);
    r.max_Z = std::max(r.max_Z, std::abs(f.Z[k] - target));
    ++r.n_nodes;
  }
  r.rmse_P = r.n_nodes ? std::sqrt(ss / static_cast<double>(r.n_nodes)) : 0.0;
  r.z_relative_error = zd > 0.0 ? zn / zd : (zn > 0.0 ? INFINITY : 0.0);
  r.excursion_fraction = f.t.empty() ? 0.0 : static_cast<double>(outside) / static_cast<double>(f.t.size());
  r.coverage_warning = outside > 0;
  return r;
}

}  // namespace kyleback
