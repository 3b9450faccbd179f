#include "kyleback/bridge.hpp"

#include <algorithm>
#include <cmath>

#include "kyleback/errors.hpp"
#include "kyleback/rng.hpp"
#include "kyleback/stats.hpp"

namespace kyleback {

void BridgeConfig::validate(double horizon) const {
  if (!(delta > 0.0 && delta < horizon / 10.0))
    throw Error(ErrorKind::invalid_argument, "time guard must lie in (0, T/10)");
  for (std::size_t i = 0; i < truncation_levels.size(); ++i)
    if (!(truncation_levels[i] > 0.0) || (i > 0 && !(truncation_levels[i] > truncation_levels[i - 1])))
      throw Error(ErrorKind::invalid_argument, "truncation levels must be positive and strictly increasing");
  if (active_level &&
      std::find(truncation_levels.begin(), truncation_levels.end(), *active_level) == truncation_levels.end())
    throw Error(ErrorKind::invalid_argument, "active truncation level must be one of the configured levels");
  if (n_paths == 0 || n_steps == 0) throw Error(ErrorKind::invalid_argument, "bridge needs n_paths, n_steps > 0");
}

namespace {

std::vector<PathBundle> run_bridge(const CoefficientSet& coeffs, const ControlLaw& control,
                                   const BridgeConfig& cfg) {
  cfg.validate(coeffs.T);
  EngineOptions opt;
  opt.seed = cfg.seed;
  opt.n_paths = cfg.n_paths;
  opt.first_path = cfg.first_path;
  opt.alpha_cap = cfg.alpha_cap;
  opt.truncation_levels = cfg.truncation_levels;
  opt.active_level = cfg.active_level;
  opt.record_stride = cfg.record_stride == 0 ? cfg.n_steps : cfg.record_stride;
  return collect_paths(coeffs, control, cfg.grid(coeffs.T), opt);
}

bool survives(const PathBundle& p) { return !p.terminated_early && !p.truncated; }

}  // namespace

std::vector<PathBundle> simulate_full_bridge(const CoefficientSet& coeffs, const PhiField& field,
                                             const BridgeConfig& config) {
  return run_bridge(coeffs, full_bridge_control(field, coeffs), config);
}

std::vector<PathBundle> simulate_half_bridge(const CoefficientSet& coeffs, const PhiField& field,
                                             const BridgeConfig& config) {
  return run_bridge(coeffs, half_bridge_control(field, coeffs), config);
}

PinningReport pinning_check(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                            const PinningTolerances& tol, const std::vector<double>& levels) {
  PinningReport r;
  r.n_paths = paths.size();
  r.levels = levels;
  r.truncated_fraction.assign(levels.size(), 0.0);
  for (const auto& p : paths) {
    for (std::size_t l = 0; l < levels.size() && l < p.level_hits.size(); ++l)
      if (p.level_hits[l] >= 0) r.truncated_fraction[l] += 1.0;
    if (p.terminated_early) {
      ++r.n_terminated;
      continue;
    }
    r.gaps.push_back(std::abs(p.V.back() - coeffs.g(p.X.back())));
  }
  for (double& f : r.truncated_fraction) f /= std::max<double>(1.0, static_cast<double>(paths.size()));
  const double sd = std::sqrt(tol.delta);
  r.tol_mean = tol.tol_mean.value_or(3.0 * sd);
  r.tol_p95 = tol.tol_p95.value_or(6.0 * sd);
  if (r.gaps.empty()) return r;
  const MeanEstimate m = mean_estimate(r.gaps);
  r.mean = m.mean;
  r.se = m.se;
  r.median = empirical_quantile(r.gaps, 0.5);
  r.p95 = empirical_quantile(r.gaps, 0.95);
  r.pass = r.mean <= r.tol_mean && r.p95 <= r.tol_p95;
  return r;
}

TerminalLawReport terminal_law_check(const std::vector<PathBundle>& paths, const TerminalLaw& m_star,
                                     double ks_threshold, double w1_threshold, std::size_t min_paths) {
  TerminalLawReport r;
  std::vector<double> v;
  for (const auto& p : paths) {
    if (survives(p))
      v.push_back(p.V.back());
    else
      ++r.n_excluded;
  }
  r.n_used = v.size();
  if (v.size() < min_paths)
    throw Error(ErrorKind::insufficient_sample, std::to_string(v.size()) + " surviving paths, need " +
                                                    std::to_string(min_paths));
  r.ks = ks_statistic(v, m_star);
  r.w1 = wasserstein1(std::move(v), m_star);
  r.ks_threshold = ks_threshold;
  r.w1_threshold = w1_threshold;
  r.pass = r.ks <= ks_threshold && r.w1 <= w1_threshold;
  return r;
}

std::vector<double> sample_law(const TerminalLaw& law, std::size_t n, std::uint64_t seed) {
  const CounterRng rng(seed, streams::law_sampling);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform_pair(i, 0).first;
    if (law.kind() == TerminalLaw::Kind::empirical) {
      const auto& s = law.samples();
      out[i] = s[std::min(s.size() - 1, static_cast<std::size_t>(u * static_cast<double>(s.size())))];
    } else {
      out[i] = law.quantile(u);
    }
  }
  return out;
}

std::vector<double> marginal_at(const std::vector<PathBundle>& paths, double t, bool x_coordinate) {
  std::vector<double> out;
  for (const auto& p : paths) {
    if (!survives(p) || p.t.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < p.t.size(); ++i)
      if (std::abs(p.t[i] - t) < std::abs(p.t[best] - t)) best = i;
    out.push_back(x_coordinate ? p.X[best] : p.V[best]);
  }
  return out;
}

}  // namespace kyleback
