#include "kyleback/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <string>

#include "kyleback/errors.hpp"
#include "kyleback/rng.hpp"

namespace kyleback {

namespace {

// Cell and offset for linear interpolation that extrapolates beyond the axis ends.
std::pair<std::size_t, double> open_cell(const Axis& ax, double x) {
  const double s = (x - ax.lo) / ax.h();
  const auto last = static_cast<double>(ax.n - 2);
  const double i = std::clamp(std::floor(s), 0.0, last);
  return {static_cast<std::size_t>(i), s - i};
}

struct PathIntegral {
  double plain = 0.0;     // trapezoid up to the cut
  double extended = 0.0;  // plus the last integrand value held to T
};

// Trapezoid of q over the recorded nodes up to t_cut (interpolated inside the last cell).
template <class Q>
PathIntegral integrate(const PathBundle& p, double horizon, double t_cut, Q q) {
  PathIntegral r;
  const std::size_t n = p.t.size();
  double q_prev = q(0), t_prev = p.t[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double qi = q(i);
    if (p.t[i] >= t_cut) {
      const double w = (t_cut - t_prev) / (p.t[i] - t_prev);
      const double q_cut = (1 - w) * q_prev + w * qi;
      r.plain += 0.5 * (q_prev + q_cut) * (t_cut - t_prev);
      q_prev = q_cut;
      t_prev = t_cut;
      break;
    }
    r.plain += 0.5 * (q_prev + qi) * (p.t[i] - t_prev);
    q_prev = qi;
    t_prev = p.t[i];
  }
  r.extended = r.plain + q_prev * (horizon - t_prev);
  return r;
}

void require_stride_one(const PathBundle& p) {
  if (p.stride != 1) throw Error(ErrorKind::configuration, "wealth integrals need paths recorded at every step");
}

WealthEstimate summarize(std::vector<double> ext, const std::vector<double>& plain) {
  WealthEstimate w;
  const MeanEstimate m = mean_estimate(ext);
  w.mean = m.mean;
  w.se = m.se;
  w.n_paths = m.n;
  w.non_extended = mean_estimate(plain);
  w.per_path = std::move(ext);
  return w;
}

template <class Q>
WealthEstimate wealth_over(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs, Q make_q) {
  std::vector<double> ext, plain;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const PathBundle& p = paths[k];
    if (p.terminated_early) continue;
    require_stride_one(p);
    const double vT = terminal_value(p, coeffs);
    const auto r = integrate(p, coeffs.T, p.t.back(), make_q(k, p, vT));
    ext.push_back(r.extended);
    plain.push_back(r.plain);
  }
  return summarize(std::move(ext), plain);
}

}  // namespace

PriceFn price_from_field(const FieldTX& H) {
  auto field = std::make_shared<const FieldTX>(H);
  return [field](double t, double x) {
    const Axis& ta = field->t_axis();
    const Axis& xa = field->x_axis();
    const auto [k, wt] = ta.locate(std::clamp(t, ta.lo, ta.hi));
    const auto [i, wx] = open_cell(xa, x);
    auto row = [&](std::size_t kk) { return (1 - wx) * field->at(kk, i) + wx * field->at(kk, i + 1); };
    return (1 - wt) * row(k) + wt * row(k + 1);
  };
}

double terminal_value(const PathBundle& path, const CoefficientSet& coeffs) {
  const double t = path.t.back(), v = path.V.back(), x = path.X.back();
  const double tau = coeffs.T - t;
  if (!(tau > 0.0)) return v;
  const CounterRng rng(path.seed, streams::terminal_value);
  const double z = rng.normal_pair(path.path_index, 0).first;
  return v + coeffs.b(t, v, x) * tau + coeffs.sigma(t, v, x) * std::sqrt(tau) * z;
}

WealthEstimate expected_wealth(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                               const PriceFn& price) {
  if (!price) throw Error(ErrorKind::configuration, "expected_wealth needs a price source");
  return wealth_over(paths, coeffs, [&](std::size_t, const PathBundle& p, double vT) {
    return [&p, &price, vT](std::size_t i) { return (vT - price(p.t[i], p.X[i])) * p.alpha[i]; };
  });
}

WealthEstimate expected_wealth(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                               const std::vector<std::vector<double>>& prices) {
  if (prices.size() != paths.size())
    throw Error(ErrorKind::configuration, "price source missing: one price path per simulated path is required");
  for (std::size_t k = 0; k < paths.size(); ++k)
    if (prices[k].size() != paths[k].t.size())
      throw Error(ErrorKind::configuration, "price path " + std::to_string(k) + " does not match its path length");
  return wealth_over(paths, coeffs, [&](std::size_t k, const PathBundle& p, double vT) {
    const std::vector<double>& pk = prices[k];
    return [&p, &pk, vT](std::size_t i) { return (vT - pk[i]) * p.alpha[i]; };
  });
}

WealthEstimate wealth_via_F(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs, const FieldTVX& F,
                            const PriceFn& price) {
  if (!price) throw Error(ErrorKind::configuration, "wealth_via_F needs a price source");
  return wealth_over(paths, coeffs, [&](std::size_t, const PathBundle& p, double) {
    return [&p, &price, &F](std::size_t i) {
      return (F(p.t[i], p.V[i], p.X[i]) - price(p.t[i], p.X[i])) * p.alpha[i];
    };
  });
}

JTable::JTable(const FieldTX& H, const CoefficientSet& coeffs, Axis a_axis, std::vector<double> times,
               const JOptions& opt)
    : a_(a_axis), x_(H.x_axis()), times_(std::move(times)) {
  a_.validate("a");
  if (a_.n < 4) throw Error(ErrorKind::invalid_argument, "J table needs at least 4 levels of a");
  if (times_.empty()) throw Error(ErrorKind::invalid_argument, "J table needs at least one time");
  for (double t : times_)
    if (!H.t_axis().contains(t)) throw Error(ErrorKind::out_of_domain, "J table time outside the H grid");
  const std::size_t nx = x_.n;
  data_.assign(times_.size(), std::vector<double>(a_.n * nx, 0.0));
  std::exception_ptr failure;
  const auto na = static_cast<long long>(a_.n);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long ia = 0; ia < na; ++ia) {
    try {
      const auto j = static_cast<std::size_t>(ia);
      const MartingaleJ mj(H, coeffs, a_.at(j), opt);
      for (std::size_t s = 0; s < times_.size(); ++s)
        for (std::size_t i = 0; i < nx; ++i) data_[s][j * nx + i] = mj.value(times_[s], x_.at(i));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

double JTable::operator()(std::size_t s, double x, double a) const {
  const std::vector<double>& d = data_.at(s);
  const double ac = std::clamp(a, a_.lo, a_.hi);
  const std::size_t j = a_.locate(ac).first;
  const std::size_t base = std::min(j > 0 ? j - 1 : 0, a_.n - 4);
  const auto [i, wx] = open_cell(x_, x);
  const std::size_t nx = x_.n;
  double acc = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    double w = 1.0;
    const double am = a_.at(base + m);
    for (std::size_t q = 0; q < 4; ++q)
      if (q != m) w *= (ac - a_.at(base + q)) / (am - a_.at(base + q));
    const std::size_t row = (base + m) * nx;
    acc += w * ((1 - wx) * d[row + i] + wx * d[row + i + 1]);
  }
  return acc;
}

std::size_t JTable::slice_of(double t) const {
  std::size_t best = 0;
  for (std::size_t s = 1; s < times_.size(); ++s)
    if (std::abs(times_[s] - t) < std::abs(times_[best] - t)) best = s;
  return best;
}

Axis default_a_axis(const FieldTX& H, const CoefficientSet& coeffs, std::size_t n) {
  const Axis& xa = H.x_axis();
  return Axis{coeffs.g(xa.lo), coeffs.g(xa.hi), n};
}

double expected_J0(const JTable& table, const CoefficientSet& coeffs) {
  const std::size_t s = table.slice_of(0.0);
  if (table.times()[s] != 0.0) throw Error(ErrorKind::configuration, "J table has no slice at t = 0");
  return coeffs.m_star.expectation([&](double a) { return table(s, coeffs.x0, a); });
}

WealthStudy wealth_study(const CoefficientSet& coeffs, const ControlLaw& control, const WealthStudyInputs& inputs,
                         const WealthStudyOptions& o) {
  if (!inputs.price) throw Error(ErrorKind::configuration, "wealth study needs a price source");
  const double guard = o.quarter_delta ? 0.25 * o.delta : o.delta;
  const TimeGrid grid = TimeGrid::bridge(coeffs.T, guard, o.n_steps);
  const double t_end = grid.t(grid.n_steps), t_cut = coeffs.T - o.delta;
  std::size_t s0 = 0, s_end = 0;
  if (inputs.J) {
    s0 = inputs.J->slice_of(0.0);
    s_end = inputs.J->slice_of(t_end);
    if (inputs.J->times()[s0] != 0.0 || std::abs(inputs.J->times()[s_end] - t_end) > 1e-12)
      throw Error(ErrorKind::configuration, "J table needs slices at 0 and at the path end");
  }

  const std::size_t n = o.n_paths;
  std::vector<double> ext(n), plain(n), quarter(n), viaF(n), viaF_plain(n), j0(n), jend(n), gap_id(n), orth(n),
      pin(n), vend(n);
  std::vector<std::uint8_t> alive(n), capped(n);
  EngineOptions eo;
  eo.seed = o.seed;
  eo.n_paths = n;
  eo.first_path = o.first_path;
  eo.alpha_cap = o.alpha_cap;
  eo.record_stride = 1;
  run_paths(coeffs, control, grid, eo, [&](const PathBundle& p) {
    const std::size_t k = p.path_index - o.first_path;
    alive[k] = !p.terminated_early;
    capped[k] = p.truncated;
    if (p.terminated_early) return;
    const double vT = terminal_value(p, coeffs);
    const auto q = [&](std::size_t i) { return (vT - inputs.price(p.t[i], p.X[i])) * p.alpha[i]; };
    const PathIntegral full = integrate(p, coeffs.T, t_end, q);
    const PathIntegral cut = o.quarter_delta ? integrate(p, coeffs.T, t_cut, q) : full;
    ext[k] = cut.extended;
    plain[k] = cut.plain;
    quarter[k] = full.extended;
    if (inputs.F) {
      const FieldTVX& F = *inputs.F;
      const PathIntegral f = integrate(p, coeffs.T, o.quarter_delta ? t_cut : t_end, [&](std::size_t i) {
        return (F(p.t[i], p.V[i], p.X[i]) - inputs.price(p.t[i], p.X[i])) * p.alpha[i];
      });
      viaF[k] = f.extended;
      viaF_plain[k] = f.plain;
    }
    if (inputs.J) {
      j0[k] = (*inputs.J)(s0, coeffs.x0, vT);
      jend[k] = (*inputs.J)(s_end, p.X.back(), vT);
      gap_id[k] = full.plain - (j0[k] - jend[k]);
    }
    orth[k] = vT * p.B2.back();
    pin[k] = std::abs(p.V.back() - coeffs.g(p.X.back()));
    vend[k] = p.V.back();
  });

  auto keep = [&](const std::vector<double>& xs) {
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k)
      if (alive[k]) out.push_back(xs[k]);
    return out;
  };
  WealthStudy s;
  s.t_end = t_end;
  for (std::size_t k = 0; k < n; ++k) {
    s.n_terminated += alive[k] ? 0 : 1;
    s.n_truncated += capped[k] ? 1 : 0;
  }
  s.wealth = summarize(keep(ext), keep(plain));
  if (!o.keep_per_path) s.wealth.per_path.clear();
  if (o.quarter_delta) s.quarter = mean_estimate(keep(quarter));
  if (inputs.F) {
    s.via_F = summarize(keep(viaF), keep(viaF_plain));
    if (!o.keep_per_path) s.via_F->per_path.clear();
  }
  if (inputs.J) {
    s.j_start = mean_estimate(keep(j0));
    s.j_end = mean_estimate(keep(jend));
    s.j_identity_gap = mean_estimate(keep(gap_id));
  }
  s.orthogonality = mean_estimate(keep(orth));
  s.pinning_gap = mean_estimate(keep(pin));
  s.v_end = keep(vend);
  return s;
}

namespace {

void finish_hjb(HjbReport& r, double ss, std::size_t np) {
  r.l2_gradient = np ? std::sqrt(ss / static_cast<double>(np)) : 0.0;
  r.pass = r.max_gradient <= r.tolerance && r.max_terminal <= 1e-12 && r.pde.pass;
}

}  // namespace

HjbReport hjb_necessary_condition(const MartingaleJ& J, const CoefficientSet& coeffs, const ProbeGrid& probe,
                                  double pde_tol) {
  HjbReport r;
  r.pde = verification_pde_residual(J, coeffs, probe, pde_tol);
  double ss = 0.0;
  std::size_t np = 0;
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t i = 0; i < probe.x.n; ++i) {
      const double t = probe.t.at(k), x = probe.x.at(i);
      const double e = coeffs.rho(t, x) * J.gradient(t, x) + J.a() - J.H()(t, x);
      r.max_gradient = std::max(r.max_gradient, std::abs(e));
      ss += e * e;
      ++np;
    }
  const FieldTX& H = J.H();
  const Axis& xa = H.x_axis();
  const std::size_t kT = H.t_axis().n - 1;
  for (std::size_t i = 0; i < xa.n; ++i)
    r.max_terminal = std::max(r.max_terminal, std::abs((H.at(kT, i) - J.a()) - (coeffs.g(xa.at(i)) - J.a())));
  finish_hjb(r, ss, np);
  return r;
}

HjbReport hjb_necessary_condition(const GeneralJ& J, const FieldTVX& F, const FieldTX& H,
                                  const CoefficientSet& coeffs, const ProbeGrid& probe, double pde_tol) {
  HjbReport r;
  r.pde = verification_pde_residual(J, coeffs, probe, pde_tol);
  double ss = 0.0;
  std::size_t np = 0;
  for (std::size_t k = 0; k < probe.t.n; ++k)
    for (std::size_t j = 0; j < probe.v.n; ++j)
      for (std::size_t i = 0; i < probe.x.n; ++i) {
        const double t = probe.t.at(k), v = probe.v.at(j), x = probe.x.at(i);
        const double e = coeffs.rho(t, x) * J.gradient(t, v, x) + J.F(t, v, x) - J.H(t, x);
        r.max_gradient = std::max(r.max_gradient, std::abs(e));
        ss += e * e;
        ++np;
      }
  const Axis& va = F.v_axis();
  const Axis& xa = F.x_axis();
  const std::size_t kT = F.t_axis().n - 1;
  const double T = F.t_axis().hi;
  for (std::size_t j = 0; j < va.n; ++j)
    for (std::size_t i = 0; i < xa.n; ++i) {
      const double x = xa.at(i), v = va.at(j);
      if (!H.covers(T, x)) throw Error(ErrorKind::out_of_domain, "F grid extends beyond the H grid");
      r.max_terminal = std::max(r.max_terminal, std::abs((H(T, x) - F.at(kT, j, i)) - (coeffs.g(x) - v)));
    }
  finish_hjb(r, ss, np);
  return r;
}

const char* to_string(StrategySpec::Kind k) noexcept {
  switch (k) {
    case StrategySpec::Kind::bridge: return "bridge";
    case StrategySpec::Kind::affine: return "affine";
    case StrategySpec::Kind::scaled_bridge: return "scaled_bridge";
    case StrategySpec::Kind::time_shifted_bridge: return "time_shifted_bridge";
    case StrategySpec::Kind::zero: return "zero";
  }
  return "unknown";
}

ControlLaw StrategySpec::control(const CoefficientSet& coeffs) const {
  switch (kind) {
    case Kind::zero: return ControlLaw::zero();
    case Kind::affine:
      if (!affine.u0 || !affine.u1) throw Error(ErrorKind::configuration, "affine strategy '" + name + "' is incomplete");
      return ControlLaw::strategy(affine.as_function());
    case Kind::bridge:
    case Kind::scaled_bridge:
    case Kind::time_shifted_bridge: break;
  }
  if (field == nullptr) throw Error(ErrorKind::configuration, "bridge strategy '" + name + "' has no phi field");
  if (kind != Kind::time_shifted_bridge)
    return half_bridge_control(*field, coeffs, kind == Kind::bridge ? 1.0 : scale);
  const PhiField* f = field;
  const double s = shift, horizon = field->horizon();
  return ControlLaw{[f, &coeffs, s, horizon](double t, double v, double x, double& tv, double& a) {
                      const double ts = std::min(t + s, horizon - 1e-9);
                      double gv = 0.0, gx = 0.0;
                      if (!f->log_gradient(ts, v, x, gv, gx)) return false;
                      tv = 0.0;
                      a = coeffs.rho(t, x) * gx;
                      return true;
                    },
                    false};
}

TournamentReport optimality_tournament(const CoefficientSet& coeffs, const PriceFn& price,
                                       const std::vector<StrategySpec>& strategies, const TournamentOptions& o) {
  if (strategies.empty()) throw Error(ErrorKind::configuration, "tournament needs at least one strategy");
  if (o.reference >= strategies.size()) throw Error(ErrorKind::configuration, "tournament reference out of range");
  TournamentReport rep;
  rep.reference = o.reference;
  WealthStudyOptions so = o.study;
  so.keep_per_path = false;
  for (const StrategySpec& spec : strategies) {
    const WealthStudy s = wealth_study(coeffs, spec.control(coeffs), WealthStudyInputs{price, nullptr, nullptr}, so);
    TournamentEntry e;
    e.name = spec.name;
    e.kind = to_string(spec.kind);
    e.wealth = s.wealth;
    e.ks = s.v_end.empty() ? 1.0 : ks_statistic(s.v_end, coeffs.m_star);
    e.admissible = e.ks <= o.ks_gate;
    e.pinning_gap = s.pinning_gap.mean;
    if (o.j_bound) e.within_j_bound = e.wealth.mean <= *o.j_bound + 3.0 * e.wealth.se;
    rep.entries.push_back(std::move(e));
  }
  const TournamentEntry& ref = rep.entries[o.reference];
  std::size_t admissible_competitors = 0;
  bool beaten = false;
  for (std::size_t i = 0; i < rep.entries.size(); ++i) {
    TournamentEntry& e = rep.entries[i];
    e.gap_to_reference = ref.wealth.mean - e.wealth.mean;
    e.joint_se = joint_se(ref.wealth.se, e.wealth.se);
    e.reference_wins = e.gap_to_reference >= -o.se_multiple * e.joint_se;
    e.strictly_beaten = e.gap_to_reference > o.se_multiple * e.joint_se;
    if (i == o.reference || !e.admissible) continue;
    ++admissible_competitors;
    if (!e.reference_wins) beaten = true;
  }
  rep.empty_warning = admissible_competitors == 0;
  rep.pass = ref.admissible && !beaten;
  return rep;
}

}  // namespace kyleback
