#include "stages.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "kyleback/bridge.hpp"
#include "kyleback/density_fd.hpp"
#include "kyleback/equilibrium.hpp"
#include "kyleback/errors.hpp"
#include "kyleback/filtering.hpp"
#include "kyleback/phi_grid.hpp"
#include "kyleback/rng.hpp"
#include "kyleback/stats.hpp"

namespace kyleback::cli {

namespace fs = std::filesystem;

namespace {

json mean_json(const MeanEstimate& m) { return {{"mean", m.mean}, {"se", m.se}, {"n", m.n}}; }

json residual_json(const ResidualReport& r) {
  return {{"max_abs", r.max_abs}, {"l2", r.l2}, {"tolerance", r.tolerance}, {"n_points", r.n_points}, {"pass", r.pass}};
}

json verification_json(const VerificationReport& r) {
  return {{"max_pde", r.max_pde},
          {"l2_pde", r.l2_pde},
          {"max_gradient", r.max_gradient},
          {"tolerance", r.tolerance},
          {"n_points", r.n_points},
          {"pass", r.pass}};
}

Fn1 constant(double c) {
  return [c](double) { return c; };
}

AffineStrategy zero_strategy() {
  return AffineStrategy{[](double, double) { return 0.0; }, [](double, double) { return 0.0; }};
}

// Rebuilds a (t, x) field from the long-format CSV written by the pde stage.
FieldTX read_field_tx(const fs::path& path, const std::string& expected_hash) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::array<double, 3>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.find("config_hash=" + expected_hash) == std::string::npos)
        throw Error(ErrorKind::configuration, path.string() + " was written under a different config");
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::array<double, 3> r{};
    std::istringstream cells(line);
    std::string cell;
    for (double& v : r) {
      if (!std::getline(cells, cell, ',')) throw Error(ErrorKind::io, "malformed row in " + path.string());
      v = std::stod(cell);
    }
    rows.push_back(r);
  }
  std::set<double> ts, xs;
  for (const auto& r : rows) {
    ts.insert(r[0]);
    xs.insert(r[1]);
  }
  if (ts.size() < 2 || xs.size() < 2 || ts.size() * xs.size() != rows.size())
    throw Error(ErrorKind::io, path.string() + " is not a full (t, x) grid");
  FieldTX f(Axis{*ts.begin(), *ts.rbegin(), ts.size()}, Axis{*xs.begin(), *xs.rbegin(), xs.size()}, 0.0);
  const std::vector<double> tv(ts.begin(), ts.end()), xv(xs.begin(), xs.end());
  for (const auto& r : rows) {
    const auto k = static_cast<std::size_t>(std::lower_bound(tv.begin(), tv.end(), r[0]) - tv.begin());
    const auto i = static_cast<std::size_t>(std::lower_bound(xv.begin(), xv.end(), r[1]) - xv.begin());
    f.at(k, i) = r[2];
  }
  return f;
}

}  // namespace

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"validate", "simulate", "bridge", "affine-check",
                                              "filter",   "pde",      "equilibrium"};
  return names;
}

Runner::Runner(Scenario scenario, fs::path out, bool strict)
    : s_(std::move(scenario)), m_(build_model(s_)), out_(std::move(out)), strict_(strict), hash_(hex64(s_.hash())) {
  const fs::path manifest = out_ / "manifest.json";
  if (fs::exists(manifest)) {
    json prior;
    try {
      prior = json::parse(read_file(manifest));
    } catch (const json::parse_error&) {
      throw Error(ErrorKind::io, manifest.string() + " is not valid JSON");
    }
    const std::string other = prior.value("config_hash", std::string());
    if (other != hash_)
      throw Error(ErrorKind::configuration, "output directory " + out_.string() + " holds results of config " + other +
                                                ", refusing to mix with " + hash_);
    const json files = prior.value("files", json::object()), stages = prior.value("stages", json::object());
    for (const auto& [k, v] : files.items()) files_[k] = v;
    for (const auto& [k, v] : stages.items()) stages_[k] = v;
  }
  std::error_code ec;
  fs::create_directories(out_ / "data", ec);
  fs::create_directories(out_ / "reports", ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + out_.string() + ": " + ec.message());
}

std::uint64_t Runner::seed_for(const char* stage, std::uint64_t index) const {
  return derive_seed(s_.seed, stage, index);
}

void Runner::write_csv(const std::string& rel, const CsvTable& table, const std::string& stage) {
  const std::string text =
      table.to_string("config_hash=" + hash_ + " artifact=" + kArtifactVersion + " stage=" + stage);
  write_atomic(out_ / rel, text);
  files_[rel] = {{"bytes", text.size()}, {"fnv1a64", hex64(fnv1a64(text))}};
}

void Runner::write_report(const std::string& stage, json body, StageResult& r) {
  if (strict_ && !r.warnings.empty()) r.pass = false;
  body["config_hash"] = hash_;
  body["artifact_version"] = kArtifactVersion;
  body["stage"] = stage;
  body["pass"] = r.pass;
  body["warnings"] = r.warnings;
  body["strict"] = strict_;
  const std::string rel = "reports/" + stage + ".json";
  const std::string text = body.dump(2) + "\n";
  write_atomic(out_ / rel, text);
  files_[rel] = {{"bytes", text.size()}, {"fnv1a64", hex64(fnv1a64(text))}};
}

StageResult Runner::run(const std::string& stage) {
  StageResult r;
  try {
    if (stage == "validate") r = validate();
    else if (stage == "simulate") r = simulate();
    else if (stage == "bridge") r = bridge();
    else if (stage == "affine-check") r = affine_check();
    else if (stage == "filter") r = filter();
    else if (stage == "pde") r = pde();
    else if (stage == "equilibrium") r = equilibrium();
    else throw Error(ErrorKind::configuration, "unknown stage '" + stage + "'");
  } catch (const Error& e) {
    // numerical failures are check failures; configuration and IO problems abort the run
    if (e.kind() == ErrorKind::configuration || e.kind() == ErrorKind::io) throw;
    r = StageResult{stage, false, {}};
    write_report(stage, {{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}}, r);
  }
  stages_[stage] = {{"pass", r.pass}, {"warnings", r.warnings}};
  return r;
}

void Runner::finish(const std::string& started_at) {
  json manifest = {{"config_hash", hash_},
                   {"artifact_version", kArtifactVersion},
                   {"started_at", started_at},
                   {"finished_at", utc_now()},
                   {"config", s_.to_json()},
                   {"stages", stages_},
                   {"files", files_}};
  write_atomic(out_ / "manifest.json", manifest.dump(2) + "\n");
}

StageResult Runner::validate() {
  StageResult r{"validate", false, {}};
  const AssumptionReport a = validate_assumptions(m_.coeffs, s_.probe.grid());
  r.pass = a.pass;
  write_report("validate",
               {{"model", m_.coeffs.name},
                {"preset", s_.preset},
                {"lipschitz", {{"b", a.lipschitz_b}, {"sigma", a.lipschitz_sigma}, {"mu", a.lipschitz_mu},
                               {"rho", a.lipschitz_rho}, {"declared", a.declared_lipschitz}}},
                {"min_sigma", a.min_sigma},
                {"min_rho", a.min_rho},
                {"g_increasing", a.g_increasing},
                {"failures", a.failures}},
               r);
  return r;
}

StageResult Runner::simulate() {
  StageResult r{"simulate", false, {}};
  const auto& cfg = s_.simulate;
  const auto paths = simulate_reference(m_.coeffs, TimeGrid{0.0, s_.horizon, cfg.n_steps}, seed_for("simulate"),
                                        cfg.n_paths);
  CsvTable table({"path", "t", "V", "X", "Y", "B1", "B2"});
  std::vector<double> v_end, x_end;
  std::size_t terminated = 0;
  bool finite = true;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const PathBundle& b = paths[p];
    if (b.terminated_early) ++terminated;
    v_end.push_back(b.V.back());
    x_end.push_back(b.X.back());
    finite = finite && std::isfinite(b.V.back()) && std::isfinite(b.X.back());
    if (p < cfg.export_paths)
      for (std::size_t i = 0; i < b.size(); ++i)
        table.add_row({static_cast<double>(p), b.t[i], b.V[i], b.X[i], b.Y[i], b.B1[i], b.B2[i]});
  }
  write_csv("data/reference_paths.csv", table, "simulate");
  r.pass = finite && terminated == 0;
  write_report("simulate",
               {{"n_paths", paths.size()},
                {"n_steps", cfg.n_steps},
                {"seed", std::to_string(seed_for("simulate"))},
                {"V_T", mean_json(mean_estimate(v_end))},
                {"X_T", mean_json(mean_estimate(x_end))},
                {"n_terminated", terminated}},
               r);
  return r;
}

StageResult Runner::bridge() {
  StageResult r{"bridge", false, {}};
  const auto& cfg = s_.bridge;
  const CoefficientSet& c = m_.coeffs;
  const NuMeasure nu = build_nu(c.m_star, c, cfg.n_atoms);
  const double lambda = cfg.lambda > 0.0 ? cfg.lambda : 0.1;

  std::unique_ptr<LinearGaussianDensity> gaussian;
  std::unique_ptr<FokkerPlanckDensity> fp;
  const DensityModel* density = nullptr;
  if (cfg.backend == "gaussian") {
    if (!c.linear) throw Error(ErrorKind::configuration, "the gaussian backend needs a linear-Gaussian model");
    gaussian = std::make_unique<LinearGaussianDensity>(*c.linear, c.T);
    density = gaussian.get();
  } else {
    FokkerPlanckConfig fc;
    fc.v = cfg.v.axis();
    fc.x = cfg.x.axis();
    fc.n_steps = cfg.density_steps;
    fp = estimate_density_fd(c, fc);
    density = fp.get();
  }

  json body = {{"backend", density->backend()}, {"n_atoms", nu.atoms.size()}, {"lambda", lambda}};
  try {
    const ProperReport pr = check_proper(*density, nu, c, lambda);
    body["proper"] = {{"pass", pr.pass},
                      {"max_scaled_eta", pr.max_scaled_eta_overall},
                      {"exp_moment", pr.exp_moment},
                      {"exp_moment_finite", pr.exp_moment_finite}};
    if (!pr.pass) {
      write_report("bridge", body, r);
      return r;
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::improper_conditioning) throw;
    body["proper"] = {{"pass", false}, {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}};
    write_report("bridge", body, r);
    return r;
  }

  std::unique_ptr<PhiField> phi;
  if (gaussian) {
    phi = make_gaussian_phi(*gaussian, nu, c);
  } else {
    GridPhiConfig g;
    g.v = cfg.v.axis();
    g.x = cfg.x.axis();
    g.n_steps = cfg.grid_steps;
    g.terminal_gap = cfg.terminal_gap;
    phi = std::make_unique<GridPhi>(c, nu, *density, g);
  }

  BridgeConfig bc;
  bc.n_paths = cfg.n_paths;
  bc.n_steps = cfg.n_steps;
  bc.delta = cfg.delta;
  bc.seed = seed_for("bridge");
  const auto paths = simulate_full_bridge(c, *phi, bc);
  const PinningReport pin = pinning_check(paths, c, PinningTolerances{cfg.delta, {}, {}}, bc.truncation_levels);
  const TerminalLawReport law = terminal_law_check(paths, c.m_star, cfg.ks_threshold);

  CsvTable table({"path", "t_end", "V", "X", "gap", "truncated", "terminated"});
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const PathBundle& b = paths[p];
    table.add_row({static_cast<double>(p), b.t.back(), b.V.back(), b.X.back(), std::abs(b.V.back() - c.g(b.X.back())),
                   b.truncated ? 1.0 : 0.0, b.terminated_early ? 1.0 : 0.0});
  }
  write_csv("data/bridge_terminal.csv", table, "bridge");

  std::size_t capped = 0;
  for (const PathBundle& b : paths) capped += b.truncated ? 1 : 0;
  if (capped > 0) r.warnings.push_back(std::to_string(capped) + " paths hit the control cap");
  if (pin.n_terminated > 0) r.warnings.push_back(std::to_string(pin.n_terminated) + " paths terminated early");

  r.pass = pin.pass && law.pass;
  body["seed"] = std::to_string(bc.seed);
  body["pinning"] = {{"mean", pin.mean},       {"se", pin.se},           {"median", pin.median},
                     {"p95", pin.p95},         {"tol_mean", pin.tol_mean}, {"tol_p95", pin.tol_p95},
                     {"n_paths", pin.n_paths}, {"pass", pin.pass}};
  body["truncation"] = {{"levels", pin.levels}, {"fraction_reached", pin.truncated_fraction}};
  body["terminal_law"] = {{"ks", law.ks},     {"w1", law.w1},         {"ks_threshold", law.ks_threshold},
                          {"n_used", law.n_used}, {"n_excluded", law.n_excluded}, {"pass", law.pass}};
  write_report("bridge", body, r);
  return r;
}

StageResult Runner::affine_check() {
  StageResult r{"affine-check", false, {}};
  const ProbeGrid probe = s_.probe.grid();
  json body;
  CompatibilityReport rep;
  AffineStrategy strategy = zero_strategy();
  if (m_.linear) {
    const LinearReferenceModel& lm = *m_.linear;
    strategy = lm.strategy;
    rep = compatibility_residual(strategy, m_.coeffs, lm.h, probe);
    CsvTable riccati({"t", "S"});
    for (std::size_t i = 0; i < lm.S.t.size(); ++i) riccati.add_row({lm.S.t[i], lm.S.S[i]});
    write_csv("data/riccati.csv", riccati, "affine-check");
    body["riccati"] = {{"blow_up", lm.S.blow_up}, {"S_T", lm.S.S.back()}, {"forcing", lm.S.forcing}};
  } else {
    // the Brownian preset pairs with the zero strategy and h = 0
    rep = compatibility_residual(strategy, m_.coeffs, HSpec::zero(), probe);
  }
  const GrowthReport growth = linear_growth_check(strategy, probe);
  r.pass = rep.max_abs <= s_.pde.tol && growth.pass && !(m_.linear && m_.linear->S.blow_up);
  body["strategy"] = m_.linear ? "reference affine" : "zero";
  body["residual"] = {{"max_abs", rep.max_abs},
                      {"cubic_vanishes", rep.cubic_vanishes},
                      {"n_points", rep.n_points},
                      {"tolerance", s_.pde.tol}};
  body["growth"] = {{"k_max", growth.k_max}, {"pass", growth.pass}};
  write_report("affine-check", body, r);
  return r;
}

StageResult Runner::filter() {
  StageResult r{"filter", false, {}};
  const auto& cfg = s_.filter;
  const CoefficientSet& c = m_.coeffs;
  const TimeGrid grid = TimeGrid::bridge(s_.horizon, cfg.delta, cfg.n_steps);
  const auto paths = simulate_controlled(c, m_.strategy.as_function(), grid, seed_for("filter"), cfg.n_paths);

  LinearFilterModel oracle;
  TerminalLaw prior = TerminalLaw::point_mass(c.v0);
  const PDEConfig pcfg = PDEConfig::for_coefficients(c, s_.pde.dx, s_.pde.dv, s_.pde.dt);
  FieldTX H;
  if (m_.linear) {
    oracle = LinearFilterModel{constant(s_.f), constant(s_.g), constant(s_.k), constant(s_.beta), s_.s0, c.v0};
    if (s_.s0 > 0.0) prior = TerminalLaw::gaussian(c.v0, s_.s0);
    H = solve_H_general(c, m_.strategy, pcfg);
  } else {
    const double T = s_.horizon;
    oracle = LinearFilterModel{constant(0.0), constant(0.0), constant(0.0), [T](double t) { return 1.0 / (T - t); },
                               0.0, c.v0};
    H = solve_H_martingale(c, pcfg);
  }

  CsvTable table({"path", "t", "X", "P_particle", "P_oracle", "Z", "ESS"});
  json per_path = json::array();
  double rmse_sum = 0.0, z_sum = 0.0;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const ObservedPath obs = ObservedPath::from_bundle(paths[p]);
    ParticleFilterOptions po;
    po.n_particles = cfg.n_particles;
    po.seed = seed_for("filter_particles", p);
    const FilterPath pf = particle_filter(c, m_.strategy, prior, obs, po);
    const FilterPath kb = kalman_bucy_oracle(oracle, obs);
    double ss = 0.0;
    for (std::size_t i = 0; i < pf.P.size(); ++i) {
      ss += (pf.P[i] - kb.P[i]) * (pf.P[i] - kb.P[i]);
      table.add_row({static_cast<double>(p), pf.t[i], pf.X[i], pf.P[i], kb.P[i], pf.Z[i], pf.ESS[i]});
    }
    const double rmse = std::sqrt(ss / static_cast<double>(pf.P.size()));
    const FbsdeReport fb = fbsde_relation_check(H, c, pf);
    rmse_sum += rmse;
    z_sum += fb.z_relative_error;
    if (pf.degeneracy_warning) r.warnings.push_back("particle degeneracy on path " + std::to_string(p));
    if (fb.coverage_warning) r.warnings.push_back("X left the H grid on path " + std::to_string(p));
    per_path.push_back({{"rmse_vs_oracle", rmse},
                        {"rmse_P_vs_H", fb.rmse_P},
                        {"z_relative_error", fb.z_relative_error},
                        {"collapse_events", pf.collapse_events}});
  }
  write_csv("data/filter.csv", table, "filter");
  const double n = static_cast<double>(paths.size());
  const double rmse = rmse_sum / n, z_rel = z_sum / n;
  // P = H(t, X) and Z = rho H_x only hold when the filtered strategy is the equilibrium one,
  // which the affine (v - x) / (T - t) stand-in for the Brownian bridge is not.
  const bool z_gated = m_.linear.has_value();
  r.pass = rmse <= cfg.rmse_tol && (!z_gated || z_rel <= cfg.z_tol);
  write_report("filter",
               {{"n_paths", paths.size()},
                {"n_particles", cfg.n_particles},
                {"rmse_vs_oracle", rmse},
                {"z_relative_error", z_rel},
                {"rmse_tol", cfg.rmse_tol},
                {"z_tol", cfg.z_tol},
                {"z_gated", z_gated},
                {"paths", per_path}},
               r);
  return r;
}

StageResult Runner::pde() {
  StageResult r{"pde", false, {}};
  const CoefficientSet& c = m_.coeffs;
  const ProbeGrid probe = s_.probe.grid();
  const PDEConfig cfg = PDEConfig::for_coefficients(c, s_.pde.dx, s_.pde.dv, s_.pde.dt);
  json body = {{"grid", {{"nx", cfg.x.n}, {"nv", cfg.v.n}, {"n_t", cfg.n_t}}}};

  if (!m_.linear) {
    const FieldTX H = solve_H_martingale(c, cfg);
    write_csv("data/H.csv", field_table(H, "H"), "pde");
    const ResidualReport b0 = compatibility_b0(c, probe, s_.pde.tol);
    body["compatibility"] = residual_json(b0);
    bool all_pass = b0.pass;
    CsvTable j0({"a", "x", "J"});
    json js = json::array();
    for (double a : {-1.0, 0.0, 1.0}) {
      const MartingaleJ J = build_J_martingale_case(H, c, a);
      const VerificationReport v = verification_pde_residual(J, c, probe, s_.pde.j_tol);
      all_pass = all_pass && v.pass;
      json entry = verification_json(v);
      entry["a"] = a;
      entry["f_x_dependence"] = J.f_x_dependence();
      js.push_back(entry);
      for (std::size_t i = 0; i < H.x_axis().n; ++i) j0.add_row({a, H.x_axis().at(i), J.field().at(0, i)});
    }
    write_csv("data/J0.csv", j0, "pde");
    body["verification"] = js;
    r.pass = all_pass;
  } else {
    FixedPointStats stats;
    const FieldTX H = solve_H_general(c, m_.strategy, cfg, &stats);
    const FieldTVX F = solve_F(c, m_.strategy, cfg);
    write_csv("data/H.csv", field_table(H, "H"), "pde");
    CsvTable f0({"v", "x", "F"});
    for (std::size_t j = 0; j < F.v_axis().n; ++j)
      for (std::size_t i = 0; i < F.x_axis().n; ++i) f0.add_row({F.v_axis().at(j), F.x_axis().at(i), F.at(0, j, i)});
    write_csv("data/F0.csv", f0, "pde");

    const GeneralCompatibilityReport comp = compatibility_general(c, m_.strategy, H, F, probe);
    JOptions opt;
    opt.enforce = false;
    const GeneralJ J = build_J_general(H, F, c, cfg, opt);
    const VerificationReport v = verification_pde_residual(J, c, probe, s_.pde.j_tol);
    CsvTable j0({"v", "x", "J"});
    for (std::size_t j = 0; j < F.v_axis().n; ++j)
      for (std::size_t i = 0; i < F.x_axis().n; ++i)
        j0.add_row({F.v_axis().at(j), F.x_axis().at(i), J.field().at(0, j, i)});
    write_csv("data/J0.csv", j0, "pde");

    r.pass = comp.pass && v.pass;
    body["fixed_point"] = {{"max_iterations", stats.max_iterations}, {"total_iterations", stats.total_iterations}};
    body["compatibility"] = {{"max_first", comp.max_first},
                             {"l2_first", comp.l2_first},
                             {"second", residual_json(comp.second)},
                             {"tolerance", comp.tolerance},
                             {"pass", comp.pass}};
    json ver = verification_json(v);
    ver["source_x_dependence"] = J.source_x_dependence();
    body["verification"] = ver;
  }
  write_report("pde", body, r);
  return r;
}

StageResult Runner::equilibrium() {
  StageResult r{"equilibrium", false, {}};
  const fs::path h_path = out_ / "data" / "H.csv";
  if (!fs::exists(h_path))
    throw Error(ErrorKind::configuration, "missing upstream artifact data/H.csv (run the pde stage first)");
  const FieldTX H = read_field_tx(h_path, hash_);
  const CoefficientSet& c = m_.coeffs;
  const auto& cfg = s_.equilibrium;
  const PriceFn price = price_from_field(H);

  WealthStudyOptions study;
  study.n_paths = cfg.n_paths;
  study.n_steps = cfg.n_steps;
  study.delta = cfg.delta;
  study.seed = seed_for("equilibrium");
  json body = {{"seed", std::to_string(study.seed)}, {"n_paths", cfg.n_paths}, {"n_steps", cfg.n_steps}};

  if (!m_.linear) {
    if (!c.linear) throw Error(ErrorKind::configuration, "the tournament needs a linear-Gaussian model");
    const LinearGaussianDensity density(*c.linear, c.T);
    std::map<std::size_t, std::unique_ptr<GaussianMixturePhi>> fields;
    auto field_for = [&](std::size_t n_atoms) -> const PhiField* {
      const std::size_t n = n_atoms == 0 ? s_.bridge.n_atoms : n_atoms;
      auto& slot = fields[n];
      if (!slot) slot = make_gaussian_phi(density, build_nu(c.m_star, c, n), c);
      return slot.get();
    };
    std::vector<StrategySpec> specs;
    for (const CompetitorSpec& cs : cfg.competitors) {
      StrategySpec sp;
      sp.name = cs.name;
      sp.scale = cs.scale;
      sp.shift = cs.shift;
      if (cs.kind == "bridge") sp.kind = StrategySpec::Kind::bridge;
      else if (cs.kind == "scaled_bridge") sp.kind = StrategySpec::Kind::scaled_bridge;
      else if (cs.kind == "time_shifted_bridge") sp.kind = StrategySpec::Kind::time_shifted_bridge;
      else sp.kind = StrategySpec::Kind::zero;
      if (sp.kind != StrategySpec::Kind::zero) sp.field = field_for(cs.n_atoms);
      specs.push_back(sp);
    }
    const double t_end = TimeGrid::bridge(s_.horizon, cfg.delta, cfg.n_steps).t(cfg.n_steps);
    const JTable J(H, c, default_a_axis(H, c), {0.0, t_end});
    TournamentOptions to;
    to.study = study;
    to.ks_gate = cfg.ks_gate;
    to.j_bound = expected_J0(J, c);
    const TournamentReport rep = optimality_tournament(c, price, specs, to);

    CsvTable table({"index", "wealth", "se", "ks", "admissible", "pinning_gap", "gap_to_reference", "joint_se",
                    "strictly_beaten"});
    json entries = json::array();
    for (std::size_t i = 0; i < rep.entries.size(); ++i) {
      const TournamentEntry& e = rep.entries[i];
      table.add_row({static_cast<double>(i), e.wealth.mean, e.wealth.se, e.ks, e.admissible ? 1.0 : 0.0, e.pinning_gap,
                     e.gap_to_reference, e.joint_se, e.strictly_beaten ? 1.0 : 0.0});
      entries.push_back({{"name", e.name},
                         {"kind", e.kind},
                         {"wealth", e.wealth.mean},
                         {"se", e.wealth.se},
                         {"ks", e.ks},
                         {"admissible", e.admissible},
                         {"pinning_gap", e.pinning_gap},
                         {"gap_to_reference", e.gap_to_reference},
                         {"joint_se", e.joint_se},
                         {"reference_wins", e.reference_wins},
                         {"strictly_beaten", e.strictly_beaten},
                         {"within_j_bound", e.within_j_bound}});
    }
    write_csv("data/tournament.csv", table, "equilibrium");
    if (rep.empty_warning) r.warnings.push_back("no admissible competitor besides the reference");
    r.pass = rep.pass;
    body["expected_J0"] = *to.j_bound;
    body["ks_gate"] = cfg.ks_gate;
    body["tournament"] = entries;
  } else {
    const PDEConfig pcfg = PDEConfig::for_coefficients(c, s_.pde.dx, s_.pde.dv, s_.pde.dt);
    const FieldTVX F = solve_F(c, m_.strategy, pcfg);
    study.keep_per_path = true;
    const WealthStudy ws =
        wealth_study(c, ControlLaw::strategy(m_.strategy.as_function()), WealthStudyInputs{price, &F, nullptr}, study);
    const double joint = joint_se(ws.wealth.se, ws.via_F->se);
    const bool agree = std::abs(ws.wealth.mean - ws.via_F->mean) <= 3.0 * joint;

    JOptions opt;
    opt.enforce = false;
    const GeneralJ J = build_J_general(H, F, c, pcfg, opt);
    const HjbReport hjb = hjb_necessary_condition(J, F, H, c, s_.probe.grid(), s_.pde.j_tol);

    CsvTable table({"path", "wealth"});
    for (std::size_t p = 0; p < ws.wealth.per_path.size(); ++p)
      table.add_row({static_cast<double>(p), ws.wealth.per_path[p]});
    write_csv("data/wealth.csv", table, "equilibrium");
    if (ws.n_terminated > 0) r.warnings.push_back(std::to_string(ws.n_terminated) + " paths terminated early");

    r.pass = agree && hjb.pass;
    body["wealth"] = {{"mean", ws.wealth.mean}, {"se", ws.wealth.se}};
    body["wealth_via_F"] = {{"mean", ws.via_F->mean}, {"se", ws.via_F->se}};
    body["estimators_agree"] = agree;
    body["hjb"] = {{"max_gradient", hjb.max_gradient},
                   {"max_terminal", hjb.max_terminal},
                   {"pde", verification_json(hjb.pde)},
                   {"pass", hjb.pass}};
  }
  write_report("equilibrium", body, r);
  return r;
}

}  // namespace kyleback::cli
