#include "scenario.hpp"

#include <cerrno>
#include <cstdlib>
#include <set>

#include "kyleback/errors.hpp"
#include "kyleback/io.hpp"

namespace kyleback::cli {

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::configuration, "schema violation at " + where + ": " + what);
}

// Numbers may be JSON numbers or decimal strings (exact for seeds and tolerances).
double as_double(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty() || errno == ERANGE) schema_error(where, "not a decimal number");
    return v;
  }
  schema_error(where, "expected a number");
}

std::uint64_t as_u64(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer() && j.get<long long>() >= 0) return static_cast<std::uint64_t>(j.get<long long>());
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end != s.c_str() + s.size() || s.empty() || s[0] == '-' || errno == ERANGE)
      schema_error(where, "not an unsigned decimal integer");
    return v;
  }
  schema_error(where, "expected an unsigned integer");
}

std::size_t as_count(const json& j, const std::string& where) {
  const std::uint64_t v = as_u64(j, where);
  if (v == 0) schema_error(where, "must be positive");
  return static_cast<std::size_t>(v);
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) schema_error(where, "expected a string");
  return j.get<std::string>();
}

// Visits the members of an object, rejecting keys not in `known`.
template <class Fn>
void members(const json& obj, const std::string& where, const std::set<std::string>& known, Fn&& fn) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) schema_error(where + "." + key, "unknown key");
    fn(key, value, where + "." + key);
  }
}

AxisSpec parse_axis(const json& j, const std::string& where, AxisSpec a) {
  members(j, where, {"lo", "hi", "n"}, [&](const std::string& k, const json& v, const std::string& w) {
    if (k == "lo") a.lo = as_double(v, w);
    if (k == "hi") a.hi = as_double(v, w);
    if (k == "n") a.n = as_count(v, w);
  });
  if (!(a.hi > a.lo) || a.n < 2) schema_error(where, "axis needs lo < hi and n >= 2");
  return a;
}

json axis_json(const AxisSpec& a) { return {{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}}; }

void check_law(const json& j, const std::string& where) {
  const std::string kind = as_string(j.value("kind", json()), where + ".kind");
  if (kind == "gaussian") {
    members(j, where, {"kind", "mean", "variance"}, [](auto&&...) {});
    if (!(as_double(j.at("variance"), where + ".variance") > 0.0)) schema_error(where, "variance must be positive");
    (void)as_double(j.at("mean"), where + ".mean");
  } else if (kind == "point_mass") {
    members(j, where, {"kind", "value"}, [](auto&&...) {});
    (void)as_double(j.at("value"), where + ".value");
  } else if (kind == "mixture") {
    members(j, where, {"kind", "components"}, [](auto&&...) {});
    if (!j.at("components").is_array() || j.at("components").empty()) schema_error(where, "components must be a list");
    for (const auto& c : j.at("components")) {
      members(c, where + ".components", {"weight", "mean", "variance"}, [](auto&&...) {});
      for (const char* key : {"weight", "mean", "variance"}) (void)as_double(c.at(key), where + ".components");
    }
  } else {
    schema_error(where + ".kind", "unknown terminal law '" + kind + "'");
  }
}

}  // namespace

json Scenario::to_json() const {
  json comps = json::array();
  for (const auto& c : equilibrium.competitors)
    comps.push_back({{"name", c.name}, {"kind", c.kind}, {"scale", c.scale}, {"shift", c.shift}, {"n_atoms", c.n_atoms}});
  return {
      {"name", name},
      {"preset", preset},
      {"seed", std::to_string(seed)},
      {"horizon", horizon},
      {"v0", v0},
      {"x0", x0},
      {"params", {{"f", f}, {"g", g}, {"k", k}, {"beta", beta}, {"s0", s0}, {"forcing", forcing}}},
      {"terminal_law", terminal_law},
      {"simulate", {{"n_paths", simulate.n_paths}, {"n_steps", simulate.n_steps}, {"export_paths", simulate.export_paths}}},
      {"bridge",
       {{"backend", bridge.backend},
        {"n_paths", bridge.n_paths},
        {"n_steps", bridge.n_steps},
        {"n_atoms", bridge.n_atoms},
        {"delta", bridge.delta},
        {"lambda", bridge.lambda},
        {"ks_threshold", bridge.ks_threshold},
        {"v", axis_json(bridge.v)},
        {"x", axis_json(bridge.x)},
        {"grid_steps", bridge.grid_steps},
        {"density_steps", bridge.density_steps},
        {"terminal_gap", bridge.terminal_gap}}},
      {"filter",
       {{"n_paths", filter.n_paths},
        {"n_particles", filter.n_particles},
        {"n_steps", filter.n_steps},
        {"delta", filter.delta},
        {"rmse_tol", filter.rmse_tol},
        {"z_tol", filter.z_tol}}},
      {"pde", {{"dx", pde.dx}, {"dv", pde.dv}, {"dt", pde.dt}, {"tol", pde.tol}, {"j_tol", pde.j_tol}}},
      {"equilibrium",
       {{"n_paths", equilibrium.n_paths},
        {"n_steps", equilibrium.n_steps},
        {"delta", equilibrium.delta},
        {"ks_gate", equilibrium.ks_gate},
        {"competitors", comps}}},
      {"probe", {{"t", axis_json(probe.t)}, {"v", axis_json(probe.v)}, {"x", axis_json(probe.x)}}},
  };
}

std::uint64_t Scenario::hash() const { return fnv1a64(to_json().dump()); }

TerminalLaw Scenario::law() const {
  const std::string kind = terminal_law.at("kind");
  if (kind == "gaussian")
    return TerminalLaw::gaussian(as_double(terminal_law.at("mean"), "terminal_law.mean"),
                                 as_double(terminal_law.at("variance"), "terminal_law.variance"));
  if (kind == "point_mass") return TerminalLaw::point_mass(as_double(terminal_law.at("value"), "terminal_law.value"));
  std::vector<TerminalLaw::Component> comps;
  for (const auto& c : terminal_law.at("components"))
    comps.push_back({as_double(c.at("weight"), "weight"), as_double(c.at("mean"), "mean"),
                     as_double(c.at("variance"), "variance")});
  return TerminalLaw::mixture(std::move(comps));
}

Scenario parse_scenario(const json& doc) {
  Scenario s;
  const std::set<std::string> top{"schema", "name",   "preset", "seed",   "horizon",     "v0",    "x0",
                                  "params", "terminal_law", "simulate", "bridge", "filter", "pde", "equilibrium",
                                  "probe"};
  if (!doc.contains("seed")) schema_error("$", "seed is required (no implicit entropy)");
  if (!doc.contains("preset")) schema_error("$", "preset is required");
  members(doc, "$", top, [&](const std::string& key, const json& v, const std::string& w) {
    if (key == "schema") {
      if (as_string(v, w) != "kyleback.scenario/1") schema_error(w, "unsupported schema");
    } else if (key == "name") {
      s.name = as_string(v, w);
    } else if (key == "preset") {
      s.preset = as_string(v, w);
      if (s.preset != "brownian" && s.preset != "linear") schema_error(w, "unknown preset '" + s.preset + "'");
    } else if (key == "seed") {
      s.seed = as_u64(v, w);
    } else if (key == "horizon") {
      s.horizon = as_double(v, w);
      if (!(s.horizon > 0.0)) schema_error(w, "horizon must be positive");
    } else if (key == "v0") {
      s.v0 = as_double(v, w);
    } else if (key == "x0") {
      s.x0 = as_double(v, w);
    } else if (key == "params") {
      members(v, w, {"f", "g", "k", "beta", "s0", "forcing"}, [&](const std::string& k, const json& x, const std::string& ww) {
        const double d = as_double(x, ww);
        if (k == "f") s.f = d;
        if (k == "g") s.g = d;
        if (k == "k") s.k = d;
        if (k == "beta") s.beta = d;
        if (k == "s0") s.s0 = d;
        if (k == "forcing") s.forcing = d;
      });
    } else if (key == "terminal_law") {
      check_law(v, w);
      s.terminal_law = v;
    } else if (key == "simulate") {
      members(v, w, {"n_paths", "n_steps", "export_paths"}, [&](const std::string& k, const json& x, const std::string& ww) {
        if (k == "n_paths") s.simulate.n_paths = as_count(x, ww);
        if (k == "n_steps") s.simulate.n_steps = as_count(x, ww);
        if (k == "export_paths") s.simulate.export_paths = static_cast<std::size_t>(as_u64(x, ww));
      });
    } else if (key == "bridge") {
      members(v, w,
              {"backend", "n_paths", "n_steps", "n_atoms", "delta", "lambda", "ks_threshold", "v", "x", "grid_steps",
               "density_steps", "terminal_gap"},
              [&](const std::string& k, const json& x, const std::string& ww) {
                auto& b = s.bridge;
                if (k == "backend") {
                  b.backend = as_string(x, ww);
                  if (b.backend != "gaussian" && b.backend != "grid") schema_error(ww, "unknown backend");
                }
                if (k == "n_paths") b.n_paths = as_count(x, ww);
                if (k == "n_steps") b.n_steps = as_count(x, ww);
                if (k == "n_atoms") b.n_atoms = as_count(x, ww);
                if (k == "delta") b.delta = as_double(x, ww);
                if (k == "lambda") b.lambda = as_double(x, ww);
                if (k == "ks_threshold") b.ks_threshold = as_double(x, ww);
                if (k == "v") b.v = parse_axis(x, ww, b.v);
                if (k == "x") b.x = parse_axis(x, ww, b.x);
                if (k == "grid_steps") b.grid_steps = as_count(x, ww);
                if (k == "density_steps") b.density_steps = as_count(x, ww);
                if (k == "terminal_gap") b.terminal_gap = as_double(x, ww);
              });
    } else if (key == "filter") {
      members(v, w, {"n_paths", "n_particles", "n_steps", "delta", "rmse_tol", "z_tol"},
              [&](const std::string& k, const json& x, const std::string& ww) {
                auto& f = s.filter;
                if (k == "n_paths") f.n_paths = as_count(x, ww);
                if (k == "n_particles") f.n_particles = as_count(x, ww);
                if (k == "n_steps") f.n_steps = as_count(x, ww);
                if (k == "delta") f.delta = as_double(x, ww);
                if (k == "rmse_tol") f.rmse_tol = as_double(x, ww);
                if (k == "z_tol") f.z_tol = as_double(x, ww);
              });
    } else if (key == "pde") {
      members(v, w, {"dx", "dv", "dt", "tol", "j_tol"}, [&](const std::string& k, const json& x, const std::string& ww) {
        const double d = as_double(x, ww);
        if (!(d > 0.0)) schema_error(ww, "must be positive");
        if (k == "dx") s.pde.dx = d;
        if (k == "dv") s.pde.dv = d;
        if (k == "dt") s.pde.dt = d;
        if (k == "tol") s.pde.tol = d;
        if (k == "j_tol") s.pde.j_tol = d;
      });
    } else if (key == "equilibrium") {
      members(v, w, {"n_paths", "n_steps", "delta", "ks_gate", "competitors"},
              [&](const std::string& k, const json& x, const std::string& ww) {
                auto& e = s.equilibrium;
                if (k == "n_paths") e.n_paths = as_count(x, ww);
                if (k == "n_steps") e.n_steps = as_count(x, ww);
                if (k == "delta") e.delta = as_double(x, ww);
                if (k == "ks_gate") e.ks_gate = as_double(x, ww);
                if (k == "competitors") {
                  if (!x.is_array() || x.empty()) schema_error(ww, "expected a non-empty list");
                  e.competitors.clear();
                  for (const auto& c : x) {
                    CompetitorSpec cs;
                    members(c, ww, {"name", "kind", "scale", "shift", "n_atoms"},
                            [&](const std::string& ck, const json& cv, const std::string& cw) {
                              if (ck == "name") cs.name = as_string(cv, cw);
                              if (ck == "kind") cs.kind = as_string(cv, cw);
                              if (ck == "scale") cs.scale = as_double(cv, cw);
                              if (ck == "shift") cs.shift = as_double(cv, cw);
                              if (ck == "n_atoms") cs.n_atoms = static_cast<std::size_t>(as_u64(cv, cw));
                            });
                    static const std::set<std::string> kinds{"bridge", "scaled_bridge", "time_shifted_bridge", "zero"};
                    if (!kinds.count(cs.kind)) schema_error(ww, "unknown competitor kind '" + cs.kind + "'");
                    if (cs.name.empty()) schema_error(ww, "competitor needs a name");
                    e.competitors.push_back(cs);
                  }
                }
              });
    } else if (key == "probe") {
      members(v, w, {"t", "v", "x"}, [&](const std::string& k, const json& x, const std::string& ww) {
        if (k == "t") s.probe.t = parse_axis(x, ww, s.probe.t);
        if (k == "v") s.probe.v = parse_axis(x, ww, s.probe.v);
        if (k == "x") s.probe.x = parse_axis(x, ww, s.probe.x);
      });
    }
  });
  if (s.probe.t.hi >= s.horizon) schema_error("$.probe.t", "probe times must stay below the horizon");
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::configuration, "config " + path + " is not valid JSON: " + e.what());
  }
  return parse_scenario(doc);
}

Model build_model(const Scenario& s) {
  Model m;
  const auto c = [](double v) { return Fn1([v](double) { return v; }); };
  if (s.preset == "brownian") {
    m.coeffs = brownian_benchmark(s.law(), s.horizon);
    const double T = s.horizon;
    m.strategy = AffineStrategy{[T](double t, double x) { return -x / (T - t); },
                                [T](double t, double) { return 1.0 / (T - t); }};
  } else {
    LinearReferenceOptions opt;
    opt.horizon = s.horizon;
    opt.forcing = s.forcing;
    m.linear = linear_reference_model(c(s.f), c(s.g), c(s.k), c(s.beta), s.s0, opt);
    m.coeffs = m.linear->coeffs;
    m.coeffs.m_star = s.law();
    m.strategy = m.linear->strategy;
  }
  m.coeffs.v0 = s.v0;
  m.coeffs.x0 = s.x0;
  m.coeffs.name = s.name;
  return m;
}

}  // namespace kyleback::cli
