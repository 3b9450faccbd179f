#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kyleback/affine.hpp"
#include "kyleback/grid.hpp"
#include "kyleback/terminal_law.hpp"

namespace kyleback::cli {

using nlohmann::json;

struct AxisSpec {
  double lo = -5.0, hi = 5.0;
  std::size_t n = 101;
  Axis axis() const { return Axis{lo, hi, n}; }
};

struct CompetitorSpec {
  std::string name;
  std::string kind;  // bridge, scaled_bridge, time_shifted_bridge, zero
  double scale = 1.0;
  double shift = 0.0;
  std::size_t n_atoms = 0;  // bridge kinds; 0 uses the bridge stage's atom count
};

// Fully resolved scenario. Every field has a default, so a config only names what it changes.
struct Scenario {
  std::string name = "scenario";
  std::string preset = "brownian";  // brownian | linear
  std::uint64_t seed = 1;
  double horizon = 1.0;
  double v0 = 0.0, x0 = 0.0;

  // linear preset: b = f v + g x + k, u = beta (v - x), Riccati S0 and forcing
  double f = 0.0, g = 0.0, k = 0.0, beta = 1.0, s0 = 1.0, forcing = 1.0;

  json terminal_law = {{"kind", "gaussian"}, {"mean", 0.0}, {"variance", 1.0}};

  struct {
    std::size_t n_paths = 2000, n_steps = 200, export_paths = 10;
  } simulate;

  struct {
    std::string backend = "gaussian";  // gaussian | grid
    std::size_t n_paths = 2000, n_steps = 1000, n_atoms = 64;
    double delta = 1e-3;
    double lambda = 0.0;  // exponential-moment exponent; 0 picks 0.1
    double ks_threshold = 0.05;
    AxisSpec v{-5.0, 5.0, 81}, x{-5.0, 5.0, 81};
    std::size_t grid_steps = 60, density_steps = 100;
    double terminal_gap = 0.1;
  } bridge;

  struct {
    std::size_t n_paths = 3, n_particles = 2000, n_steps = 200;
    double delta = 1e-2;
    double rmse_tol = 0.05, z_tol = 0.1;
  } filter;

  struct {
    double dx = 0.05, dv = 0.2, dt = 1e-2;
    double tol = 1e-6;    // compatibility residuals
    double j_tol = 1e-3;  // value-function PDE residual
  } pde;

  struct {
    std::size_t n_paths = 2000, n_steps = 400;
    double delta = 1e-3, ks_gate = 0.05;
    std::vector<CompetitorSpec> competitors{{"bridge", "bridge", 1.0, 0.0, 0},
                                            {"bridge_4_atoms", "bridge", 1.0, 0.0, 4},
                                            {"half_drift", "scaled_bridge", 0.5, 0.0, 0},
                                            {"zero", "zero", 1.0, 0.0, 0}};
  } equilibrium;

  struct {
    AxisSpec t{0.0, 0.9, 10}, v{-2.0, 2.0, 9}, x{-2.0, 2.0, 9};
    ProbeGrid grid() const { return ProbeGrid{t.axis(), v.axis(), x.axis()}; }
  } probe;

  json to_json() const;
  // FNV-1a of the canonical JSON text.
  std::uint64_t hash() const;
  TerminalLaw law() const;
};

// Throws Error(configuration) on unknown keys, wrong types or unknown presets.
Scenario parse_scenario(const json& doc);
Scenario load_scenario(const std::string& path);

// Coefficients of the preset, plus the reference model (Riccati path, h) for the linear preset.
struct Model {
  CoefficientSet coeffs;
  std::optional<LinearReferenceModel> linear;
  AffineStrategy strategy;  // linear: beta (v - x); brownian: (v - x) / (T - t)
};

Model build_model(const Scenario& s);

}  // namespace kyleback::cli
