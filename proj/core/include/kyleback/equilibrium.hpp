#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kyleback/affine.hpp"
#include "kyleback/conditioning.hpp"
#include "kyleback/stats.hpp"
#include "kyleback/verification.hpp"

namespace kyleback {

// Price at (t, x): P_t = H(t, X_t).
using PriceFn = std::function<double(double t, double x)>;

// Bilinear inside the grid, linear extrapolation in x beyond its edges, t clamped.
PriceFn price_from_field(const FieldTX& H);

// V_T drawn from the last recorded state by one Euler step over the remaining time, using a
// stream keyed by (seed, path index) so every estimator sees the same value.
double terminal_value(const PathBundle& path, const CoefficientSet& coeffs);

struct WealthEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n_paths = 0;
  std::vector<double> per_path;  // int (V_T - P_t) alpha_t dt
  MeanEstimate non_extended;     // same integral without the last-value extension
};

// Trapezoid over the recorded nodes (stride 1), extended from the last node to T with its
// last integrand value. Paths that were terminated are skipped.
WealthEstimate expected_wealth(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                               const PriceFn& price);
// Prices supplied per path and node, e.g. from a filter.
WealthEstimate expected_wealth(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs,
                               const std::vector<std::vector<double>>& prices);

// int (F(s, V_s, X_s) - H(s, X_s)) alpha_s ds with the same quadrature.
WealthEstimate wealth_via_F(const std::vector<PathBundle>& paths, const CoefficientSet& coeffs, const FieldTVX& F,
                            const PriceFn& price);

// J(t, x; a) for a on an axis, kept only at the requested times; cubic in a, linear in x.
class JTable {
 public:
  JTable(const FieldTX& H, const CoefficientSet& coeffs, Axis a_axis, std::vector<double> times,
         const JOptions& opt = {});

  const Axis& a_axis() const noexcept { return a_; }
  const Axis& x_axis() const noexcept { return x_; }
  const std::vector<double>& times() const noexcept { return times_; }
  // Slice s is the stored time times()[s]; a is clamped to the axis.
  double operator()(std::size_t s, double x, double a) const;
  std::size_t slice_of(double t) const;  // stored slice nearest to t

 private:
  Axis a_, x_;
  std::vector<double> times_;
  std::vector<std::vector<double>> data_;  // [slice][a * nx + x]
};

// a axis spanning g over the x grid of H.
Axis default_a_axis(const FieldTX& H, const CoefficientSet& coeffs, std::size_t n = 121);

// int J(0, x0; a) m*(da) from the table.
double expected_J0(const JTable& table, const CoefficientSet& coeffs);

struct WealthStudyOptions {
  std::size_t n_paths = 10000;
  std::uint64_t seed = 0;
  std::size_t first_path = 0;
  std::size_t n_steps = 4000;
  double delta = 1e-3;
  bool quarter_delta = false;  // simulate to T - delta/4 and also report that integral
  double alpha_cap = 1e6;
  bool keep_per_path = false;
};

struct WealthStudyInputs {
  PriceFn price;
  const FieldTVX* F = nullptr;   // enables the wealth_via_F estimator
  const JTable* J = nullptr;     // enables the J identity; needs slices at 0 and at the path end
};

struct WealthStudy {
  WealthEstimate wealth;                  // to T - delta, last value extended
  std::optional<MeanEstimate> quarter;    // to T - delta/4, last value extended
  std::optional<WealthEstimate> via_F;
  // J identity over the simulated span: int_0^{t_end} q = J(0, x0; V_T) - J(t_end, X_end; V_T).
  std::optional<MeanEstimate> j_start, j_end, j_identity_gap;
  MeanEstimate orthogonality;  // V_T B2_{t_end}
  MeanEstimate pinning_gap;    // |V - g(X)| at t_end
  std::vector<double> v_end;   // V at t_end, surviving paths
  double t_end = 0.0;
  std::size_t n_terminated = 0;
  std::size_t n_truncated = 0;
};

// Streams paths through every estimator without storing them.
WealthStudy wealth_study(const CoefficientSet& coeffs, const ControlLaw& control, const WealthStudyInputs& inputs,
                         const WealthStudyOptions& options);

struct HjbReport {
  double max_gradient = 0.0;  // |rho J_x + F - H|
  double l2_gradient = 0.0;
  double max_terminal = 0.0;  // |H(T, x) - F(T, v, x) - (g(x) - v)| at nodes
  VerificationReport pde;
  double tolerance = 1e-10;
  bool pass = false;
};

// Martingale case: F is the constant a.
HjbReport hjb_necessary_condition(const MartingaleJ& J, const CoefficientSet& coeffs, const ProbeGrid& probe,
                                  double pde_tol = 1e-6);
HjbReport hjb_necessary_condition(const GeneralJ& J, const FieldTVX& F, const FieldTX& H,
                                  const CoefficientSet& coeffs, const ProbeGrid& probe, double pde_tol = 1e-6);

struct StrategySpec {
  enum class Kind { bridge, affine, scaled_bridge, time_shifted_bridge, zero };
  std::string name;
  Kind kind = Kind::zero;
  const PhiField* field = nullptr;  // bridge kinds; must outlive the control
  AffineStrategy affine;
  double scale = 1.0;
  double shift = 0.0;  // time_shifted_bridge: theta read at t + shift

  ControlLaw control(const CoefficientSet& coeffs) const;
};

const char* to_string(StrategySpec::Kind k) noexcept;

struct TournamentOptions {
  WealthStudyOptions study;
  double ks_gate = 0.05;
  double se_multiple = 2.0;
  std::size_t reference = 0;  // index of the bridge strategy
  std::optional<double> j_bound;  // E J(0, x0; V_T), for the upper-bound check
};

struct TournamentEntry {
  std::string name;
  std::string kind;
  WealthEstimate wealth;
  double ks = 0.0;
  bool admissible = false;
  double pinning_gap = 0.0;
  double gap_to_reference = 0.0;  // reference wealth minus this wealth
  double joint_se = 0.0;
  bool reference_wins = false;    // gap >= -se_multiple * joint_se
  bool strictly_beaten = false;   // gap > se_multiple * joint_se
  bool within_j_bound = true;
};

struct TournamentReport {
  std::vector<TournamentEntry> entries;
  std::size_t reference = 0;
  bool empty_warning = false;
  bool pass = false;  // reference admissible and not beaten by any admissible competitor
};

// Each competitor uses the same seed (common random numbers); the gate compares V at the
// path end with m*.
TournamentReport optimality_tournament(const CoefficientSet& coeffs, const PriceFn& price,
                                       const std::vector<StrategySpec>& strategies, const TournamentOptions& options);

}  // namespace kyleback
