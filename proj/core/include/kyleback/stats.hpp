#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kyleback/terminal_law.hpp"

namespace kyleback {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;
  double std_dev = 0.0;
  std::size_t n = 0;
};

// Two-pass mean and standard error; summation order is the input order.
MeanEstimate mean_estimate(std::span<const double> xs);

// Paired difference a - b with its own standard error.
MeanEstimate paired_difference(std::span<const double> a, std::span<const double> b);

double joint_se(double se_a, double se_b) noexcept;

double ks_statistic(std::vector<double> samples, const TerminalLaw& law);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
double wasserstein1(std::vector<double> samples, const TerminalLaw& law);

// Empirical quantile with linear interpolation (type 7).
double empirical_quantile(std::vector<double> xs, double p);

// Least-squares slope of ys on xs with its standard error.
struct SlopeEstimate {
  double slope = 0.0;
  double se = 0.0;
};
SlopeEstimate regression_slope(std::span<const double> xs, std::span<const double> ys);

}  // namespace kyleback
