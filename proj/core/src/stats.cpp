#include "kyleback/stats.hpp"

#include <algorithm>
#include <cmath>

#include "kyleback/errors.hpp"

namespace kyleback {

MeanEstimate mean_estimate(std::span<const double> xs) {
  MeanEstimate out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std_dev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  out.se = out.std_dev / std::sqrt(static_cast<double>(xs.size()));
  return out;
}

MeanEstimate paired_difference(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::invalid_argument, "paired samples differ in size");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return mean_estimate(d);
}

double joint_se(double se_a, double se_b) noexcept { return std::sqrt(se_a * se_a + se_b * se_b); }

double ks_statistic(std::vector<double> samples, const TerminalLaw& law) {
  if (samples.empty()) throw Error(ErrorKind::insufficient_sample, "KS statistic of an empty sample");
  if (law.kind() == TerminalLaw::Kind::empirical) return ks_two_sample(std::move(samples), law.samples());
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  if (law.kind() == TerminalLaw::Kind::point_mass) {
    const double y = law.mean();
    const auto below = std::lower_bound(samples.begin(), samples.end(), y) - samples.begin();
    const auto upto = std::upper_bound(samples.begin(), samples.end(), y) - samples.begin();
    return std::max(static_cast<double>(below) / n, 1.0 - static_cast<double>(upto) / n);
  }
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = law.cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorKind::insufficient_sample, "two-sample KS needs both samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double wasserstein1(std::vector<double> samples, const TerminalLaw& law) {
  if (samples.empty()) throw Error(ErrorKind::insufficient_sample, "W1 of an empty sample");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  if (law.kind() == TerminalLaw::Kind::point_mass) {
    double acc = 0.0;
    for (double s : samples) acc += std::abs(s - law.mean());
    return acc / static_cast<double>(n);
  }
  // W1 = integral of |F_n - F| over the real line, split at the sample points.
  auto segment = [&](double a, double b, double level) {
    constexpr int kSub = 16;
    const double h = (b - a) / kSub;
    double acc = 0.0;
    for (int s = 0; s < kSub; ++s) {
      const double x0 = a + s * h, xm = x0 + 0.5 * h, x1 = x0 + h;
      acc += h / 6.0 * (std::abs(level - law.cdf(x0)) + 4.0 * std::abs(level - law.cdf(xm)) +
                        std::abs(level - law.cdf(x1)));
    }
    return acc;
  };
  const double lo = std::min(samples.front(), law.quantile(1e-10));
  const double hi = std::max(samples.back(), law.quantile(1.0 - 1e-10));
  double total = segment(lo, samples.front(), 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (samples[i + 1] > samples[i])
      total += segment(samples[i], samples[i + 1], static_cast<double>(i + 1) / static_cast<double>(n));
  total += segment(samples.back(), hi, 1.0);
  return total;
}

double empirical_quantile(std::vector<double> xs, double p) {
  if (xs.empty()) throw Error(ErrorKind::insufficient_sample, "quantile of an empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = p * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

SlopeEstimate regression_slope(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw Error(ErrorKind::insufficient_sample, "regression needs at least three paired samples");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  SlopeEstimate out;
  if (sxx <= 0.0) return out;
  out.slope = sxy / sxx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - my - out.slope * (xs[i] - mx);
    rss += r * r;
  }
  out.se = std::sqrt(rss / (n - 2.0) / sxx);
  return out;
}

}  // namespace kyleback
