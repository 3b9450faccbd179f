#include "kyleback/terminal_law.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <numbers>
#include <numeric>

#include "kyleback/errors.hpp"

namespace kyleback {

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::invalid_argument, "normal quantile needs p in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

TerminalLaw TerminalLaw::point_mass(double y) {
  TerminalLaw law;
  law.kind_ = Kind::point_mass;
  law.components_ = {{1.0, y, 0.0}};
  return law;
}

TerminalLaw TerminalLaw::gaussian(double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean))
    throw Error(ErrorKind::invalid_argument, "gaussian terminal law needs finite mean and variance > 0");
  TerminalLaw law;
  law.kind_ = Kind::gaussian;
  law.components_ = {{1.0, mean, variance}};
  return law;
}

TerminalLaw TerminalLaw::mixture(std::vector<Component> components) {
  if (components.empty()) throw Error(ErrorKind::invalid_argument, "mixture needs at least one component");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0) || !(c.variance > 0.0))
      throw Error(ErrorKind::invalid_argument, "mixture components need weight > 0 and variance > 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::invalid_argument, "mixture weights must sum to 1");
  TerminalLaw law;
  law.kind_ = Kind::mixture;
  law.components_ = std::move(components);
  return law;
}

TerminalLaw TerminalLaw::empirical(std::vector<double> samples) {
  if (samples.empty()) throw Error(ErrorKind::invalid_argument, "empirical law needs samples");
  std::sort(samples.begin(), samples.end());
  TerminalLaw law;
  law.kind_ = Kind::empirical;
  law.samples_ = std::move(samples);
  return law;
}

double TerminalLaw::cdf(double y) const {
  switch (kind_) {
    case Kind::point_mass:
      return y >= components_[0].mean ? 1.0 : 0.0;
    case Kind::empirical: {
      const auto it = std::upper_bound(samples_.begin(), samples_.end(), y);
      return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
    }
    default: {
      double acc = 0.0;
      for (const auto& c : components_) acc += c.weight * normal_cdf((y - c.mean) / std::sqrt(c.variance));
      return acc;
    }
  }
}

double TerminalLaw::pdf(double y) const {
  if (kind_ == Kind::point_mass || kind_ == Kind::empirical)
    throw Error(ErrorKind::invalid_argument, "law has no density");
  double acc = 0.0;
  for (const auto& c : components_) {
    const double s = std::sqrt(c.variance);
    acc += c.weight * normal_pdf((y - c.mean) / s) / s;
  }
  return acc;
}

double TerminalLaw::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::invalid_argument, "quantile needs p in (0,1)");
  switch (kind_) {
    case Kind::point_mass:
      return components_[0].mean;
    case Kind::gaussian:
      return components_[0].mean + std::sqrt(components_[0].variance) * normal_quantile(p);
    case Kind::empirical: {
      const auto n = samples_.size();
      auto idx = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
      idx = std::clamp<std::size_t>(idx, 1, n);
      return samples_[idx - 1];
    }
    case Kind::mixture: {
      double lo = 0.0, hi = 0.0;
      bool first = true;
      for (const auto& c : components_) {
        const double s = std::sqrt(c.variance);
        const double a = c.mean - 40.0 * s, b = c.mean + 40.0 * s;
        lo = first ? a : std::min(lo, a);
        hi = first ? b : std::max(hi, b);
        first = false;
      }
      for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(lo) + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

double TerminalLaw::mean() const {
  if (kind_ == Kind::empirical)
    return std::accumulate(samples_.begin(), samples_.end(), 0.0) / static_cast<double>(samples_.size());
  double acc = 0.0;
  for (const auto& c : components_) acc += c.weight * c.mean;
  return acc;
}

double TerminalLaw::variance() const {
  const double m = mean();
  if (kind_ == Kind::empirical) {
    double acc = 0.0;
    for (double s : samples_) acc += (s - m) * (s - m);
    return acc / static_cast<double>(samples_.size());
  }
  double acc = 0.0;
  for (const auto& c : components_) acc += c.weight * (c.variance + (c.mean - m) * (c.mean - m));
  return acc;
}

double TerminalLaw::expectation(const std::function<double(double)>& f) const {
  switch (kind_) {
    case Kind::point_mass:
      return f(components_[0].mean);
    case Kind::empirical: {
      double acc = 0.0;
      for (double s : samples_) acc += f(s);
      return acc / static_cast<double>(samples_.size());
    }
    default: {
      double acc = 0.0;
      for (const auto& c : components_) {
        const double s = std::sqrt(c.variance);
        auto integrand = [&](double z) { return f(c.mean + s * z) * normal_pdf(z); };
        acc += c.weight *
               boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -12.0, 12.0, 12, 1e-13);
      }
      return acc;
    }
  }
}

}  // namespace kyleback
