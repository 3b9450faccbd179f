#pragma once

#include <functional>
#include <vector>

namespace kyleback {

// Law of the terminal value V_T known to the insider.
class TerminalLaw {
 public:
  enum class Kind { point_mass, gaussian, mixture, empirical };

  struct Component {
    double weight;
    double mean;
    double variance;
  };

  static TerminalLaw point_mass(double y);
  static TerminalLaw gaussian(double mean, double variance);
  static TerminalLaw mixture(std::vector<Component> components);
  static TerminalLaw empirical(std::vector<double> samples);

  Kind kind() const noexcept { return kind_; }
  const std::vector<Component>& components() const noexcept { return components_; }
  const std::vector<double>& samples() const noexcept { return samples_; }

  double cdf(double y) const;
  // Density; throws for point masses and empirical laws.
  double pdf(double y) const;
  double quantile(double p) const;
  double mean() const;
  double variance() const;
  // E[f(Y)] by adaptive Gauss-Kronrod for continuous laws.
  double expectation(const std::function<double(double)>& f) const;

 private:
  TerminalLaw() = default;

  Kind kind_ = Kind::point_mass;
  std::vector<Component> components_;
  std::vector<double> samples_;  // sorted
};

double normal_cdf(double z) noexcept;
double normal_pdf(double z) noexcept;
double normal_quantile(double p);

}  // namespace kyleback
