#pragma once

#include <cstddef>
#include <span>

namespace driftmon {

/// Phi^{-1}(0.95), the one-sided 95% standard normal quantile.
inline constexpr double kNormalQuantile95 = 1.6448536269514722;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double mean(std::span<const double> v);
/// Sample variance with n-1 denominator; 0 for fewer than two values.
double sample_variance(std::span<const double> v);
double sample_sd(std::span<const double> v);

double normal_cdf(double x);

/// Kolmogorov-Smirnov distance sup |F_n - Phi|.
double ks_distance_to_normal(std::span<const double> v);

}  // namespace driftmon
