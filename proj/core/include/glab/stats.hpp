#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace glab {

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double var = 0.0;   ///< unbiased (n−1)
  double skew = 0.0;  ///< m₃ / m₂^{3/2}
  double se_mean = 0.0;
  double se_var = 0.0;
  double se_skew = 0.0;
  double sd() const;
};

/// Throws TooFewSamples when n < 2. The result does not depend on input order.
SummaryStats summarize(std::span<const double> samples);

/// sup |F_n − F|. Throws TooFewSamples when n < 2.
double ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf);

/// sup |F_a − F_b| by a merge scan over the sorted inputs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// ∫|F_a − F_b| dx. For equal sizes this is the mean absolute difference of
/// the sorted batches; unequal sizes are integrated exactly over the merged CDFs.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Fraction of samples in [lo, hi].
double fraction_within(std::span<const double> samples, double lo, double hi);

struct Histogram {
  double lo;
  double hi;
  std::vector<std::size_t> counts;
  std::size_t below = 0;
  std::size_t above = 0;

  double bin_width() const;
  double bin_center(std::size_t i) const;
  /// Counts normalized by (total samples × bin width).
  std::vector<double> density() const;
};

Histogram histogram(std::span<const double> samples, double lo, double hi, std::size_t bins);

}  // namespace glab
