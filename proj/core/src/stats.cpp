#include "glab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glab/errors.hpp"

namespace glab {

namespace {

void require(std::span<const double> s, const char* what) {
  if (s.size() < 2) {
    throw TooFewSamples(std::string(what) + " needs at least 2 samples, got " +
                        std::to_string(s.size()));
  }
}

std::vector<double> sorted(std::span<const double> s) {
  std::vector<double> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

double SummaryStats::sd() const { return std::sqrt(var); }

SummaryStats summarize(std::span<const double> samples) {
  require(samples, "summarize");
  // Sorting first makes the floating-point sums order independent.
  const std::vector<double> v = sorted(samples);
  const auto n = static_cast<double>(v.size());

  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;

  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;

  SummaryStats s;
  s.n = v.size();
  s.mean = mean;
  s.var = m2 * n / (n - 1.0);
  s.skew = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  s.se_mean = std::sqrt(s.var / n);
  // Normal-theory standard errors for the variance and the skewness; the
  // variance one uses the sample kurtosis so heavy tails are not understated.
  const double kurt_excess = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  s.se_var = s.var * std::sqrt(std::max(2.0 / (n - 1.0) + kurt_excess / n, 0.0));
  s.se_skew = n > 2.0 ? std::sqrt(6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0)))
                      : std::sqrt(6.0 / n);
  return s;
}

double ks_one_sample(std::span<const double> samples, const std::function<double(double)>& cdf) {
  require(samples, "ks_one_sample");
  const std::vector<double> v = sorted(samples);
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const double f = cdf(v[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                  std::abs(static_cast<double>(j) / n - f)});
    i = j;
  }
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  require(a, "ks_two_sample");
  require(b, "ks_two_sample");
  const std::vector<double> x = sorted(a);
  const std::vector<double> y = sorted(b);
  const auto na = static_cast<double>(x.size());
  const auto nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require(a, "wasserstein1");
  require(b, "wasserstein1");
  const std::vector<double> x = sorted(a);
  const std::vector<double> y = sorted(b);
  if (x.size() == y.size()) {
    double acc = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) acc += std::abs(x[k] - y[k]);
    return acc / static_cast<double>(x.size());
  }
  const auto na = static_cast<double>(x.size());
  const auto nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double prev = std::min(x.front(), y.front());
  double acc = 0.0;
  while (i < x.size() || j < y.size()) {
    const double v = j >= y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    acc += (v - prev) * std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    prev = v;
  }
  return acc;
}

double fraction_within(std::span<const double> samples, double lo, double hi) {
  if (samples.empty()) throw TooFewSamples("fraction_within needs samples");
  const auto inside = std::count_if(samples.begin(), samples.end(),
                                    [&](double x) { return x >= lo && x <= hi; });
  return static_cast<double>(inside) / static_cast<double>(samples.size());
}

double Histogram::bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }

double Histogram::bin_center(std::size_t i) const {
  return lo + (static_cast<double>(i) + 0.5) * bin_width();
}

std::vector<double> Histogram::density() const {
  std::size_t total = below + above;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) return out;
  const double norm = 1.0 / (static_cast<double>(total) * bin_width());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) * norm;
  return out;
}

Histogram histogram(std::span<const double> samples, double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw InvalidSpec("histogram needs hi > lo and at least one bin");
  Histogram h{lo, hi, std::vector<std::size_t>(bins, 0)};
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (double x : samples) {
    if (x < lo) {
      ++h.below;
    } else if (x > hi) {
      ++h.above;
    } else {
      auto k = static_cast<std::size_t>((x - lo) * scale);
      h.counts[std::min(k, bins - 1)]++;
    }
  }
  return h;
}

}  // namespace glab
