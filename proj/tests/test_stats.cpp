#include <algorithm>
#include <cmath>
#include <doctest.h>
#include <numbers>
#include <vector>

#include "glab/errors.hpp"
#include "glab/rng.hpp"
#include "glab/stats.hpp"
#include "oracles.hpp"

using namespace glab;

namespace {

std::vector<double> normals(std::size_t n, double sd, std::uint64_t seed, std::uint64_t stream = 0) {
  RandomStream rng(seed, stream);
  std::vector<double> out(n);
  for (double& x : out) x = sd * rng.normal();
  return out;
}

// Brute-force ∫|F_a − F_b| on a fine grid; independent of the merge logic.
double w1_brute(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double lo = std::min(a.front(), b.front());
  const double hi = std::max(a.back(), b.back());
  const int n = 200000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * (i + 0.5) / n;
    const double fa = static_cast<double>(std::upper_bound(a.begin(), a.end(), x) - a.begin()) / a.size();
    const double fb = static_cast<double>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) / b.size();
    s += std::abs(fa - fb);
  }
  return s * (hi - lo) / n;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("summary of a tiny batch") {
  const std::vector<double> x{1, 2, 3};
  const SummaryStats s = summarize(x);
  CHECK(s.n == 3);
  CHECK(s.mean == 2.0);
  CHECK(s.var == 1.0);
  CHECK(s.skew == 0.0);
  CHECK(s.sd() == 1.0);
  CHECK(s.se_mean == doctest::Approx(1.0 / std::sqrt(3.0)));
}

TEST_CASE("summary moments against a known law") {
  const auto x = normals(1000000, 0.5, 1);
  const SummaryStats s = summarize(x);
  CHECK(std::abs(s.var - 0.25) < 3 * s.se_var);
  CHECK(s.se_var == doctest::Approx(0.25 * std::sqrt(2.0 / 1e6)).epsilon(0.02));
  CHECK(std::abs(s.skew) < 3 * s.se_skew);
  CHECK(s.se_skew == doctest::Approx(std::sqrt(6.0 / 1e6)).epsilon(0.01));
}

TEST_CASE("a symmetric batch has zero skewness exactly") {
  std::vector<double> x;
  for (int a = -50; a <= 50; ++a) x.push_back(a);
  CHECK(summarize(x).skew == 0.0);
  std::vector<double> y;
  for (int a = -7; a <= 7; ++a) y.push_back(0.25 * a);
  CHECK(summarize(y).skew == 0.0);
}

TEST_CASE("skewness sign of an asymmetric batch") {
  RandomStream rng(4, 0);
  std::vector<double> x(100000);
  for (double& v : x) v = -std::log(rng.uniform() + 1e-300);  // Exp(1), skewness 2
  const SummaryStats s = summarize(x);
  CHECK(s.skew == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("too few samples") {
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(summarize(one), TooFewSamples);
  CHECK_THROWS_AS(ks_one_sample(one, [](double) { return 0.5; }), TooFewSamples);
  CHECK_THROWS_AS(ks_two_sample(one, one), TooFewSamples);
  CHECK_THROWS_AS(wasserstein1(one, one), TooFewSamples);
}

TEST_CASE("one-sample KS") {
  const std::vector<double> zeros(1000, 0.0);
  const auto phi = [](double x) { return oracle::normal_cdf(x, 0, 1); };
  CHECK(ks_one_sample(zeros, phi) == doctest::Approx(0.5).epsilon(1e-15));

  // Written out by hand: the sup sits on one side of one of the two jumps.
  const std::vector<double> pm{-1.0, 1.0};
  const double expect = std::max({phi(-1.0), 0.5 - phi(-1.0), phi(1.0) - 0.5, 1.0 - phi(1.0)});
  CHECK(ks_one_sample(pm, phi) == doctest::Approx(expect).epsilon(1e-15));

  const double n = 1e5;
  const double crit = 1.95 * std::sqrt(1.0 / n) * 1.36;
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ok += ks_one_sample(normals(100000, 1.0, seed), phi) < crit;
  }
  CHECK(ok >= 99);
}

TEST_CASE("two-sample KS") {
  const auto a = normals(5000, 1.0, 2);
  CHECK(ks_two_sample(a, a) == 0.0);
  const std::vector<double> z{0, 0};
  const std::vector<double> o{1, 1};
  CHECK(ks_two_sample(z, o) == 1.0);
  // Ties across the two batches are handled as one jump.
  const std::vector<double> p{0, 1, 2, 3};
  const std::vector<double> q{1, 2, 3, 4};
  CHECK(ks_two_sample(p, q) == doctest::Approx(0.25));

  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ok += ks_two_sample(normals(100000, 1.0, seed, 0), normals(100000, 1.0, seed, 1)) < 0.012;
  }
  CHECK(ok >= 99);
}

TEST_CASE("Wasserstein-1") {
  const auto a = normals(100000, 1.0, 3);
  CHECK(wasserstein1(a, a) == 0.0);
  std::vector<double> shifted = a;
  for (double& x : shifted) x += 1.0;
  CHECK(wasserstein1(a, shifted) == doctest::Approx(1.0).epsilon(1e-12));

  const auto n1 = normals(1000000, 1.0, 4, 0);
  const auto n2 = normals(1000000, 2.0, 4, 1);
  CHECK(std::abs(wasserstein1(n1, n2) - std::sqrt(2.0 / std::numbers::pi)) < 0.01);

  const std::vector<double> u{0.0, 1.0};
  const std::vector<double> v{0.0, 0.5, 2.0};
  // F_u − F_v: on [0, .5) 1/2 − 1/3, on [.5, 1) 1/2 − 2/3, on [1, 2) 1 − 2/3.
  const double exact = 0.5 * (1.0 / 6) + 0.5 * (1.0 / 6) + 1.0 * (1.0 / 3);
  CHECK(wasserstein1(u, v) == doctest::Approx(exact).epsilon(1e-14));

  RandomStream rng(6, 0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(50 + trial * 17);
    std::vector<double> y(80 + trial * 5);
    for (double& t : x) t = rng.normal();
    for (double& t : y) t = 0.5 + 1.5 * rng.normal();
    CHECK(wasserstein1(x, y) == doctest::Approx(w1_brute(x, y)).epsilon(1e-3));
  }
}

TEST_CASE("estimators ignore input order and distances are symmetric metrics") {
  RandomStream rng(10, 0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(400);
    std::vector<double> b(400);
    std::vector<double> c(400);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = 0.3 + 1.2 * rng.normal();
    for (double& x : c) x = -0.2 + 0.8 * rng.normal();

    std::vector<double> shuffled = a;
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    const SummaryStats s1 = summarize(a);
    const SummaryStats s2 = summarize(shuffled);
    CHECK(s1.mean == s2.mean);
    CHECK(s1.var == s2.var);
    CHECK(s1.skew == s2.skew);
    CHECK(ks_two_sample(a, b) == ks_two_sample(shuffled, b));
    CHECK(wasserstein1(a, b) == wasserstein1(shuffled, b));

    CHECK(ks_two_sample(a, b) == ks_two_sample(b, a));
    CHECK(wasserstein1(a, b) == doctest::Approx(wasserstein1(b, a)).epsilon(1e-14));
    CHECK(ks_two_sample(a, c) <= ks_two_sample(a, b) + ks_two_sample(b, c) + 1e-12);
    CHECK(wasserstein1(a, c) <= wasserstein1(a, b) + wasserstein1(b, c) + 1e-12);
  }
}

TEST_CASE("fraction within and histograms") {
  const std::vector<double> x{-2, -1, -0.5, 0, 0.25, 1, 3};
  CHECK(fraction_within(x, -1, 1) == doctest::Approx(5.0 / 7));
  const Histogram h = histogram(x, -1.0, 1.0, 4);
  CHECK(h.counts.size() == 4);
  CHECK(h.below == 1);
  CHECK(h.above == 1);
  std::size_t total = h.below + h.above;
  for (auto c : h.counts) total += c;
  CHECK(total == x.size());
  CHECK(h.bin_width() == 0.5);
  CHECK(h.bin_center(0) == -0.75);
  CHECK_THROWS_AS(histogram(x, 1.0, -1.0, 4), InvalidSpec);
  CHECK_THROWS_AS(histogram(x, -1.0, 1.0, 0), InvalidSpec);

  const auto n = normals(200000, 1.0, 12);
  const Histogram hn = histogram(n, -4, 4, 80);
  const auto d = hn.density();
  for (std::size_t i = 0; i < d.size(); i += 10) {
    CHECK(std::abs(d[i] - oracle::normal_pdf(hn.bin_center(i), 0, 1)) < 0.01);
  }
}

}  // TEST_SUITE
