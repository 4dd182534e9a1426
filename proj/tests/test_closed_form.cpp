#include <cmath>
#include <doctest.h>
#include <numbers>

#include "glab/closed_form.hpp"
#include "glab/errors.hpp"
#include "glab/rng.hpp"
#include "oracles.hpp"

using namespace glab;

namespace {

// Contraction rate of the guided score on the first counterexample: s = −a(t)·x.
double ce1_rate(double gamma, double t) { return gamma / (1.0 + t) + (1.0 - gamma) / (2.0 + t); }

// Variance of the guided probability-flow ODE output, by RK4 on V' = a·V.
double ddim_variance_rk4(double gamma, double T, double prior_var) {
  return oracle::rk4([&](double t, double v) { return ce1_rate(gamma, t) * v; }, prior_var, T, 0.0, 200000);
}

// Variance of the guided reverse SDE output, by RK4 on V' = 2a·V − 1.
double ddpm_variance_rk4(double gamma, double T, double prior_var) {
  return oracle::rk4([&](double t, double v) { return 2.0 * ce1_rate(gamma, t) * v - 1.0; }, prior_var, T,
                     0.0, 200000);
}

}  // namespace

TEST_SUITE("closed_form") {

TEST_CASE("zero drift leaves the state unchanged") {
  LinearDriftSpec s{[](double) { return 0.0; }, [](double) { return 0.0; }, [](double) { return 0.0; },
                    [](double) { return 0.0; }, std::nullopt};
  CHECK(ode_solution(s, 3.7, 10.0, 0.0) == 3.7);
  s.B = nullptr;
  s.fixed_point = 0.0;
  CHECK(ode_solution(s, 3.7, 10.0, 2.0) == 3.7);
}

TEST_CASE("VE probability flow on a Gaussian") {
  const LinearDriftSpec s = ve_gaussian_ddim_drift(0.0, 1.0);
  CHECK(ode_solution(s, 10.0, 99.0, 0.0) == doctest::Approx(1.0).epsilon(1e-14));

  RandomStream rng(1, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const double mu = 4.0 * (rng.uniform() - 0.5);
    const double var = 0.1 + 3.0 * rng.uniform();
    const double T = 1.0 + 99.0 * rng.uniform();
    const double xT = 20.0 * (rng.uniform() - 0.5);
    const double t = T * rng.uniform();
    const LinearDriftSpec d = ve_gaussian_ddim_drift(mu, var);
    const double expect = mu + (xT - mu) * std::sqrt((var + t) / (var + T));
    const double rk = oracle::rk4([&](double u, double x) { return 0.5 * (x - mu) / (var + u); }, xT, T, t, 20000);
    CHECK(ode_solution(d, xT, T, t) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(ode_solution(d, xT, T, t) - rk) < 1e-8);
    // Both forms apply here; they must agree.
    CHECK(std::abs(ode_solution(d, xT, T, t) - ode_solution_fixed_point(d, xT, T, t)) < 1e-12);
  }
}

TEST_CASE("guided probability-flow trajectory") {
  for (double t : {0.0, 1.0, 10.0, 50.0}) {
    CHECK(ce1_ddim_trajectory(10.0, 99.0, t, 1.0) == doctest::Approx(10.0 * std::sqrt((t + 1) / 100.0)).epsilon(1e-14));
  }
  for (double g : {0.0, 1.0, 3.0, 7.0}) CHECK(ce1_ddim_trajectory(10.0, 99.0, 99.0, g) == doctest::Approx(10.0).epsilon(1e-15));

  // 10·√(2^{−2}·101²/100³).
  const double hand = 10.0 * std::sqrt(0.25 * 101.0 * 101.0 / 1e6);
  CHECK(hand == doctest::Approx(0.505).epsilon(1e-12));
  CHECK(ce1_ddim_trajectory(10.0, 99.0, 0.0, 3.0) == doctest::Approx(hand).epsilon(1e-13));

  for (double g : {0.5, 1.5, 2.0, 3.0, 5.0}) {
    for (double t : {0.0, 5.0, 40.0}) {
      const double rk = oracle::rk4([&](double u, double x) { return 0.5 * ce1_rate(g, u) * x; }, 10.0, 99.0, t, 20000);
      CHECK(std::abs(ce1_ddim_trajectory(10.0, 99.0, t, g) - rk) < 1e-6);
      const LinearDriftSpec d = ce1_ddim_drift(g);
      CHECK(std::abs(ode_solution(d, 10.0, 99.0, t) - ce1_ddim_trajectory(10.0, 99.0, t, g)) < 1e-12);
      CHECK(std::abs(ode_solution_fixed_point(d, 10.0, 99.0, t) - ode_solution(d, 10.0, 99.0, t)) < 1e-12);
    }
  }
}

TEST_CASE("large-horizon output variances") {
  CHECK(ce1_ddim_variance(1.0) == 1.0);
  CHECK(ce1_ddim_variance(3.0) == 0.25);
  CHECK(ce1_ddim_variance(2.0) == 0.5);
  CHECK(ce1_ddpm_variance(1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ce1_ddpm_variance(3.0) == doctest::Approx(0.3875).epsilon(1e-15));
  CHECK(ce1_ddpm_variance(0.5) == doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
  CHECK(ce1_ddpm_variance(0.5) == doctest::Approx(1.38629).epsilon(1e-5));
  // The removable singularity: values either side approach the limit.
  const auto raw = [](double g) { return (2.0 - std::pow(2.0, 2.0 - 2.0 * g)) / (2.0 * g - 1.0); };
  CHECK(std::abs(raw(0.5 + 1e-6) - ce1_ddpm_variance(0.5)) < 1e-5);
  CHECK(std::abs(raw(0.5 - 1e-6) - ce1_ddpm_variance(0.5)) < 1e-5);
  CHECK(std::abs(ce1_ddpm_variance(0.5 + 1e-9) - ce1_ddpm_variance(0.5)) < 1e-8);
  CHECK(ce1_gamma_variance(1.0) == 1.0);
  CHECK(ce1_gamma_variance(3.0) == 0.5);
  CHECK_THROWS_AS(ce1_gamma_variance(-1.0), NonNormalizable);
  CHECK_THROWS_AS(ce1_gamma_variance(-2.5), NonNormalizable);
}

TEST_CASE("variance ordering, monotone decay and asymptotics") {
  double prev_gamma = 1e9;
  double prev_ddpm = 1e9;
  double prev_ddim = 1e9;
  for (double g = 1.05; g <= 30.0; g += 0.05) {
    const double vi = ce1_ddim_variance(g);
    const double vp = ce1_ddpm_variance(g);
    const double vg = ce1_gamma_variance(g);
    CHECK(vi < vp);
    CHECK(vp < vg);
    CHECK(vg < prev_gamma);
    CHECK(vp < prev_ddpm);
    CHECK(vi < prev_ddim);
    prev_gamma = vg;
    prev_ddpm = vp;
    prev_ddim = vi;
    if (g >= 5.0) {
      CHECK(vp * (2 * g - 1) / 2 == doctest::Approx(1.0).epsilon(0.02));
      CHECK(vi * std::pow(2.0, g) == doctest::Approx(2.0).epsilon(1e-12));
    }
  }
  CHECK(ce1_gamma_variance(1e6) < 1e-5);
}

TEST_CASE("finite-horizon variances match direct integration of the moment equations") {
  for (double g : {0.5, 1.0, 1.5, 2.0, 3.0, 5.0}) {
    CHECK(ce1_ddim_variance_finite(g, 100.0, 100.0) == doctest::Approx(ddim_variance_rk4(g, 100.0, 100.0)).epsilon(1e-9));
    CHECK(ce1_ddpm_variance_finite(g, 100.0, 100.0) == doctest::Approx(ddpm_variance_rk4(g, 100.0, 100.0)).epsilon(1e-9));
    CHECK(ce1_ddpm_variance_finite(g, 30.0, 7.0) == doctest::Approx(ddpm_variance_rk4(g, 30.0, 7.0)).epsilon(1e-9));
    // At T = 100 the large-horizon forms are within 1%.
    CHECK(ce1_ddim_variance_finite(g, 100.0, 100.0) == doctest::Approx(ce1_ddim_variance(g)).epsilon(0.01));
    CHECK(ce1_ddpm_variance_finite(g, 100.0, 100.0) == doctest::Approx(ce1_ddpm_variance(g)).epsilon(0.01));
  }
}

TEST_CASE("linear SDE law") {
  for (double g : {1.0, 2.0, 3.0}) {
    const LinearSdeSpec s = ce1_ddpm_sde(g);
    const GaussianLaw law = sde_solution_law(s, 4.0, 50.0, 0.0);
    const double mean = oracle::rk4([&](double t, double m) { return ce1_rate(g, t) * m; }, 4.0, 50.0, 0.0, 100000);
    CHECK(law.mean == doctest::Approx(mean).epsilon(1e-9));
    CHECK(law.var == doctest::Approx(ddpm_variance_rk4(g, 50.0, 0.0)).epsilon(1e-9));
  }
}

TEST_CASE("domain errors") {
  LinearDriftSpec s{[](double t) { return 1.0 / t; }, [](double t) { return std::log(t); },
                    [](double) { return 0.0; }, nullptr, 0.0};
  CHECK_THROWS_AS(ode_solution(s, 1.0, 2.0, 0.0), DomainError);
  CHECK_NOTHROW(ode_solution(s, 1.0, 2.0, 1.0));
  CHECK(ode_solution(s, 1.0, 2.0, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(ode_solution(ve_gaussian_ddim_drift(0, 1), 1.0, 10.0, 11.0), DomainError);
  s.fixed_point.reset();
  CHECK_THROWS_AS(ode_solution(s, 1.0, 2.0, 1.0), DomainError);
}

}  // TEST_SUITE
