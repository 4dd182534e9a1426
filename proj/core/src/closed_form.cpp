#include "glab/closed_form.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "glab/errors.hpp"

namespace glab {

namespace {

double checked_A(const LinearDriftSpec& spec, double t) {
  if (!spec.A) throw DomainError("linear drift spec has no antiderivative A");
  const double v = spec.A(t);
  if (!std::isfinite(v)) throw DomainError("A(t) is undefined at t = " + std::to_string(t));
  return v;
}

void check_order(double T, double t) {
  if (t > T) throw DomainError("ode/sde solution needs t <= T");
}

}  // namespace

double ode_solution_fixed_point(const LinearDriftSpec& spec, double x_T, double T, double t) {
  if (!spec.fixed_point) throw DomainError("drift spec has no fixed point");
  check_order(T, t);
  const double c = *spec.fixed_point;
  return c + (x_T - c) * std::exp(checked_A(spec, T) - checked_A(spec, t));
}

double ode_solution(const LinearDriftSpec& spec, double x_T, double T, double t) {
  check_order(T, t);
  if (!spec.B) return ode_solution_fixed_point(spec, x_T, T, t);
  const double At = checked_A(spec, t);
  const double AT = checked_A(spec, T);
  return std::exp(-At) * (spec.B(t) - spec.B(T)) + x_T * std::exp(AT - At);
}

GaussianLaw sde_solution_law(const LinearSdeSpec& spec, double x_T, double T, double t) {
  if (!spec.E2) throw DomainError("SDE spec has no noise antiderivative E2");
  const double mean = ode_solution(spec.drift, x_T, T, t);
  const double At = checked_A(spec.drift, t);
  const double var = std::exp(-2.0 * At) * (spec.E2(T) - spec.E2(t));
  if (!std::isfinite(var)) throw DomainError("SDE variance is not finite");
  return {mean, var};
}

LinearDriftSpec ve_gaussian_ddim_drift(double mean, double var) {
  LinearDriftSpec s;
  s.a = [var](double t) { return -0.5 / (var + t); };
  s.A = [var](double t) { return -0.5 * std::log(var + t); };
  s.fixed_point = mean;
  const double c = mean;
  s.b = [var, c](double t) { return -0.5 * c / (var + t); };
  s.B = [var, c](double t) { return c / std::sqrt(var + t); };
  return s;
}

LinearDriftSpec ce1_ddim_drift(double gamma) {
  LinearDriftSpec s;
  s.a = [gamma](double t) { return -gamma / (2.0 * (1.0 + t)) - (1.0 - gamma) / (2.0 * (2.0 + t)); };
  s.A = [gamma](double t) {
    return -0.5 * (gamma * std::log(1.0 + t) + (1.0 - gamma) * std::log(2.0 + t));
  };
  s.b = [](double) { return 0.0; };
  s.B = [](double) { return 0.0; };
  s.fixed_point = 0.0;
  return s;
}

LinearSdeSpec ce1_ddpm_sde(double gamma) {
  LinearSdeSpec s;
  s.drift.a = [gamma](double t) { return -gamma / (1.0 + t) - (1.0 - gamma) / (2.0 + t); };
  s.drift.A = [gamma](double t) {
    return -(gamma * std::log(1.0 + t) + (1.0 - gamma) * std::log(2.0 + t));
  };
  s.drift.b = [](double) { return 0.0; };
  s.drift.fixed_point = 0.0;
  const double u = 2.0 * gamma - 1.0;
  if (u == 0.0) {
    s.E2 = [](double t) { return std::log((1.0 + t) / (2.0 + t)); };
  } else {
    s.E2 = [u](double t) { return -std::pow((t + 1.0) / (t + 2.0), -u) / u; };
  }
  return s;
}

double ce1_ddim_trajectory(double x_T, double T, double t, double gamma) {
  const double num = gamma * std::log(t + 1.0) + (1.0 - gamma) * std::log(t + 2.0);
  const double den = gamma * std::log(T + 1.0) + (1.0 - gamma) * std::log(T + 2.0);
  return x_T * std::exp(0.5 * (num - den));
}

double ce1_ddim_variance(double gamma) { return std::exp2(1.0 - gamma); }

double ce1_ddpm_variance(double gamma) {
  // (2 − 2·2^{−u})/u with u = 2γ − 1; expm1 keeps it accurate through u = 0.
  const double u = 2.0 * gamma - 1.0;
  const double ln2 = std::numbers::ln2;
  if (u == 0.0) return 2.0 * ln2;
  return -2.0 * std::expm1(-u * ln2) / u;
}

double ce1_gamma_variance(double gamma) {
  if (gamma <= -1.0) throw NonNormalizable("p_u^{1-γ} p_c^γ is not normalizable for γ <= -1");
  return 2.0 / (gamma + 1.0);
}

double ce1_ddim_variance_finite(double gamma, double T, double prior_var) {
  const double x = ce1_ddim_trajectory(1.0, T, 0.0, gamma);
  return prior_var * x * x;
}

double ce1_ddpm_variance_finite(double gamma, double T, double prior_var) {
  const LinearSdeSpec sde = ce1_ddpm_sde(gamma);
  const GaussianLaw law = sde_solution_law(sde, 1.0, T, 0.0);
  return prior_var * law.mean * law.mean + law.var;
}

}  // namespace glab
