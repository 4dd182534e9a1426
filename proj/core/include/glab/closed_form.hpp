#pragma once

#include <functional>
#include <optional>

namespace glab {

/// Linear ODE dx/dt = b(t) − a(t)·x, integrated from t = T down to t.
///
/// A must be an antiderivative of a and B one of e^{A}·b. When b = a·c for a
/// constant c, set `fixed_point` to c and B may be left empty.
struct LinearDriftSpec {
  std::function<double(double)> a;
  std::function<double(double)> A;
  std::function<double(double)> b;
  std::function<double(double)> B;
  std::optional<double> fixed_point;
};

/// x(t) = e^{−A(t)}(B(t) − B(T)) + x_T·e^{A(T)−A(t)}. Uses the fixed-point form
/// when B is not supplied. Throws DomainError if A is not finite at t or T.
double ode_solution(const LinearDriftSpec& spec, double x_T, double T, double t);

/// c + (x_T − c)·e^{A(T)−A(t)}. Requires spec.fixed_point.
double ode_solution_fixed_point(const LinearDriftSpec& spec, double x_T, double T, double t);

/// Linear SDE dx = (b − a·x)dt + g(t)dw run backward from T. E2 must be an
/// antiderivative of g(t)²·e^{2A(t)}.
struct LinearSdeSpec {
  LinearDriftSpec drift;
  std::function<double(double)> E2;
};

struct GaussianLaw {
  double mean;
  double var;
};

/// Law of x(t) given x(T) = x_T: mean = ode_solution, var = e^{−2A(t)}(E2(T) − E2(t)).
GaussianLaw sde_solution_law(const LinearSdeSpec& spec, double x_T, double T, double t);

/// Probability-flow ODE of a VE process for data N(μ, σ²).
LinearDriftSpec ve_gaussian_ddim_drift(double mean, double var);

/// CFG probability-flow ODE on counterexample 1 (VE): score mix of −x/(1+t) and −x/(2+t).
LinearDriftSpec ce1_ddim_drift(double gamma);

/// CFG reverse SDE on counterexample 1 (VE, unit diffusion).
LinearSdeSpec ce1_ddpm_sde(double gamma);

/// x_T·√((t+1)^γ(t+2)^{1−γ} / ((T+1)^γ(T+2)^{1−γ})).
double ce1_ddim_trajectory(double x_T, double T, double t, double gamma);

/// Large-T output variances on counterexample 1.
double ce1_ddim_variance(double gamma);  ///< 2^{1−γ}
double ce1_ddpm_variance(double gamma);  ///< (2 − 2^{2−2γ})/(2γ−1), 2 ln 2 at γ = ½
double ce1_gamma_variance(double gamma); ///< 2/(γ+1); NonNormalizable for γ ≤ −1

/// Exact output variances at horizon T when x_T ~ N(0, prior_var).
double ce1_ddim_variance_finite(double gamma, double T, double prior_var);
double ce1_ddpm_variance_finite(double gamma, double T, double prior_var);

}  // namespace glab
