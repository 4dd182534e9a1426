#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "glab/processes.hpp"
#include "glab/rng.hpp"

namespace glab {

/// One mixture component. Stores the variance, never the standard deviation.
struct Component {
  double weight;
  double mean;
  double var;

  friend bool operator==(const Component&, const Component&) = default;
};

/// Weighted 1-D Gaussian mixture. Immutable after construction.
///
/// All sums run in log space; responsibilities are floored at e^-700 so that
/// scores stay finite far out in the tails (tens of standard deviations).
class Gmm1D {
 public:
  /// Throws InvalidModel unless weights are ≥ 0 and sum to 1 within 1e-12
  /// and every variance is strictly positive.
  explicit Gmm1D(std::vector<Component> components);

  /// Same as the constructor but rescales the weights to sum to one first.
  static Gmm1D normalized(std::vector<Component> components);
  static Gmm1D gaussian(double mean, double var);

  std::span<const Component> components() const noexcept { return components_; }
  std::size_t size() const noexcept { return components_.size(); }
  bool is_gaussian() const noexcept { return components_.size() == 1; }

  double mean() const noexcept;
  double variance() const noexcept;
  /// Smallest interval [lo, hi] holding every component's mean ± k·σ.
  std::pair<double, double> span_sigmas(double k) const noexcept;

  double log_density(double x) const noexcept;
  double density(double x) const noexcept;
  double score(double x) const noexcept;
  double cdf(double x) const noexcept;

  /// Score of the mixture whose components are (w, scale·μ, scale²·σ² + added_var),
  /// computed without materializing it. This is how noisy scores are evaluated
  /// inside sampling loops.
  double transformed_score(double x, double scale, double added_var) const noexcept;

  double sample(RandomStream& rng) const;

  friend bool operator==(const Gmm1D& a, const Gmm1D& b) { return a.components_ == b.components_; }

 private:
  std::vector<Component> components_;
  std::vector<double> log_weights_;
};

double log_density(const Gmm1D& m, double x) noexcept;
double score(const Gmm1D& m, double x) noexcept;

/// Marginal of the forward process at time t: every component is pushed
/// through x ↦ √ᾱ_t x + √(1−ᾱ_t) ξ (VP) or x + √t ξ (VE).
Gmm1D noisy(const Gmm1D& m, double t, const ForwardProcess& process);

struct ClassEntry {
  double prior;
  Gmm1D conditional;
};

/// Class priors with per-class mixtures p₀(x|c).
///
/// unconditional() is the prior-weighted concatenation of the class mixtures
/// unless an explicit unconditional mixture was supplied (needed when the
/// conditioning variable is not a finite label set).
class ConditionalModel {
 public:
  explicit ConditionalModel(std::vector<ClassEntry> classes,
                            std::optional<Gmm1D> unconditional = std::nullopt);

  std::size_t num_classes() const noexcept { return classes_.size(); }
  std::span<const ClassEntry> classes() const noexcept { return classes_; }
  const Gmm1D& conditional(std::size_t c) const;
  const Gmm1D& unconditional() const noexcept { return unconditional_; }
  bool has_explicit_unconditional() const noexcept { return explicit_unconditional_; }

 private:
  std::vector<ClassEntry> classes_;
  Gmm1D unconditional_;
  bool explicit_unconditional_;
};

/// (1−γ)·∇log p_t(x) + γ·∇log p_t(x|c). Returns the conditional score itself at γ=1.
double cfg_score(const ConditionalModel& model, double x, double t, std::size_t c, double gamma,
                 const ForwardProcess& process);

/// Closed-form p_u^{1−γ} p_c^γ for two Gaussians. Throws NonNormalizable when
/// the combined precision γ/σ_c² + (1−γ)/σ_u² is not positive.
Gmm1D gamma_powered_gaussian(const Gmm1D& uncond, const Gmm1D& cond, double gamma);

struct GridSpec {
  double lo;
  double hi;
  std::size_t points = 4001;
};

/// Default grid: [min μ − 10σ_max, max μ + 10σ_max] over both mixtures.
GridSpec default_grid(const Gmm1D& a, const Gmm1D& b, std::size_t points = 4001);

/// Density tabulated on a uniform grid, normalized by the trapezoid rule.
class GridDensity {
 public:
  GridDensity(GridSpec spec, std::vector<double> values);

  std::span<const double> grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  double cell_width() const noexcept { return cell_width_; }

  double integral() const noexcept;
  double mean() const noexcept;
  double variance() const noexcept;
  /// Linear interpolation; zero outside the grid.
  double value_at(double x) const noexcept;
  /// ½∫|p − q| by the trapezoid rule on this grid.
  double total_variation(const std::function<double(double)>& other_pdf) const;

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  double cell_width_;
};

GridDensity gamma_powered_numeric(const Gmm1D& uncond, const Gmm1D& cond, double gamma,
                                  const GridSpec& grid);
GridDensity gamma_powered_numeric(const Gmm1D& uncond, const Gmm1D& cond, double gamma);

/// Tweedie posterior mean E[x₀ | x_t = x] under a VP process.
double posterior_mean_x0(const Gmm1D& m0, double x, double t, const ForwardProcess& process);
double posterior_mean_x0(const Gmm1D& m0, double x, double alpha_bar);

}  // namespace glab
