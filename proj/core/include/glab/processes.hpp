#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "glab/rng.hpp"

namespace glab {

enum class ProcessKind { Vp, Ve };

std::string_view to_string(ProcessKind kind) noexcept;
ProcessKind parse_process_kind(std::string_view name);

/// Linear-β variance-preserving schedule on [0, 1].
///
/// Two distinct ᾱ definitions are exposed:
///   - alpha_bar(t): the discrete product Π_{j=1..k} (1 − β(jΔt)Δt) used by
///     the samplers. Between grid nodes it is interpolated log-linearly.
///   - alpha_bar_continuous(t) = exp(−∫₀ᵗ β), used by closed-form checks.
class VpSchedule {
 public:
  VpSchedule(double beta_min = 0.1, double beta_max = 20.0, int steps = 1000);

  double beta_min() const noexcept { return beta_min_; }
  double beta_max() const noexcept { return beta_max_; }
  int steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  static constexpr double horizon() noexcept { return 1.0; }

  double beta(double t) const;
  double alpha_bar(double t) const;
  double alpha_bar_at(int node) const;
  double alpha_bar_continuous(double t) const;
  /// Discrete β_k = β(kΔt)·Δt (the per-step noise variance).
  double discrete_beta(int node) const;
  /// Discrete α_k = 1 − β_k.
  double alpha(int node) const { return 1.0 - discrete_beta(node); }

 private:
  double beta_min_;
  double beta_max_;
  int steps_;
  double dt_;
  std::vector<double> log_alpha_bar_;
};

/// Variance-exploding process with unit diffusion: p_t = p_0 ∗ N(0, t).
class VeProcess {
 public:
  explicit VeProcess(double horizon = 100.0);
  double horizon() const noexcept { return horizon_; }

 private:
  double horizon_;
};

/// Config keys: process = "vp" | "ve"; beta_min, beta_max, ve_horizon.
struct ProcessConfig {
  ProcessKind kind = ProcessKind::Vp;
  double beta_min = 0.1;
  double beta_max = 20.0;
  double ve_horizon = 100.0;
};

class ForwardProcess {
 public:
  ForwardProcess(VpSchedule vp) : impl_(std::move(vp)) {}  // NOLINT(google-explicit-constructor)
  ForwardProcess(VeProcess ve) : impl_(ve) {}              // NOLINT(google-explicit-constructor)

  static ForwardProcess make(const ProcessConfig& config, int steps);

  ProcessKind kind() const noexcept;
  double horizon() const noexcept;
  const VpSchedule* vp() const noexcept { return std::get_if<VpSchedule>(&impl_); }
  const VeProcess* ve() const noexcept { return std::get_if<VeProcess>(&impl_); }

  /// Mean scale applied to x₀ at time t: √ᾱ_t (VP) or 1 (VE).
  double signal_scale(double t) const;
  /// Variance of the added noise at time t: 1 − ᾱ_t (VP) or t (VE).
  double noise_var(double t) const;
  /// Squared diffusion coefficient g(t)²: β(t) (VP) or 1 (VE).
  double diffusion_rate(double t) const;
  /// Variance of the terminal prior the samplers start from.
  double prior_variance() const noexcept;

  ProcessConfig config() const noexcept;

 private:
  void check_time(double t) const;
  std::variant<VpSchedule, VeProcess> impl_;
};

/// Uniform grid from the horizon down to 0 (steps + 1 nodes).
class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  std::size_t size() const noexcept { return static_cast<std::size_t>(steps_) + 1; }
  int steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  double horizon() const noexcept { return horizon_; }
  /// i-th node in sampling order: node(0) = horizon, node(steps) = 0.
  double node(std::size_t i) const noexcept;
  /// Time of the grid point with forward index k (k·Δt).
  double at(int k) const noexcept;
  std::vector<double> nodes() const;

 private:
  double horizon_;
  int steps_;
  double dt_;
};

/// Draw from the terminal prior: N(0, 1) for VP, N(0, T) for VE.
double prior_sample(const ForwardProcess& process, RandomStream& rng);

}  // namespace glab
