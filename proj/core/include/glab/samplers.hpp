#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "glab/gmm.hpp"
#include "glab/processes.hpp"
#include "glab/rng.hpp"

namespace glab {

struct ScorePair {
  double uncond;
  double cond;
};

/// Time t with the forward-process coefficients precomputed: x_t = scale·x₀ + N(0, added_var).
struct NoiseLevel {
  double t;
  double scale;
  double added_var;
};

NoiseLevel noise_level(const ForwardProcess& process, double t);

/// Supplies ∇log p_t(x) and ∇log p_t(x|c). Must be deterministic and safe to
/// call concurrently.
class ScoreSource {
 public:
  virtual ~ScoreSource() = default;
  virtual double unconditional(double x, double t) const = 0;
  virtual double conditional(double x, double t, std::size_t cls) const = 0;

  /// Overridable fast paths for callers that already hold the coefficients.
  virtual double unconditional_at(double x, const NoiseLevel& level) const {
    return unconditional(x, level.t);
  }
  virtual double conditional_at(double x, const NoiseLevel& level, std::size_t cls) const {
    return conditional(x, level.t, cls);
  }

  ScorePair scores(double x, double t, std::size_t cls) const {
    return {unconditional(x, t), conditional(x, t, cls)};
  }
  ScorePair scores_at(double x, const NoiseLevel& level, std::size_t cls) const {
    return {unconditional_at(x, level), conditional_at(x, level, cls)};
  }
};

/// Analytic scores of a ConditionalModel under a forward process.
class ExactScores final : public ScoreSource {
 public:
  ExactScores(const ConditionalModel& model, const ForwardProcess& process)
      : model_(&model), process_(&process) {}

  double unconditional(double x, double t) const override;
  double conditional(double x, double t, std::size_t cls) const override;
  double unconditional_at(double x, const NoiseLevel& level) const override;
  double conditional_at(double x, const NoiseLevel& level, std::size_t cls) const override;

 private:
  const ConditionalModel* model_;
  const ForwardProcess* process_;
};

enum class Variant { Ddpm, Ddim, CfgDdpm, CfgDdim, PcgTheory, PcgExplicit, LdOnly };

std::string_view to_string(Variant v) noexcept;
Variant parse_variant(std::string_view name);

/// Where inside a step [t−Δt, t] the drift coefficients and scores are evaluated.
enum class TimeRule { Midpoint, Source };

std::string_view to_string(TimeRule r) noexcept;
TimeRule parse_time_rule(std::string_view name);

struct SamplerSpec {
  Variant variant = Variant::Ddpm;
  double gamma = 1.0;  ///< ignored by DDPM/DDIM
  int K = 1;           ///< Langevin corrections per node (PCG variants)
  int steps = 2000;
  std::size_t chains = 1000;
  std::uint64_t seed = 42;
  ProcessConfig process;
  std::size_t class_label = 0;
  double ld_step = 0.01;  ///< LD_ONLY step size ε
  /// PCG_EXPLICIT: recompute noise predictions at every inner iteration
  /// instead of once per node.
  bool refresh_noise_predictions = false;
  TimeRule time_rule = TimeRule::Midpoint;
  unsigned threads = 1;

  /// Throws InvalidSpec on any contract violation.
  void validate() const;
};

struct SampleBatch {
  std::vector<double> values;  ///< final x₀ of every chain that finished
  SamplerSpec spec;
  double wall_seconds = 0.0;
  std::size_t aborted = 0;
  /// Set for PCG variants on a VE process; the CFG equivalence is derived for VP.
  bool outside_theorem_form = false;
};

/// Combined guided score (1−γ)s_u + γs_c. Exactly s_c at γ=1 and s_u at γ=0.
inline double guided_score(ScorePair s, double gamma) noexcept {
  if (gamma == 1.0) return s.cond;
  if (gamma == 0.0) return s.uncond;
  return (1.0 - gamma) * s.uncond + gamma * s.cond;
}

/// Euler–Maruyama step of the reverse SDE from t to t−Δt, with coefficients
/// evaluated at `t` and the given score. `noise` is a standard-normal draw.
double ddpm_step(double x, double t, double dt, double score, const ForwardProcess& process,
                 double noise);
double ddpm_step(double x, double t, double dt, double score, const ForwardProcess& process,
                 RandomStream& rng);

/// Euler step of the probability-flow ODE.
double ddim_step(double x, double t, double dt, double score, const ForwardProcess& process);

/// DDPM/DDIM step with the score replaced by the guided mix.
double cfg_step(double x, double t, double dt, ScorePair scores, double gamma,
                const ForwardProcess& process, Variant variant, RandomStream& rng);

/// x + (ε/2)·[(1−γ)s_u + γs_c] + √ε·η.
double langevin_step(double x, double eps, ScorePair scores, double gamma, double noise);
double langevin_step(double x, double eps, ScorePair scores, double gamma, RandomStream& rng);

/// One chain from a prior draw to x₀. Throws NonFiniteState.
double sample_chain(const SamplerSpec& spec, const ScoreSource& scores,
                    const ForwardProcess& process, RandomStream& rng);

/// Predictor: conditional DDIM step with the score at t+Δt and β at t.
/// Corrector: K Langevin steps on p_{t,γ} with ε = β_tΔt, score refreshed each step.
SampleBatch pcg_theory_sample(const SamplerSpec& spec, const ScoreSource& scores,
                              const ForwardProcess& process);
SampleBatch pcg_theory_sample(const SamplerSpec& spec, const ConditionalModel& model);

/// Noise-prediction form with discrete {α, ᾱ, β}: x̂₀ projection, DDIM
/// re-noising, then K Langevin updates. Requires VP.
SampleBatch pcg_explicit_sample(const SamplerSpec& spec, const ScoreSource& scores,
                                const ForwardProcess& process);
SampleBatch pcg_explicit_sample(const SamplerSpec& spec, const ConditionalModel& model);

/// Runs spec.chains independent chains. Chain i uses RandomStream(seed, i),
/// so results are identical for any thread count. Throws NonFiniteState when
/// more than 0.1% of chains abort.
SampleBatch run_sampler(const SamplerSpec& spec, const ScoreSource& scores,
                        const ForwardProcess& process);
SampleBatch run_sampler(const SamplerSpec& spec, const ConditionalModel& model);

}  // namespace glab
