#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "glab/gmm.hpp"
#include "glab/processes.hpp"
#include "glab/samplers.hpp"

namespace glab {

/// How the last linear unit maps to a score. InverseNoiseStd divides by
/// σ_t = √noise_var(t), so the network effectively predicts −ξ. That resolves
/// sharp data scores at small t but also divides any output error by σ_t;
/// Identity is the better choice for smooth targets.
enum class OutputScale : std::uint32_t { Identity = 0, InverseNoiseStd = 1 };

struct ScoreNetArch {
  std::vector<int> hidden{64, 64};
  OutputScale output = OutputScale::Identity;
};

/// Fully connected tanh network with inputs (x, t/T, √(t/T)) and one linear output.
/// An empty hidden list gives a linear model of the inputs.
///
/// Parameters live in one flat vector, layer by layer: the weight matrix
/// (row-major, out × in) followed by the bias vector.
class ScoreNet {
 public:
  static constexpr std::size_t kInputs = 3;

  /// All parameters zero.
  ScoreNet(ScoreNetArch arch, ProcessConfig process, int process_steps = 1000);

  /// Glorot-normal hidden layers; the output layer stays zero unless
  /// `zero_output` is false.
  static ScoreNet initialized(ScoreNetArch arch, ProcessConfig process, std::uint64_t seed,
                              int process_steps = 1000, bool zero_output = true);

  const ScoreNetArch& arch() const noexcept { return arch_; }
  const ForwardProcess& process() const noexcept { return process_; }
  int process_steps() const noexcept { return process_steps_; }

  std::size_t num_params() const noexcept { return params_.size(); }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }

  /// Score estimate at (x, t).
  double forward(double x, double t) const;

  /// Adds upstream·∂forward(x,t)/∂θ into `grad` (size num_params()).
  void accumulate_gradient(double x, double t, double upstream, std::span<double> grad) const;

  /// upstream·∂forward(x,t)/∂θ as a fresh vector.
  std::vector<double> backward(double x, double t, double upstream) const;

  /// Multiplier applied to the raw network output at time t.
  double output_factor(double t) const;

  /// Versioned little-endian checkpoint; see README for the byte layout.
  void save(const std::filesystem::path& path) const;
  static ScoreNet load(const std::filesystem::path& path);

 private:
  struct Layer {
    std::size_t in;
    std::size_t out;
    std::size_t offset;  // start of W in params_; b follows at offset + in·out
  };

  void features(double x, double t, double* out) const;
  double raw_forward(const double* input, std::vector<std::vector<double>>* acts) const;

  ScoreNetArch arch_;
  ProcessConfig process_config_;
  int process_steps_;
  ForwardProcess process_;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int max_epochs = 300;
  double validation_fraction = 0.2;
  int patience = 20;
  std::uint64_t seed = 42;
  std::size_t dataset_size = 4000;  ///< x₀ draws, split into train/validation
  double t_min = 1e-3;              ///< t ~ U(t_min, T)
  ScoreNetArch arch;
  int process_steps = 1000;

  /// Throws InvalidSpec unless every field is in range.
  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  ///< per epoch
  std::vector<double> val_loss;    ///< per epoch
  int best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

/// Denoising score matching with λ(t) = σ_t² weighting, i.e. per sample
/// (σ_t·s_θ(x_t, t) + ξ)² with x_t = scale_t·x₀ + σ_t·ξ. Returns the snapshot
/// with the best validation loss. Throws DivergedTraining on a non-finite loss.
ScoreNet train_dsm(const Gmm1D& model, const ProcessConfig& process, const TrainConfig& cfg,
                   TrainReport* report = nullptr);

/// Mean DSM loss of `net` over fixed (x₀, t, ξ) triples.
double dsm_loss(const ScoreNet& net, std::span<const double> x0, std::span<const double> t,
                std::span<const double> xi);

/// Score source backed by trained networks: one per class plus one unconditional.
class LearnedScores final : public ScoreSource {
 public:
  LearnedScores(ScoreNet unconditional, std::vector<ScoreNet> conditional);

  double unconditional(double x, double t) const override;
  double conditional(double x, double t, std::size_t cls) const override;

  const ScoreNet& unconditional_net() const noexcept { return uncond_; }
  const ScoreNet& conditional_net(std::size_t cls) const;

 private:
  ScoreNet uncond_;
  std::vector<ScoreNet> cond_;
};

}  // namespace glab
