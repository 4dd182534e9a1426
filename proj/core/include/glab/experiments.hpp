#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glab/processes.hpp"
#include "glab/samplers.hpp"
#include "glab/scorenet.hpp"
#include "glab/stats.hpp"

namespace glab {

enum class ReportFormat { Csv, Json };

/// Training defaults of the generalization experiment: TrainConfig{} with the
/// noise-scaled output head, which the sharp clusters of example4 need. The
/// "train" config object overrides fields of this.
TrainConfig generalization_train_defaults();

/// Options shared by every experiment. Unset optionals fall back to the
/// experiment's own defaults. The JSON form uses the same key names as the
/// command-line flags.
struct ExperimentConfig {
  std::string experiment;
  std::optional<std::string> model;  ///< fixture name or model file
  std::optional<std::vector<double>> gammas;
  std::optional<std::vector<int>> Ks;
  std::optional<std::vector<int>> step_counts;  ///< equivalence / sweep
  std::optional<int> steps;
  std::optional<std::size_t> chains;
  std::uint64_t seed = 42;
  std::filesystem::path out_dir = "results";
  unsigned jobs = 1;
  ReportFormat format = ReportFormat::Csv;
  std::optional<ProcessConfig> process;
  std::optional<std::string> sampler;            ///< sweep variant
  std::optional<std::vector<double>> sigmas;     ///< counterexample3 cluster sd values
  std::optional<double> separation;              ///< counterexample2 μ
  std::optional<double> negative_control_gamma;  ///< equivalence
  std::optional<int> ld_steps;
  double ld_step = 0.01;
  TimeRule time_rule = TimeRule::Midpoint;
  std::optional<TrainConfig> train;  ///< generalization
  bool write_outputs = true;

  /// Throws InvalidSpec on unknown keys or bad values.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class Check {
  AbsWithin,  ///< |empirical − reference| ≤ tolerance
  RelWithin,  ///< |empirical − reference| ≤ tolerance·|reference|
  Below,      ///< empirical < reference − tolerance
  Above,      ///< empirical > reference + tolerance
};

enum class Status { Pass, Fail, Skip };

std::string_view to_string(Check c) noexcept;
std::string_view to_string(Status s) noexcept;

struct Verdict {
  std::string name;
  double empirical = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  Check check = Check::AbsWithin;
  Status status = Status::Skip;
  std::string note;
};

/// Evaluates the check; Skip when either value is non-finite.
Verdict make_verdict(std::string name, double empirical, double reference, double tolerance,
                     Check check, std::string note = {});
Verdict skip_verdict(std::string name, std::string note);

/// One CSV row. Optional numbers are written as empty fields.
struct RunRow {
  std::string experiment;
  std::string fixture;
  std::string sampler;
  double gamma = 1.0;
  std::optional<double> gamma_prime;
  int K = 0;
  int steps = 0;
  std::size_t chains = 0;
  std::uint64_t seed = 0;
  SummaryStats stats;
  std::optional<double> oracle_var;
  std::optional<double> ks;
  std::optional<double> w1;
  std::string verdict;  ///< PASS / FAIL / SKIP or "-" when the row carries no check
};

struct PlotData {
  std::string name;
  std::string description;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct ExperimentReport {
  std::string experiment;
  std::vector<RunRow> rows;
  std::vector<Verdict> verdicts;
  std::vector<PlotData> plots;
  nlohmann::json config;
  std::string version;
  double wall_seconds = 0.0;

  bool passed() const;
};

std::vector<std::string> experiment_names();
bool is_experiment(std::string_view name);

ExperimentReport run_counterexample1(const ExperimentConfig& cfg);
ExperimentReport run_counterexample2(const ExperimentConfig& cfg);
ExperimentReport run_counterexample3(const ExperimentConfig& cfg);
ExperimentReport run_equivalence(const ExperimentConfig& cfg);
ExperimentReport run_generalization(const ExperimentConfig& cfg);
ExperimentReport run_sweep(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment; throws InvalidSpec for unknown names.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Runs the specs with up to `jobs` concurrent runs. Output order follows the
/// input order and each run is seeded by its own spec, so results do not
/// depend on scheduling.
std::vector<SampleBatch> run_batches(const std::vector<SamplerSpec>& specs,
                                     const std::vector<const ScoreSource*>& sources,
                                     const std::vector<const ForwardProcess*>& processes,
                                     unsigned jobs);

/// Fixed-order CSV of the rows; no timing information so reruns are byte-identical.
std::string rows_csv(const ExperimentReport& report);
std::string verdicts_csv(const ExperimentReport& report);
nlohmann::json report_json(const ExperimentReport& report);

/// Writes <experiment>.csv and <experiment>_verdicts.csv (CSV format) or
/// <experiment>.json (JSON format), plus plot .dat files, a plot manifest and
/// <experiment>_meta.json with wall time and version. Returns written paths.
std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const std::filesystem::path& out_dir,
                                                ReportFormat format);

/// Formats a double the same way on every run (17 significant digits, "nan"/"inf" spelled out).
std::string format_number(double v);

std::string_view version() noexcept;

}  // namespace glab
