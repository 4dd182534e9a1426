#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "glab/samplers.hpp"

namespace glab {

/// {"variant": "CFG_DDPM", "gamma": 3, "K": 1, "steps": 2000, "chains": 1000,
///  "seed": 42, "process": {"process": "ve", ...}, "class": 0, "ld_step": 0.01,
///  "refresh_noise_predictions": false, "time_rule": "midpoint", "threads": 1}
nlohmann::json to_json(const SamplerSpec& spec);
nlohmann::json to_json(const ProcessConfig& config);

/// Missing keys keep their defaults; unknown keys or wrong types throw InvalidSpec.
SamplerSpec sampler_spec_from_json(const nlohmann::json& j);
ProcessConfig process_config_from_json(const nlohmann::json& j);

enum class BatchFormat { Csv, Binary };

/// Writes the x₀ column (CSV with header "x0", or raw little-endian float64)
/// plus `<path>.json` with the spec echo. Returns the sidecar path.
std::filesystem::path write_batch(const std::filesystem::path& path, const SampleBatch& batch,
                                  BatchFormat format);

std::vector<double> read_batch(const std::filesystem::path& path, BatchFormat format);

}  // namespace glab
