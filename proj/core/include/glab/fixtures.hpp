#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "glab/gmm.hpp"

namespace glab {

/// Knobs for the built-in fixtures that the experiments vary.
struct FixtureParams {
  double separation = 3.0;  ///< counterexample2: class means at ∓separation
  double cluster_sd = 1.0;  ///< counterexample3: per-cluster standard deviation
};

/// Names accepted by fixture().
std::vector<std::string> fixture_names();
bool is_fixture_name(std::string_view name);

/// Built-in models:
///  - "counterexample1": p0(x) = N(0,2), p0(x|c=0) = N(0,1)
///  - "counterexample2": equal-weight classes N(∓μ, 1)
///  - "counterexample3": three classes N(−3|0|3, σ²)
///  - "example4": N(0,10) unconditional, 12-cluster conditional with a dominant center
ConditionalModel fixture(std::string_view name, const FixtureParams& params = {});

/// Model definition file:
///   {"classes": [{"prior": p, "components": [{"w":..,"mean":..,"var":..}]}],
///    "unconditional": {"components": [...]}}        <- optional
ConditionalModel model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const ConditionalModel& model);
ConditionalModel load_model_file(const std::string& path);

/// fixture(spec) when spec names a fixture, otherwise load_model_file(spec).
ConditionalModel resolve_model(const std::string& spec, const FixtureParams& params = {});

}  // namespace glab
