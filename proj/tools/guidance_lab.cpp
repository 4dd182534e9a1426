// guidance-lab: run one experiment and write its report.
//
// Exit codes: 0 when every verdict passes or is skipped, 1 when a verdict
// fails, 2 on a configuration or input error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "glab/errors.hpp"
#include "glab/experiments.hpp"

namespace {

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* flag) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    try {
      if constexpr (std::is_same_v<T, int>) {
        out.push_back(std::stoi(item, &used));
      } else {
        out.push_back(std::stod(item, &used));
      }
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) {
      throw glab::InvalidSpec(std::string("bad value '") + item + "' for " + flag);
    }
  }
  return out;
}

nlohmann::json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw glab::IoError("cannot open config file '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw glab::InvalidSpec("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion guidance experiments with exact mixture scores"};
  app.set_version_flag("--version", std::string(glab::version()));

  std::string experiment;
  std::string config_path;
  std::string gamma_list;
  std::string k_list;
  int steps = 0;
  std::size_t chains = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned jobs = 0;
  std::string format;

  std::string names;
  for (const auto& n : glab::experiment_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("experiment", experiment, "Experiment to run: " + names)->required();
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  app.add_option("--gamma", gamma_list, "Comma-separated guidance weights");
  app.add_option("--steps", steps, "Sampler steps")->check(CLI::PositiveNumber);
  app.add_option("--chains", chains, "Chains per run")->check(CLI::PositiveNumber);
  app.add_option("--K", k_list, "Langevin corrections per step (comma list for sweeps)");
  app.add_option("--seed", seed, "Base seed");
  app.add_option("--out", out_dir, "Output directory (default results)");
  app.add_option("--jobs", jobs, "Runs executed concurrently")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : read_config(config_path);
    if (!doc.is_object()) throw glab::InvalidSpec("config file must hold a JSON object");
    if (doc.contains("experiment") && doc["experiment"] != experiment) {
      throw glab::InvalidSpec("config file is for experiment " + doc["experiment"].dump());
    }
    doc["experiment"] = experiment;
    if (app.count("--gamma")) doc["gamma"] = parse_list<double>(gamma_list, "--gamma");
    if (app.count("--K")) doc["K"] = parse_list<int>(k_list, "--K");
    if (app.count("--steps")) doc["steps"] = steps;
    if (app.count("--chains")) doc["chains"] = chains;
    if (app.count("--seed")) doc["seed"] = seed;
    if (app.count("--out")) doc["out"] = out_dir;
    if (app.count("--jobs")) doc["jobs"] = jobs;
    if (app.count("--format")) doc["format"] = format;

    const glab::ExperimentConfig cfg = glab::ExperimentConfig::from_json(doc);
    if (!glab::is_experiment(cfg.experiment)) {
      throw glab::InvalidSpec("unknown experiment '" + cfg.experiment + "' (expected one of " + names + ")");
    }

    const glab::ExperimentReport report = glab::run_experiment(cfg);
    const auto files = glab::write_report(report, cfg.out_dir, cfg.format);

    for (const auto& v : report.verdicts) {
      std::printf("%-4s  %s  (empirical %s, reference %s, tolerance %s)\n",
                  std::string(glab::to_string(v.status)).c_str(), v.name.c_str(),
                  glab::format_number(v.empirical).c_str(), glab::format_number(v.reference).c_str(),
                  glab::format_number(v.tolerance).c_str());
    }
    std::printf("%s: %s in %.1f s, wrote %zu files to %s\n", report.experiment.c_str(),
                report.passed() ? "passed" : "FAILED", report.wall_seconds, files.size(),
                cfg.out_dir.string().c_str());
    return report.passed() ? 0 : 1;
  } catch (const glab::InvalidSpec& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const glab::InvalidModel& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return 2;
  } catch (const glab::IoError& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return 2;
  } catch (const glab::UnknownClass& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }
}
