#include "glab/sampler_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include "glab/errors.hpp"

namespace glab {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const char* what) {
  if (!j.is_object()) throw InvalidSpec(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw InvalidSpec(std::string("unknown ") + what + " key '" + key + "'");
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidSpec(std::string("bad value for '") + key + "'");
  }
}

}  // namespace

nlohmann::json to_json(const ProcessConfig& config) {
  return {{"process", std::string(to_string(config.kind))},
          {"beta_min", config.beta_min},
          {"beta_max", config.beta_max},
          {"ve_horizon", config.ve_horizon}};
}

ProcessConfig process_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"process", "beta_min", "beta_max", "ve_horizon"}, "process");
  ProcessConfig c;
  std::string kind = std::string(to_string(c.kind));
  read_key(j, "process", kind);
  c.kind = parse_process_kind(kind);
  read_key(j, "beta_min", c.beta_min);
  read_key(j, "beta_max", c.beta_max);
  read_key(j, "ve_horizon", c.ve_horizon);
  return c;
}

nlohmann::json to_json(const SamplerSpec& spec) {
  return {{"variant", std::string(to_string(spec.variant))},
          {"gamma", spec.gamma},
          {"K", spec.K},
          {"steps", spec.steps},
          {"chains", spec.chains},
          {"seed", spec.seed},
          {"process", to_json(spec.process)},
          {"class", spec.class_label},
          {"ld_step", spec.ld_step},
          {"refresh_noise_predictions", spec.refresh_noise_predictions},
          {"time_rule", std::string(to_string(spec.time_rule))},
          {"threads", spec.threads}};
}

SamplerSpec sampler_spec_from_json(const nlohmann::json& j) {
  reject_unknown(j,
                 {"variant", "gamma", "K", "steps", "chains", "seed", "process", "class", "ld_step",
                  "refresh_noise_predictions", "time_rule", "threads"},
                 "sampler");
  SamplerSpec s;
  std::string variant = std::string(to_string(s.variant));
  read_key(j, "variant", variant);
  s.variant = parse_variant(variant);
  read_key(j, "gamma", s.gamma);
  read_key(j, "K", s.K);
  read_key(j, "steps", s.steps);
  read_key(j, "chains", s.chains);
  read_key(j, "seed", s.seed);
  if (j.contains("process")) s.process = process_config_from_json(j["process"]);
  read_key(j, "class", s.class_label);
  read_key(j, "ld_step", s.ld_step);
  read_key(j, "refresh_noise_predictions", s.refresh_noise_predictions);
  std::string rule = std::string(to_string(s.time_rule));
  read_key(j, "time_rule", rule);
  s.time_rule = parse_time_rule(rule);
  read_key(j, "threads", s.threads);
  s.validate();
  return s;
}

std::filesystem::path write_batch(const std::filesystem::path& path, const SampleBatch& batch,
                                  BatchFormat format) {
  if (format == BatchFormat::Csv) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "x0\n";
    for (double x : batch.values) out << x << '\n';
    if (!out) throw IoError("write failed for " + path.string());
  } else {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (double x : batch.values) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      unsigned char bytes[8];
      for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    if (!out) throw IoError("write failed for " + path.string());
  }

  nlohmann::json side = {{"spec", to_json(batch.spec)},
                         {"n", batch.values.size()},
                         {"aborted", batch.aborted},
                         {"outside_theorem_form", batch.outside_theorem_form},
                         {"format", format == BatchFormat::Csv ? "csv" : "float64le"},
                         {"wall_seconds", batch.wall_seconds}};
  std::filesystem::path side_path = path;
  side_path += ".json";
  std::ofstream out(side_path);
  if (!out) throw IoError("cannot write " + side_path.string());
  out << side.dump(2) << '\n';
  return side_path;
}

std::vector<double> read_batch(const std::filesystem::path& path, BatchFormat format) {
  std::vector<double> values;
  if (format == BatchFormat::Csv) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "x0") throw IoError(path.string() + ": expected header 'x0'");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        values.push_back(std::stod(line));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad value '" + line + "'");
      }
    }
    return values;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  unsigned char bytes[8];
  while (in.read(reinterpret_cast<char*>(bytes), 8)) {
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    values.push_back(std::bit_cast<double>(bits));
  }
  if (in.gcount() != 0) throw IoError(path.string() + ": truncated float64 record");
  return values;
}

}  // namespace glab
