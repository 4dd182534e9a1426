#include "glab/fixtures.hpp"

#include <fstream>

#include "glab/errors.hpp"

namespace glab {

std::vector<std::string> fixture_names() {
  return {"counterexample1", "counterexample2", "counterexample3", "example4"};
}

bool is_fixture_name(std::string_view name) {
  for (const auto& n : fixture_names()) {
    if (n == name) return true;
  }
  return false;
}

ConditionalModel fixture(std::string_view name, const FixtureParams& params) {
  if (name == "counterexample1") {
    // (x0, c) jointly Gaussian with c ~ N(0,1), x0|c ~ c + N(0,1); only c = 0 is sampled.
    return ConditionalModel({{1.0, Gmm1D::gaussian(0.0, 1.0)}}, Gmm1D::gaussian(0.0, 2.0));
  }
  if (name == "counterexample2") {
    const double mu = params.separation;
    return ConditionalModel({{0.5, Gmm1D::gaussian(-mu, 1.0)}, {0.5, Gmm1D::gaussian(mu, 1.0)}});
  }
  if (name == "counterexample3") {
    const double var = params.cluster_sd * params.cluster_sd;
    const double third = 1.0 / 3.0;
    return ConditionalModel({{third, Gmm1D::gaussian(-3.0, var)},
                             {third, Gmm1D::gaussian(0.0, var)},
                             {1.0 - 2.0 * third, Gmm1D::gaussian(3.0, var)}});
  }
  if (name == "example4") {
    std::vector<Component> clusters;
    for (int i = 0; i < 12; ++i) {
      const double mean = -3.0 + 0.5 * i;
      clusters.push_back({i == 6 ? 0.476 : 0.0476, mean, 0.01});
    }
    return ConditionalModel({{1.0, Gmm1D::normalized(std::move(clusters))}},
                            Gmm1D::gaussian(0.0, 10.0));
  }
  throw InvalidSpec("unknown fixture '" + std::string(name) + "'");
}

namespace {

Gmm1D mixture_from_json(const nlohmann::json& j) {
  if (!j.contains("components") || !j["components"].is_array()) {
    throw InvalidModel("mixture entry needs a 'components' array");
  }
  std::vector<Component> comps;
  for (const auto& c : j["components"]) {
    comps.push_back({c.at("w").get<double>(), c.at("mean").get<double>(), c.at("var").get<double>()});
  }
  return Gmm1D(std::move(comps));
}

nlohmann::json mixture_to_json(const Gmm1D& m) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : m.components()) {
    comps.push_back({{"w", c.weight}, {"mean", c.mean}, {"var", c.var}});
  }
  return comps;
}

}  // namespace

ConditionalModel model_from_json(const nlohmann::json& doc) {
  try {
    if (!doc.contains("classes") || !doc["classes"].is_array()) {
      throw InvalidModel("model file needs a 'classes' array");
    }
    std::vector<ClassEntry> classes;
    for (const auto& c : doc["classes"]) {
      classes.push_back({c.at("prior").get<double>(), mixture_from_json(c)});
    }
    std::optional<Gmm1D> uncond;
    if (doc.contains("unconditional")) uncond = mixture_from_json(doc["unconditional"]);
    return ConditionalModel(std::move(classes), std::move(uncond));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel(std::string("malformed model file: ") + e.what());
  }
}

nlohmann::json model_to_json(const ConditionalModel& model) {
  nlohmann::json doc;
  doc["classes"] = nlohmann::json::array();
  for (const auto& c : model.classes()) {
    doc["classes"].push_back({{"prior", c.prior}, {"components", mixture_to_json(c.conditional)}});
  }
  if (model.has_explicit_unconditional()) {
    doc["unconditional"] = {{"components", mixture_to_json(model.unconditional())}};
  }
  return doc;
}

ConditionalModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModel("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

ConditionalModel resolve_model(const std::string& spec, const FixtureParams& params) {
  if (is_fixture_name(spec)) return fixture(spec, params);
  return load_model_file(spec);
}

}  // namespace glab
