#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "glab/errors.hpp"
#include "glab/experiments.hpp"

#ifndef GLAB_VERSION
#define GLAB_VERSION "0.0.0"
#endif

namespace glab {

std::string_view version() noexcept { return GLAB_VERSION; }

std::string_view to_string(Check c) noexcept {
  switch (c) {
    case Check::AbsWithin: return "abs_within";
    case Check::RelWithin: return "rel_within";
    case Check::Below: return "below";
    case Check::Above: return "above";
  }
  return "?";
}

std::string_view to_string(Status s) noexcept {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Skip: return "SKIP";
  }
  return "?";
}

Verdict make_verdict(std::string name, double empirical, double reference, double tolerance,
                     Check check, std::string note) {
  Verdict v{std::move(name), empirical, reference, tolerance, check, Status::Skip, std::move(note)};
  if (!std::isfinite(empirical) || !std::isfinite(reference) || !std::isfinite(tolerance)) {
    return v;
  }
  bool ok = false;
  switch (check) {
    case Check::AbsWithin: ok = std::abs(empirical - reference) <= tolerance; break;
    case Check::RelWithin: ok = std::abs(empirical - reference) <= tolerance * std::abs(reference); break;
    case Check::Below: ok = empirical < reference - tolerance; break;
    case Check::Above: ok = empirical > reference + tolerance; break;
  }
  v.status = ok ? Status::Pass : Status::Fail;
  return v;
}

Verdict skip_verdict(std::string name, std::string note) {
  Verdict v;
  v.name = std::move(name);
  v.empirical = std::nan("");
  v.reference = std::nan("");
  v.tolerance = std::nan("");
  v.note = std::move(note);
  return v;
}

bool ExperimentReport::passed() const {
  for (const auto& v : verdicts) {
    if (v.status == Status::Fail) return false;
  }
  return true;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string opt(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

// Quote a CSV field only when it needs it.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json number_or_null(const std::optional<double>& v) {
  return v ? number_or_null(*v) : nlohmann::json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string rows_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment,fixture,sampler,gamma,gamma_prime,K,steps,chains,seed,n,mean,var,skew,"
         "oracle_var,ks,w1,verdict\n";
  for (const auto& r : report.rows) {
    out << field(r.experiment) << ',' << field(r.fixture) << ',' << field(r.sampler) << ','
        << format_number(r.gamma) << ',' << opt(r.gamma_prime) << ',' << r.K << ',' << r.steps
        << ',' << r.chains << ',' << r.seed << ',' << r.stats.n << ','
        << format_number(r.stats.mean) << ',' << format_number(r.stats.var) << ','
        << format_number(r.stats.skew) << ',' << opt(r.oracle_var) << ',' << opt(r.ks) << ','
        << opt(r.w1) << ',' << r.verdict << '\n';
  }
  return out.str();
}

std::string verdicts_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment,verdict,check,empirical,reference,tolerance,status,note\n";
  for (const auto& v : report.verdicts) {
    out << field(report.experiment) << ',' << field(v.name) << ',' << to_string(v.check) << ','
        << format_number(v.empirical) << ',' << format_number(v.reference) << ','
        << format_number(v.tolerance) << ',' << to_string(v.status) << ',' << field(v.note) << '\n';
  }
  return out.str();
}

nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"experiment", r.experiment},
                    {"fixture", r.fixture},
                    {"sampler", r.sampler},
                    {"gamma", r.gamma},
                    {"gamma_prime", number_or_null(r.gamma_prime)},
                    {"K", r.K},
                    {"steps", r.steps},
                    {"chains", r.chains},
                    {"seed", r.seed},
                    {"n", r.stats.n},
                    {"mean", number_or_null(r.stats.mean)},
                    {"var", number_or_null(r.stats.var)},
                    {"skew", number_or_null(r.stats.skew)},
                    {"se_mean", number_or_null(r.stats.se_mean)},
                    {"se_var", number_or_null(r.stats.se_var)},
                    {"se_skew", number_or_null(r.stats.se_skew)},
                    {"oracle_var", number_or_null(r.oracle_var)},
                    {"ks", number_or_null(r.ks)},
                    {"w1", number_or_null(r.w1)},
                    {"verdict", r.verdict}});
  }
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : report.verdicts) {
    verdicts.push_back({{"name", v.name},
                        {"check", std::string(to_string(v.check))},
                        {"empirical", number_or_null(v.empirical)},
                        {"reference", number_or_null(v.reference)},
                        {"tolerance", number_or_null(v.tolerance)},
                        {"status", std::string(to_string(v.status))},
                        {"note", v.note}});
  }
  return {{"experiment", report.experiment},
          {"version", report.version},
          {"config", report.config},
          {"passed", report.passed()},
          {"rows", rows},
          {"verdicts", verdicts}};
}

std::vector<std::filesystem::path> write_report(const ExperimentReport& report,
                                                const std::filesystem::path& out_dir,
                                                ReportFormat format) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  const std::string base = report.experiment;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = out_dir / name;
    write_text(path, text);
    written.push_back(path);
  };

  if (format == ReportFormat::Csv) {
    emit(base + ".csv", rows_csv(report));
    emit(base + "_verdicts.csv", verdicts_csv(report));
  } else {
    emit(base + ".json", report_json(report).dump(2) + "\n");
  }

  nlohmann::json manifest = {{"experiment", base}, {"plots", nlohmann::json::array()}};
  for (const auto& plot : report.plots) {
    std::ostringstream out;
    out << '#';
    for (const auto& c : plot.columns) out << ' ' << c;
    out << '\n';
    for (const auto& row : plot.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? " " : "") << format_number(row[i]);
      out << '\n';
    }
    const std::string file = base + "_" + plot.name + ".dat";
    emit(file, out.str());
    manifest["plots"].push_back(
        {{"file", file}, {"description", plot.description}, {"columns", plot.columns}});
  }
  emit(base + "_plots.json", manifest.dump(2) + "\n");

  const nlohmann::json meta = {{"experiment", base},
                               {"version", report.version},
                               {"wall_seconds", report.wall_seconds},
                               {"passed", report.passed()},
                               {"config", report.config}};
  emit(base + "_meta.json", meta.dump(2) + "\n");
  return written;
}

}  // namespace glab
