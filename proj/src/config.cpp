#include "neuroverify/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace neuroverify {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void set_registry(AppConfig& cfg, Registry registry) {
  cfg.verifier.registry = std::move(registry);
  cfg.verifier.validate();
}

AppConfig AppConfig::from_json(const nlohmann::json& j, const AppConfig& base,
                               const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  AppConfig c = base;
  try {
    if (j.contains("schema_version")) {
      const auto v = j.at("schema_version").get<std::string>();
      if (v != kSchemaVersion) {
        throw ValidationError("config schema_version " + v + " is not supported (expected " +
                              kSchemaVersion + ")");
      }
    }
    if (j.contains("registry")) {
      const auto& r = j.at("registry");
      if (r.is_string()) {
        std::filesystem::path p = r.get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        set_registry(c, Registry::from_json(read_json_file(p)));
      } else {
        set_registry(c, Registry::from_json(r));
      }
    }
    if (j.contains("thresholds")) c.thresholds = Thresholds::from_json(j.at("thresholds"));
    if (j.contains("verifier")) c.verifier = VerifierConfig::from_json(j.at("verifier"), c.verifier);
    if (j.contains("preference")) {
      const auto& p = j.at("preference");
      c.pair_threshold = p.value("threshold", c.pair_threshold);
      c.dpo_beta = p.value("beta", c.dpo_beta);
    }
    if (j.contains("normative")) {
      c.fit.min_fit_size = j.at("normative").value("min_fit_size", c.fit.min_fit_size);
    }
    if (j.contains("metrics")) c.ece_bins = j.at("metrics").value("ece_bins", c.ece_bins);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json AppConfig::to_json() const {
  return {{"schema_version", kSchemaVersion},
          {"registry", registry().to_json()},
          {"thresholds", thresholds.to_json()},
          {"verifier", verifier.to_json()},
          {"preference", {{"threshold", pair_threshold}, {"beta", dpo_beta}}},
          {"normative", {{"min_fit_size", fit.min_fit_size}}},
          {"metrics", {{"ece_bins", ece_bins}}}};
}

void AppConfig::validate() const {
  thresholds.validate();
  verifier.validate();
  if (!std::isfinite(pair_threshold)) throw ValidationError("preference.threshold must be finite");
  if (!(dpo_beta > 0.0) || !std::isfinite(dpo_beta)) throw ValidationError("preference.beta must be > 0");
  if (fit.min_fit_size < 4) throw ValidationError("normative.min_fit_size must be >= 4");
  if (ece_bins < 1) throw ValidationError("metrics.ece_bins must be >= 1");
}

AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path) {
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) path = env;
  }
  AppConfig defaults;
  if (!path) return defaults;
  return AppConfig::from_json(read_json_file(*path), defaults, path->parent_path());
}

}  // namespace neuroverify
