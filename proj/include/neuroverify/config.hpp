#pragma once

// Shared configuration document for every command.
//
//   {
//     "schema_version": "1.0",
//     "registry": {...} | "path/to/registry.json",
//     "thresholds": {"mild_cut": -0.5, "severe_cut": -1.5, "tolerance": 0.25},
//     "verifier": {<VerifierConfig keys>},
//     "preference": {"threshold": 0.6, "beta": 0.1},
//     "normative": {"min_fit_size": 30},
//     "metrics": {"ece_bins": 10}
//   }
//
// Resolution order: command-line flags, then the config file (--config or the
// NEUROVERIFY_CONFIG environment variable), then built-in defaults. A relative
// registry path is resolved against the config file's directory.

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "neuroverify/normative.hpp"
#include "neuroverify/preference.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/verifier.hpp"

namespace neuroverify {

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr const char* kConfigEnvVar = "NEUROVERIFY_CONFIG";

struct AppConfig {
  Thresholds thresholds;
  VerifierConfig verifier;  // carries the registry
  double pair_threshold = kDefaultQualityThreshold;
  double dpo_beta = 0.1;
  FitOptions fit;
  int ece_bins = 10;

  const Registry& registry() const { return verifier.registry; }

  // Overlays `j` on `base`. `base_dir` resolves a registry given as a path.
  static AppConfig from_json(const nlohmann::json& j, const AppConfig& base,
                             const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  void validate() const;
};

// Reads a JSON document; IoError when unreadable, ValidationError when
// malformed.
nlohmann::json read_json_file(const std::filesystem::path& path);

// Defaults overlaid with the file named by `explicit_path`, or else by the
// environment variable when set and non-empty.
AppConfig load_config(const std::optional<std::filesystem::path>& explicit_path);

// Replaces the registry in `cfg` (and re-validates region weights).
void set_registry(AppConfig& cfg, Registry registry);

}  // namespace neuroverify
