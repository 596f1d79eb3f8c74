#pragma once

// Structured report model and its text wire format.
//
// A raw model output is one JSON object followed by a paragraph introduced by
// the literal marker "[Diagnostic Summary]". The JSON carries the free-text
// reasoning fields first, then the per-region assessments and the diagnosis:
//
//   {
//     "imaging_observations": "...",
//     "clinical_integration": "...",
//     "regions": [
//       {"region": "hippocampus", "label": "mild", "confidence": 0.8,
//        "change_direction": "progressive_atrophy", "threshold_crossed": true},
//       ...
//     ],
//     "diagnosis": "MCI",
//     "diagnosis_confidence": 0.85
//   }
//
//   [Diagnostic Summary]
//   ...
//
// change_direction and threshold_crossed appear on follow-up visits only.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/types.hpp"

namespace neuroverify {

inline constexpr std::string_view kSummaryMarker = "[Diagnostic Summary]";

namespace report_keys {
inline constexpr const char* kObservations = "imaging_observations";
inline constexpr const char* kIntegration = "clinical_integration";
inline constexpr const char* kRegions = "regions";
inline constexpr const char* kDiagnosis = "diagnosis";
inline constexpr const char* kDiagnosisConfidence = "diagnosis_confidence";
inline constexpr const char* kRegion = "region";
inline constexpr const char* kLabel = "label";
inline constexpr const char* kConfidence = "confidence";
inline constexpr const char* kChangeDirection = "change_direction";
inline constexpr const char* kThresholdCrossed = "threshold_crossed";
}  // namespace report_keys

struct RegionAssessment {
  std::string region;
  Severity label = Severity::Normal;
  double confidence = 1.0;
  std::optional<ChangeDirection> change_direction;  // follow-up only
  std::optional<bool> threshold_crossed;            // follow-up only

  bool operator==(const RegionAssessment&) const = default;
};

struct StructuredReport {
  std::string imaging_observations;
  std::string clinical_integration;
  std::vector<RegionAssessment> regions;
  Diagnosis diagnosis = Diagnosis::CN;
  double diagnosis_confidence = 1.0;
  std::string summary;  // stored trimmed
  // Top-level keys in the order they appeared in the raw text. Empty for
  // reports built in code. Provenance only: not part of equality.
  std::vector<std::string> raw_key_order;

  const RegionAssessment* find(std::string_view region) const;
  RegionAssessment* find(std::string_view region);

  // Observations and integration joined, the text the C1 checks search.
  std::string reasoning_text() const;

  bool operator==(const StructuredReport& o) const;
};

enum class ParseStatus { Valid, InvalidJson, SchemaViolation };
std::string_view to_string(ParseStatus s);
std::optional<ParseStatus> parse_parse_status(std::string_view s);

struct ParseOutcome {
  ParseStatus status = ParseStatus::InvalidJson;
  std::optional<StructuredReport> report;  // present iff status == Valid
  std::vector<std::string> diagnostics;    // violations, one per failed check
  std::vector<std::string> warnings;       // non-fatal: unknown keys, missing summary marker

  bool valid() const { return status == ParseStatus::Valid; }
};

// Total: never throws on any input text.
ParseOutcome parse_raw_output(std::string_view raw, VisitKind visit, const Registry& registry);

// Canonical JSON + marker + summary. With a registry the regions are emitted in
// registry order; otherwise in stored order.
std::string serialize_report(const StructuredReport& report);
std::string serialize_report(const StructuredReport& report, const Registry& registry);

nlohmann::ordered_json report_to_json(const StructuredReport& report);

// Warns when a verdict key (regions, diagnosis, diagnosis_confidence)
// precedes a reasoning key in the recorded raw order. One warning per
// offending verdict key.
std::vector<std::string> lint_reasoning_first(const StructuredReport& report);

}  // namespace neuroverify
