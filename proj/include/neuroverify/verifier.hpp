#pragma once

// Clinically-weighted verifier.
//
//   total = M(d_pred, d_true) * sum_c lambda_c * s_c,   c in {anat, dx, long, reason, summary}
//
// M discounts the whole report for a diagnostic error (1/1.5 adjacent,
// 1/2.0 non-adjacent). Component weights depend on the visit kind; baselines
// carry no longitudinal weight.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neuroverify/constraints.hpp"
#include "neuroverify/normative.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/report.hpp"
#include "neuroverify/types.hpp"

namespace neuroverify {

struct RegionTruth {
  std::string region;
  Severity label = Severity::Normal;
  double z = 0.0;
  ToleranceZone zone = ToleranceZone::None;
  // Follow-up only.
  std::optional<Severity> prior_label;
  std::optional<double> prior_z;
  std::optional<ChangeDirection> change_direction;
  std::optional<bool> threshold_crossed;

  bool operator==(const RegionTruth&) const = default;
};

// Normative-derived labels for one visit plus the clinical diagnosis. Never
// shown to the model that produced the report being scored.
struct GroundTruth {
  std::string sample_id;
  VisitKind visit_kind = VisitKind::Baseline;
  Diagnosis diagnosis = Diagnosis::CN;
  std::vector<RegionTruth> regions;  // registry order

  const RegionTruth* find(std::string_view region) const;
  // Prior labels as a constraint context; nullopt for baselines.
  std::optional<PriorContext> prior_context() const;

  static GroundTruth from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  bool operator==(const GroundTruth&) const = default;
};

struct ComponentWeights {
  double anat = 0.25;
  double dx = 0.25;
  double longitudinal = 0.20;
  double reason = 0.15;
  double summary = 0.15;

  double sum() const { return anat + dx + longitudinal + reason + summary; }
  void validate(std::string_view what) const;  // >= 0, sums to 1
  static ComponentWeights from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool operator==(const ComponentWeights&) const = default;
};

// How tolerance-zone partial credit responds to the stated region confidence.
enum class ConfidenceScaling {
  RewardHedging,     // base + (1 - base) * (1 - confidence)
  RewardConfidence,  // base + (1 - base) * confidence
};

struct SummaryKeywords {
  std::map<Diagnosis, std::vector<std::string>> diagnosis{
      {Diagnosis::CN, {"cognitively normal", "cognitively unimpaired"}},
      {Diagnosis::MCI, {"mild cognitive impairment", "MCI"}},
      {Diagnosis::Dementia, {"dementia", "Alzheimer's disease"}},
  };
  std::map<Severity, std::vector<std::string>> severity{
      {Severity::Normal, {"normal", "preserved", "unremarkable", "no atrophy"}},
      {Severity::Mild, {"mild", "mildly", "slight"}},
      {Severity::Severe, {"severe", "severely", "marked", "pronounced"}},
  };
  // A confidence figure quoted in the summary must match the JSON value
  // within this tolerance (two printed decimals).
  double confidence_tolerance = 0.005;
};

struct VerifierConfig {
  Registry registry = Registry::defaults();
  ComponentWeights follow_up{0.25, 0.25, 0.20, 0.15, 0.15};
  ComponentWeights baseline{0.35, 0.35, 0.0, 0.15, 0.15};

  double discount_correct = 1.0;
  double discount_adjacent = 1.0 / 1.5;
  double discount_non_adjacent = 1.0 / 2.0;

  double dx_credit_adjacent = 0.5;
  double dx_credit_non_adjacent = 0.0;

  double tolerance_credit_base = 0.5;
  ConfidenceScaling confidence_scaling = ConfidenceScaling::RewardHedging;
  double adjacent_outside_zone_credit = 0.2;
  double two_level_credit = 0.0;

  double long_direction_weight = 0.6;
  double long_flag_weight = 0.4;
  double reversal_penalty = -0.5;

  ConstraintLexicon lexicon;
  SummaryKeywords keywords;

  const ComponentWeights& weights_for(VisitKind v) const {
    return v == VisitKind::FollowUp ? follow_up : baseline;
  }

  void validate() const;
  // Keys absent from `j` keep the values of `base`.
  static VerifierConfig from_json(const nlohmann::json& j, const VerifierConfig& base);
  static VerifierConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RegionScore {
  std::string region;
  Severity predicted = Severity::Normal;
  Severity truth = Severity::Normal;
  double score = 0.0;  // s_r
  double weight = 1.0;
};

struct VerifierScore {
  ParseStatus status = ParseStatus::Valid;
  VisitKind visit_kind = VisitKind::Baseline;
  double s_anat = 0.0;
  double s_dx = 0.0;
  std::optional<double> s_long;  // undefined on baselines
  double s_reason = 0.0;
  double s_summary = 0.0;
  double multiplier = 1.0;
  double total = 0.0;
  std::vector<RegionScore> regions;
  std::vector<ConstraintFinding> findings;
  std::vector<std::string> diagnostics;  // parse diagnostics for invalid candidates

  nlohmann::json to_json() const;
};

struct AnatScore {
  double value = 0.0;
  std::vector<RegionScore> regions;
};

struct DxScore {
  double value = 0.0;
  double multiplier = 1.0;
};

// Throws ValidationError when report and truth cover different regions.
AnatScore score_anat(const StructuredReport& report, const GroundTruth& truth,
                     const VerifierConfig& cfg);

DxScore score_dx(Diagnosis predicted, Diagnosis truth, const VerifierConfig& cfg);

// Throws ValidationError on a baseline truth.
double score_long(const StructuredReport& report, const GroundTruth& truth,
                  const VerifierConfig& cfg);

double score_reason(const StructuredReport& report, VisitKind visit,
                    const std::optional<PriorContext>& prior, const VerifierConfig& cfg);

// Alignment between the summary paragraph and the report's own JSON.
double score_summary(const StructuredReport& report, const VerifierConfig& cfg);

VerifierScore score(const StructuredReport& report, const GroundTruth& truth,
                    const VerifierConfig& cfg);

// Parses with the truth's visit kind; anything but a valid parse scores 0.
VerifierScore score_raw(std::string_view raw, const GroundTruth& truth, const VerifierConfig& cfg);

}  // namespace neuroverify
