#include <gtest/gtest.h>

#include "neuroverify/verifier.hpp"
#include "test_util.hpp"

using namespace neuroverify;
using nvtest::baseline_truth;
using nvtest::follow_up_truth;
using nvtest::mirror_report;
using nvtest::region;

namespace {

const VerifierConfig kCfg;

std::string dx_summary(Diagnosis d) {
  switch (d) {
    case Diagnosis::CN: return "Findings are consistent with cognitively normal status.";
    case Diagnosis::MCI: return "Findings are consistent with mild cognitive impairment.";
    default: return "Findings are consistent with dementia.";
  }
}

// Follow-up truth with one region worsening normal -> mild across the cut.
GroundTruth crossing_truth() {
  auto t = follow_up_truth(Diagnosis::MCI);
  auto& h = region(t, "hippocampus");
  h.label = Severity::Mild;
  h.z = -0.9;
  h.zone = ToleranceZone::None;
  h.prior_z = -0.3;
  h.change_direction = ChangeDirection::ProgressiveAtrophy;
  h.threshold_crossed = true;
  return t;
}

StructuredReport perfect_for(const GroundTruth& t) {
  auto r = mirror_report(t);
  r.summary = dx_summary(r.diagnosis);
  std::string obs;
  for (const auto& a : r.regions) {
    if (is_abnormal(a.label)) obs += "Abnormal " + a.region + ". ";
    if (a.threshold_crossed.value_or(false)) obs += "The " + a.region + " shows progression. ";
  }
  if (!obs.empty()) r.imaging_observations = obs;
  return r;
}

}  // namespace

TEST(Verifier, PerfectBaselineScoresOne) {
  const auto t = baseline_truth();
  const auto s = score(perfect_for(t), t, kCfg);
  EXPECT_EQ(s.total, 1.0);
  EXPECT_FALSE(s.s_long);
  EXPECT_EQ(s.multiplier, 1.0);
}

TEST(Verifier, PerfectFollowUpScoresOne) {
  const auto t = crossing_truth();
  const auto s = score(perfect_for(t), t, kCfg);
  EXPECT_EQ(s.s_anat, 1.0);
  EXPECT_EQ(s.s_long, 1.0);
  EXPECT_EQ(s.s_reason, 1.0);
  EXPECT_EQ(s.s_summary, 1.0);
  EXPECT_EQ(s.total, 1.0);
}

TEST(Verifier, AdjacentDiagnosisWorkedExample) {
  const auto t = follow_up_truth(Diagnosis::CN);
  auto r = perfect_for(t);
  r.diagnosis = Diagnosis::MCI;
  r.summary = dx_summary(Diagnosis::MCI);
  const auto s = score(r, t, kCfg);
  EXPECT_EQ(s.s_dx, 0.5);
  EXPECT_NEAR(s.multiplier, 1.0 / 1.5, 1e-15);
  // (0.25 + 0.25 * 0.5 + 0.20 + 0.15 + 0.15) / 1.5
  EXPECT_NEAR(s.total, 0.5833333333333334, 1e-9);
}

TEST(Verifier, MultiplierOrdering) {
  const auto t = baseline_truth(Diagnosis::CN);
  auto r = perfect_for(t);
  double totals[3];
  for (auto d : {Diagnosis::CN, Diagnosis::MCI, Diagnosis::Dementia}) {
    r.diagnosis = d;
    r.summary = dx_summary(d);
    totals[code(d)] = score(r, t, kCfg).total;
  }
  EXPECT_LT(totals[2], totals[1]);
  EXPECT_LT(totals[1], totals[0]);
  EXPECT_EQ(score_dx(Diagnosis::Dementia, Diagnosis::CN, kCfg).multiplier, 0.5);
  EXPECT_EQ(score_dx(Diagnosis::Dementia, Diagnosis::CN, kCfg).value, 0.0);
}

TEST(Anatomy, WorkedExampleWithZoneAndOutOfZoneCredit) {
  auto t = baseline_truth();
  auto r = mirror_report(t);
  // temporal: truth normal outside any zone, predicted mild -> 0.2
  region(r, "temporal_neocortex").label = Severity::Mild;
  // ventricles: truth mild inside the severe boundary zone, predicted severe at
  // confidence 0.8 -> 0.5 + 0.5 * (1 - 0.8) = 0.6
  region(t, "lateral_ventricles").label = Severity::Mild;
  region(t, "lateral_ventricles").zone = ToleranceZone::SevereBoundary;
  region(r, "lateral_ventricles").label = Severity::Severe;
  region(r, "lateral_ventricles").confidence = 0.8;
  const auto a = score_anat(r, t, kCfg);
  // (1.2 + 1.1 + 0.2 + 1.0 + 0.6) / 5.3
  EXPECT_NEAR(a.value, 0.7735849056603773, 1e-12);
  EXPECT_NEAR(a.regions[4].score, 0.6, 1e-12);
  EXPECT_NEAR(a.regions[2].score, 0.2, 1e-12);
}

TEST(Anatomy, WrongZoneGetsOutOfZoneCredit) {
  auto t = baseline_truth();
  auto r = mirror_report(t);
  region(t, "amygdala").zone = ToleranceZone::SevereBoundary;  // truth normal but zone belongs to mild/severe
  region(r, "amygdala").label = Severity::Mild;
  const auto a = score_anat(r, t, kCfg);
  EXPECT_NEAR(a.regions[3].score, 0.2, 1e-12);
}

TEST(Anatomy, TwoLevelErrorScoresZero) {
  auto t = baseline_truth();
  auto r = mirror_report(t);
  region(r, "hippocampus").label = Severity::Severe;
  EXPECT_EQ(score_anat(r, t, kCfg).regions[0].score, 0.0);
}

TEST(Anatomy, ConfidenceScalingVariants) {
  auto t = baseline_truth();
  region(t, "hippocampus").zone = ToleranceZone::MildBoundary;
  auto r = mirror_report(t, 0.9);
  region(r, "hippocampus").label = Severity::Mild;
  EXPECT_NEAR(score_anat(r, t, kCfg).regions[0].score, 0.55, 1e-12);
  auto cfg = kCfg;
  cfg.confidence_scaling = ConfidenceScaling::RewardConfidence;
  EXPECT_NEAR(score_anat(r, t, cfg).regions[0].score, 0.95, 1e-12);
}

TEST(Anatomy, RegionMismatchThrows) {
  const auto t = baseline_truth();
  auto r = mirror_report(t);
  r.regions.pop_back();
  EXPECT_THROW(score_anat(r, t, kCfg), ValidationError);
  EXPECT_THROW(score(r, t, kCfg), ValidationError);
}

TEST(Longitudinal, DirectionAndFlagWeights) {
  const auto t = crossing_truth();
  auto r = perfect_for(t);
  region(r, "hippocampus").change_direction = ChangeDirection::Stable;
  EXPECT_NEAR(score_long(r, t, kCfg), (4.0 + 0.4) / 5.0, 1e-12);
  region(r, "hippocampus").threshold_crossed = false;
  EXPECT_NEAR(score_long(r, t, kCfg), 4.0 / 5.0, 1e-12);
}

TEST(Longitudinal, ReversalPenaltyAndClamp) {
  auto t = follow_up_truth();
  for (auto& rt : t.regions) rt.prior_label = Severity::Severe;
  auto r = mirror_report(t);
  EXPECT_EQ(score_long(r, t, kCfg), 0.0);  // mean -0.5 clamped
  region(t, "hippocampus").prior_label = Severity::Normal;
  r = mirror_report(t);
  EXPECT_NEAR(score_long(r, t, kCfg), std::max(0.0, (1.0 - 4 * 0.5) / 5.0), 1e-12);
}

TEST(Longitudinal, BaselineThrows) {
  const auto t = baseline_truth();
  EXPECT_THROW(score_long(mirror_report(t), t, kCfg), ValidationError);
}

TEST(Reasoning, NoApplicableChecksScoresOne) {
  const auto t = baseline_truth();
  EXPECT_EQ(score_reason(mirror_report(t), VisitKind::Baseline, std::nullopt, kCfg), 1.0);
}

TEST(Reasoning, FractionOfChecksPassed) {
  const auto t = crossing_truth();
  auto r = perfect_for(t);
  r.imaging_observations = "Volumes reviewed.";
  // checks: mention (fail) + progression (fail) + 5 C3 checks (pass)
  EXPECT_NEAR(score_reason(r, VisitKind::FollowUp, t.prior_context(), kCfg), 5.0 / 7.0, 1e-12);
  region(r, "hippocampus").threshold_crossed = false;  // C3(a) now fails too, progression no longer applies
  EXPECT_NEAR(score_reason(r, VisitKind::FollowUp, t.prior_context(), kCfg), 4.0 / 6.0, 1e-12);
}

TEST(Summary, ChecksIndividually) {
  auto t = baseline_truth(Diagnosis::Dementia);
  region(t, "hippocampus").label = Severity::Severe;
  auto r = perfect_for(t);
  r.summary = "Findings are consistent with dementia. Severe atrophy of the hippocampus.";
  EXPECT_EQ(score_summary(r, kCfg), 1.0);
  r.summary = "Findings are consistent with dementia.";  // severe region unnamed
  EXPECT_NEAR(score_summary(r, kCfg), 2.0 / 3.0, 1e-12);
  r.summary = "Severe atrophy of the hippocampus.";  // no dx keyword
  EXPECT_NEAR(score_summary(r, kCfg), 2.0 / 3.0, 1e-12);
  r.summary = "Dementia. The hippocampus appears normal.";  // contradiction, yet named
  EXPECT_NEAR(score_summary(r, kCfg), 2.0 / 3.0, 1e-12);
  r.summary = "Dementia. The hippocampus is severe, not normal.";  // own keyword present
  EXPECT_EQ(score_summary(r, kCfg), 1.0);
}

TEST(Summary, QuotedConfidenceMustMatch) {
  const auto t = baseline_truth();
  auto r = perfect_for(t);
  r.diagnosis_confidence = 0.87;
  r.summary = dx_summary(Diagnosis::CN) + " (diagnostic confidence 0.87)";
  EXPECT_EQ(score_summary(r, kCfg), 1.0);
  r.summary = dx_summary(Diagnosis::CN) + " Confidence: 87%.";
  EXPECT_EQ(score_summary(r, kCfg), 1.0);
  r.summary = dx_summary(Diagnosis::CN) + " (diagnostic confidence 0.95)";
  EXPECT_NEAR(score_summary(r, kCfg), 2.0 / 3.0, 1e-12);
}

TEST(Summary, WordBoundariesAvoidFalseContradiction) {
  auto t = baseline_truth(Diagnosis::MCI);
  region(t, "amygdala").label = Severity::Mild;
  auto r = perfect_for(t);
  r.summary = "Mild cognitive impairment. Mildly reduced amygdala volume, abnormal for age.";
  EXPECT_EQ(score_summary(r, kCfg), 1.0);
}

TEST(ScoreRaw, InvalidOutputsScoreZero) {
  const auto t = baseline_truth();
  const auto s = score_raw("I cannot produce a report.", t, kCfg);
  EXPECT_EQ(s.status, ParseStatus::InvalidJson);
  EXPECT_EQ(s.total, 0.0);
  EXPECT_FALSE(s.diagnostics.empty());
  auto j = report_to_json(mirror_report(t));
  j.erase("regions");
  const auto s2 = score_raw(j.dump(), t, kCfg);
  EXPECT_EQ(s2.status, ParseStatus::SchemaViolation);
  EXPECT_EQ(s2.total, 0.0);
}

TEST(ScoreJson, BaselineLongIsNull) {
  const auto t = baseline_truth();
  const auto j = score(perfect_for(t), t, kCfg).to_json();
  EXPECT_TRUE(j.at("components").at("long").is_null());
  EXPECT_EQ(j.at("total"), 1.0);
  EXPECT_EQ(j.at("status"), "valid");
  EXPECT_EQ(j.at("regions").size(), 5u);
}

TEST(GroundTruthJson, RoundTripAndValidation) {
  const auto t = crossing_truth();
  EXPECT_EQ(GroundTruth::from_json(t.to_json()), t);
  auto j = t.to_json();
  j["regions"][0].erase("prior_label");
  EXPECT_THROW(GroundTruth::from_json(j), ValidationError);
  auto b = baseline_truth().to_json();
  b["diagnosis"] = "AD";
  EXPECT_THROW(GroundTruth::from_json(b), ValidationError);
}

TEST(Config, DefaultsAndRoundTrip) {
  EXPECT_NO_THROW(kCfg.validate());
  const auto back = VerifierConfig::from_json(kCfg.to_json());
  EXPECT_EQ(back.to_json().dump(), kCfg.to_json().dump());
  EXPECT_EQ(back.follow_up, kCfg.follow_up);
  EXPECT_EQ(kCfg.baseline.longitudinal, 0.0);
}

TEST(Config, OverridesAndValidation) {
  const auto c = VerifierConfig::from_json({{"lambda_follow_up", {0.2, 0.2, 0.2, 0.2, 0.2}},
                                            {"region_weights", {{"hippocampus", 2.0}}},
                                            {"anatomy", {{"confidence_scaling", "reward_confidence"}}}});
  EXPECT_EQ(c.follow_up.anat, 0.2);
  EXPECT_EQ(c.registry.at("hippocampus").weight, 2.0);
  EXPECT_EQ(c.confidence_scaling, ConfidenceScaling::RewardConfidence);
  EXPECT_EQ(c.baseline, kCfg.baseline);
  EXPECT_THROW(VerifierConfig::from_json({{"lambda_follow_up", {0.5, 0.5, 0.5, 0.0, 0.0}}}), ValidationError);
  EXPECT_THROW(VerifierConfig::from_json({{"lambda_baseline", {1.2, -0.2, 0.0, 0.0, 0.0}}}), ValidationError);
  EXPECT_THROW(VerifierConfig::from_json({{"anatomy", {{"confidence_scaling", "bold"}}}}), ValidationError);
}
