#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neuroverify/synth.hpp"
#include "test_util.hpp"

using namespace neuroverify;
using nvtest::baseline_truth;
using nvtest::follow_up_truth;

namespace {

const VerifierConfig kCfg;
const Registry kReg = Registry::defaults();

std::string cohort_csv(const SynthCohort& c) {
  std::ostringstream os;
  write_cohort_csv(os, c.rows, kReg);
  return os.str();
}

CohortSpec single_class(Diagnosis dx) {
  auto s = CohortSpec::defaults();
  s.mixture = {{Diagnosis::CN, 0.0}, {Diagnosis::MCI, 0.0}, {Diagnosis::Dementia, 0.0}};
  s.mixture[dx] = 1.0;
  s.subject_noise = 0.0;
  return s;
}

ErrorSpec only(ErrorType t) {
  ErrorSpec e;
  e.probability[t] = 1.0;
  return e;
}

bool has_rule(const VerifierScore& s, Rule r) {
  return std::any_of(s.findings.begin(), s.findings.end(), [&](const auto& f) { return f.rule == r; });
}

}  // namespace

TEST(Rng, UniformUsesTopFiftyThreeBits) {
  std::mt19937_64 ref(42);
  Rng rng(42);
  for (int i = 0; i < 100; ++i) {
    const double want = static_cast<double>(ref() >> 11) * 0x1.0p-53;
    EXPECT_EQ(rng.uniform01(), want);
  }
}

TEST(Rng, IndexAndNormalBehave) {
  Rng rng(1);
  std::vector<int> counts(7, 0);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    ++counts[rng.index(7)];
    const double z = rng.normal();
    ASSERT_TRUE(std::isfinite(z));
    sum += z;
    sq += z * z;
  }
  for (int c : counts) EXPECT_GT(c, 2500);
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
  EXPECT_THROW(rng.index(0), ValidationError);
}

TEST(Rng, DeriveSeedSeparatesStreams) {
  EXPECT_EQ(derive_seed(7, "pool", 3), derive_seed(7, "pool", 3));
  EXPECT_NE(derive_seed(7, "pool", 3), derive_seed(7, "pool", 4));
  EXPECT_NE(derive_seed(7, "pool", 3), derive_seed(8, "pool", 3));
  EXPECT_NE(derive_seed(7, "pool"), derive_seed(7, "cohort"));
}

TEST(Cohort, DeterministicForSeed) {
  const auto spec = CohortSpec::defaults();
  const auto a = gen_cohort(spec, 30, 3, 99);
  const auto b = gen_cohort(spec, 30, 3, 99);
  EXPECT_EQ(cohort_csv(a), cohort_csv(b));
  EXPECT_EQ(a.truths, b.truths);
  EXPECT_NE(cohort_csv(a), cohort_csv(gen_cohort(spec, 30, 3, 100)));
  ASSERT_EQ(a.rows.size(), 90u);
  EXPECT_EQ(sample_id_of(a.rows[0]), "S0001_V0");
  EXPECT_EQ(sample_id_of(a.rows[4]), "S0002_V1");
  EXPECT_EQ(a.truths[0].visit_kind, VisitKind::Baseline);
  EXPECT_EQ(a.truths[1].visit_kind, VisitKind::FollowUp);
}

TEST(Cohort, ZeroNoiseCognitivelyNormalFitRecoversTrueModel) {
  const auto spec = single_class(Diagnosis::CN);
  const auto c = gen_cohort(spec, 200, 1, 3);
  const auto fitted = fit_normative(c.rows, kReg);
  const auto truth = spec.true_model();
  for (std::size_t r = 0; r < truth.regions.size(); ++r) {
    const auto& want = truth.regions[r].second;
    const auto& got = fitted.regions[r].second;
    EXPECT_NEAR(got.alpha, want.alpha, 1e-12);
    EXPECT_NEAR(got.beta_age, want.beta_age, 1e-14);
    EXPECT_NEAR(got.beta_sex, want.beta_sex, 1e-12);
    EXPECT_NEAR(got.sigma, 0.0, 1e-12);
  }
  for (const auto& t : c.truths) {
    for (const auto& rt : t.regions) {
      EXPECT_EQ(rt.label, Severity::Normal);
      EXPECT_NEAR(rt.z, 0.0, 1e-9);
    }
  }
}

TEST(Cohort, DementiaDriftReachesSevere) {
  const auto c = gen_cohort(single_class(Diagnosis::Dementia), 1, 5, 4);
  ASSERT_EQ(c.truths.size(), 5u);
  for (std::size_t v = 0; v < 5; ++v) {
    const auto* h = c.truths[v].find("hippocampus");
    EXPECT_NEAR(h->z, -1.6 - 0.4 * v, 1e-9);
    EXPECT_EQ(h->label, Severity::Severe);
    const auto* vent = c.truths[v].find("lateral_ventricles");
    EXPECT_NEAR(vent->z, 1.2 + 0.25 * v, 1e-9);
  }
  // temporal: -1.0, -1.2, -1.4, -1.6 crosses into severe at visit 3
  const auto* t2 = c.truths[2].find("temporal_neocortex");
  const auto* t3 = c.truths[3].find("temporal_neocortex");
  EXPECT_EQ(t2->label, Severity::Mild);
  EXPECT_EQ(t2->threshold_crossed, false);
  EXPECT_EQ(t3->label, Severity::Severe);
  EXPECT_EQ(t3->prior_label, Severity::Mild);
  EXPECT_EQ(t3->threshold_crossed, true);
  EXPECT_EQ(t3->change_direction, ChangeDirection::ProgressiveAtrophy);
}

TEST(Cohort, DeriveTruthsNeedsDiagnosis) {
  auto c = gen_cohort(CohortSpec::defaults(), 2, 1, 1);
  c.rows[1].diagnosis.reset();
  EXPECT_THROW(derive_truths(c.rows, CohortSpec::defaults().true_model(), kReg, Thresholds{}), ValidationError);
  EXPECT_THROW(gen_cohort(CohortSpec::defaults(), 0, 1, 1), ValidationError);
  EXPECT_THROW(gen_cohort(CohortSpec::defaults(), 1, 0, 1), ValidationError);
}

TEST(CohortSpec, JsonRoundTripAndPartialOverride) {
  const auto d = CohortSpec::defaults();
  EXPECT_EQ(CohortSpec::from_json(d.to_json()).to_json(), d.to_json());
  const auto s = CohortSpec::from_json({{"regions", {{{"region", "amygdala"}, {"sigma", 0.5}}}},
                                        {"mixture", {{"CN", 1.0}, {"MCI", 0.0}, {"Dementia", 0.0}}},
                                        {"age_range", {60, 70}}});
  EXPECT_EQ(s.regions[3].sigma, 0.5);
  EXPECT_EQ(s.regions[3].alpha, d.regions[3].alpha);
  EXPECT_EQ(s.age_min, 60.0);
  EXPECT_EQ(s.mixture.at(Diagnosis::CN), 1.0);
}

TEST(CohortSpec, ValidationErrors) {
  auto s = CohortSpec::defaults();
  s.mixture[Diagnosis::CN] = 0.5;
  EXPECT_THROW(s.validate(), ValidationError);
  s = CohortSpec::defaults();
  s.regions[0].sigma = 0.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = CohortSpec::defaults();
  s.trajectories[Diagnosis::MCI].drift["cerebellum"] = -1.0;
  EXPECT_THROW(s.validate(), ValidationError);
  s = CohortSpec::defaults();
  s.male_fraction = 1.5;
  EXPECT_THROW(s.validate(), ValidationError);
  s = CohortSpec::defaults();
  s.age_min = 90;
  s.age_max = 55;
  EXPECT_THROW(s.validate(), ValidationError);
  EXPECT_THROW(CohortSpec::from_json({{"regions", {{{"region", "cerebellum"}}}}}), ValidationError);
  EXPECT_THROW(CohortSpec::from_json({{"mixture", {{"AD", 1.0}}}}), ValidationError);
  EXPECT_THROW(CohortSpec::from_json({{"subject_noise", "loud"}}), ValidationError);
}

TEST(CleanReports, ScoreOneAcrossCohort) {
  const auto c = gen_cohort(CohortSpec::defaults(), 60, 3, 8);
  for (std::size_t i = 0; i < c.truths.size(); ++i) {
    const auto raw = gen_clean_report(c.truths[i], kCfg, i);
    const auto s = score_raw(raw, c.truths[i], kCfg);
    ASSERT_EQ(s.total, 1.0) << c.truths[i].sample_id << "\n" << raw;
  }
}

TEST(Inject, EmptySpecReturnsCleanUnchanged) {
  const auto t = follow_up_truth();
  const auto clean = gen_clean_report(t, kCfg, 1);
  const auto r = inject_errors(clean, ErrorSpec{}, t, kCfg, 5);
  EXPECT_EQ(r.raw, clean);
  EXPECT_TRUE(r.manifest.applied.empty());
  EXPECT_THROW(inject_errors("not a report", only(ErrorType::DxAdjacent), t, kCfg, 5), ValidationError);
}

TEST(Inject, DxNonAdjacentOnCognitivelyNormal) {
  const auto t = baseline_truth(Diagnosis::CN);
  const auto clean = gen_clean_report(t, kCfg, 1);
  const auto r = inject_errors(clean, only(ErrorType::DxNonAdjacent), t, kCfg, 5);
  ASSERT_TRUE(r.manifest.has(ErrorType::DxNonAdjacent));
  const auto parsed = parse_raw_output(r.raw, t.visit_kind, kReg);
  ASSERT_TRUE(parsed.valid());
  EXPECT_EQ(parsed.report->diagnosis, Diagnosis::Dementia);
  EXPECT_EQ(score_raw(r.raw, t, kCfg).multiplier, 0.5);

  const auto mci = baseline_truth(Diagnosis::MCI);
  const auto skipped = inject_errors(gen_clean_report(mci, kCfg, 1), only(ErrorType::DxNonAdjacent), mci, kCfg, 5);
  EXPECT_FALSE(skipped.manifest.has(ErrorType::DxNonAdjacent));
  ASSERT_EQ(skipped.manifest.skipped.size(), 1u);
}

TEST(Inject, ImpossibleReversalTriggersC2) {
  auto t = follow_up_truth(Diagnosis::Dementia);
  auto& h = nvtest::region(t, "hippocampus");
  h.label = Severity::Severe;
  h.prior_label = Severity::Severe;
  h.z = h.prior_z.emplace(-2.0);
  const auto clean = gen_clean_report(t, kCfg, 2);
  const auto r = inject_errors(clean, only(ErrorType::ImpossibleReversal), t, kCfg, 3);
  ASSERT_TRUE(r.manifest.has(ErrorType::ImpossibleReversal));
  EXPECT_EQ(r.manifest.applied[0].region, "hippocampus");
  const auto s = score_raw(r.raw, t, kCfg);
  EXPECT_TRUE(has_rule(s, Rule::ImplausibleReversal));
  EXPECT_LT(s.total, 1.0);
  EXPECT_LT(*s.s_long, 1.0);
}

TEST(Inject, TwoLevelFlipOnNormalRegionGoesSevere) {
  const auto t = baseline_truth();
  StructuredReport rep = gen_clean_report_model(t, kCfg, 1);
  Rng rng(4);
  std::set<std::string> touched;
  const auto a = apply_corruption(rep, ErrorType::TwoLevelLabelFlip, t, kCfg, rng, touched);
  ASSERT_TRUE(a);
  EXPECT_EQ(rep.find(a->region)->label, Severity::Severe);
  EXPECT_TRUE(touched.count(a->region));
  EXPECT_EQ(score_anat(rep, t, kCfg).regions[kReg.index_of(a->region).value()].score, 0.0);
}

TEST(Inject, TouchedRegionsAreNotReused) {
  const auto t = baseline_truth();
  StructuredReport rep = gen_clean_report_model(t, kCfg, 1);
  Rng rng(4);
  std::set<std::string> touched;
  for (std::size_t i = 0; i < kReg.size(); ++i) {
    ASSERT_TRUE(apply_corruption(rep, ErrorType::AdjacentLabelFlip, t, kCfg, rng, touched));
  }
  EXPECT_EQ(touched.size(), kReg.size());
  EXPECT_FALSE(apply_corruption(rep, ErrorType::AdjacentLabelFlip, t, kCfg, rng, touched));
}

TEST(Inject, EveryAppliedTypeLowersTheScore) {
  const auto c = gen_cohort(CohortSpec::defaults(), 30, 3, 12);
  for (ErrorType type : kAllErrorTypes) {
    int applied = 0;
    for (std::size_t i = 0; i < c.truths.size(); ++i) {
      const auto clean = gen_clean_report(c.truths[i], kCfg, i);
      const auto r = inject_errors(clean, only(type), c.truths[i], kCfg, i + 1000);
      if (!r.manifest.has(type)) continue;
      ++applied;
      EXPECT_LT(score_raw(r.raw, c.truths[i], kCfg).total, 1.0) << to_string(type) << " " << c.truths[i].sample_id;
    }
    EXPECT_GT(applied, 0) << to_string(type);
  }
}

TEST(ErrorSpec, NamesJsonAndValidation) {
  for (ErrorType t : kAllErrorTypes) EXPECT_EQ(parse_error_type(to_string(t)), t);
  EXPECT_FALSE(parse_error_type("typo"));
  const auto e = ErrorSpec::from_json({{"omit_mention", 0.5}, {"dx_adjacent", 0.0}});
  EXPECT_EQ(e.probability.at(ErrorType::OmitMention), 0.5);
  EXPECT_EQ(ErrorSpec::from_json(e.to_json()).probability, e.probability);
  EXPECT_THROW(ErrorSpec::from_json({{"typo", 0.5}}), ValidationError);
  EXPECT_THROW(ErrorSpec::from_json({{"omit_mention", "high"}}), ValidationError);
  EXPECT_THROW(ErrorSpec::from_json({{"omit_mention", 1.5}}), ValidationError);
  EXPECT_THROW(ErrorSpec::from_json(nlohmann::json::array()), ValidationError);
}

TEST(Manifest, Json) {
  InjectionManifest m;
  m.applied.push_back({ErrorType::OmitMention, "amygdala", "dropped 1 sentence"});
  m.skipped.push_back({ErrorType::DxNonAdjacent, "truth is MCI"});
  const auto j = m.to_json();
  EXPECT_EQ(j.at("applied")[0].at("type"), "omit_mention");
  EXPECT_EQ(j.at("skipped")[0].at("reason"), "truth is MCI");
  EXPECT_TRUE(m.has(ErrorType::OmitMention));
  EXPECT_FALSE(m.has(ErrorType::DxNonAdjacent));
}

TEST(Pool, IndependentPoolLayout) {
  const auto c = gen_cohort(CohortSpec::defaults(), 10, 2, 6);
  for (std::size_t i = 0; i < c.truths.size(); ++i) {
    const auto g = gen_pool(c.truths[i], PoolSpec::defaults(), kCfg, i);
    ASSERT_EQ(g.pool.candidates.size(), 4u);
    ASSERT_EQ(g.manifests.size(), 4u);
    EXPECT_EQ(g.pool.candidates[g.clean_index], g.pool.gt_text);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(g.manifests[j].applied.empty(), j == g.clean_index);
      const double s = score_raw(g.pool.candidates[j], c.truths[i], kCfg).total;
      EXPECT_EQ(s == 1.0, j == g.clean_index);
    }
    const auto again = gen_pool(c.truths[i], PoolSpec::defaults(), kCfg, i);
    EXPECT_EQ(again.pool.candidates, g.pool.candidates);
    EXPECT_EQ(g.manifest_json().at("clean_index"), g.clean_index);
  }
}

// Scores are non-increasing along the chain; a later corruption can land on
// a pass/fail check that an earlier one already failed.
TEST(Pool, NestedCandidatesAccumulateAndRankInOrder) {
  auto spec = PoolSpec::defaults();
  spec.mode = PoolMode::Nested;
  spec.shuffle = false;
  spec.k = 5;
  const auto c = gen_cohort(CohortSpec::defaults(), 10, 2, 6);
  for (std::size_t i = 0; i < c.truths.size(); ++i) {
    const auto g = gen_pool(c.truths[i], spec, kCfg, i);
    EXPECT_EQ(g.clean_index, 0u);
    double prev = 2.0;
    for (std::size_t j = 0; j < spec.k; ++j) {
      EXPECT_EQ(g.manifests[j].applied.size(), j);
      const double s = score_raw(g.pool.candidates[j], c.truths[i], kCfg).total;
      if (j == 1) {
        EXPECT_LT(s, prev);
      } else {
        EXPECT_LE(s, prev) << c.truths[i].sample_id << " candidate " << j;
      }
      prev = s;
    }
  }
}

TEST(PoolSpec, JsonAndErrors) {
  const auto s = PoolSpec::from_json({{"k", 6}, {"mode", "nested"}, {"nested_order", {"omit_mention"}}});
  EXPECT_EQ(s.k, 6u);
  EXPECT_EQ(s.mode, PoolMode::Nested);
  ASSERT_EQ(s.nested_order.size(), 1u);
  EXPECT_EQ(PoolSpec::from_json(s.to_json()).to_json(), s.to_json());
  EXPECT_THROW(PoolSpec::from_json({{"k", 1}}), ValidationError);
  EXPECT_THROW(PoolSpec::from_json({{"mode", "chained"}}), ValidationError);
  EXPECT_THROW(PoolSpec::from_json({{"nested_order", {"nope"}}}), ValidationError);
  auto bad = PoolSpec::defaults();
  bad.k = 1;
  EXPECT_THROW(gen_pool(baseline_truth(), bad, kCfg, 1), ValidationError);
}
