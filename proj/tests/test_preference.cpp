#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "neuroverify/preference.hpp"
#include "neuroverify/synth.hpp"
#include "test_util.hpp"

using namespace neuroverify;
using nvtest::baseline_truth;
using nvtest::follow_up_truth;

namespace {

const VerifierConfig kCfg;

// Naive tau-b from the sign products, independent of the library's counting.
std::optional<double> tau_b_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0, n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (i == j) continue;
      const double sa = (a[i] > a[j]) - (a[i] < a[j]);
      const double sb = (b[i] > b[j]) - (b[i] < b[j]);
      s += sa * sb;
      n1 += sa * sa;
      n2 += sb * sb;
    }
  }
  if (n1 == 0 || n2 == 0) return std::nullopt;
  return s / std::sqrt(n1 * n2);
}

DpoInputs dpo(double pc, double rc, double pr, double rr, double beta = 0.1) {
  return {pc, rc, pr, rr, beta};
}

CandidatePool clean_and_broken_pool(const GroundTruth& t) {
  CandidatePool p;
  p.sample_id = t.sample_id;
  p.visit_kind = t.visit_kind;
  p.truth = t;
  p.gt_text = gen_clean_report(t, kCfg, 1);
  p.candidates = {"not json", p.gt_text, "still not json", p.gt_text};
  return p;
}

}  // namespace

TEST(SelectPair, FirstMaxAndFirstMinOfRest) {
  const std::vector<double> s{0.7, 0.9, 0.2, 0.9, 0.2};
  const auto sel = select_pair(s, 0.6);
  EXPECT_EQ(sel.chosen_index, 1u);
  EXPECT_EQ(sel.rejected_index, 2u);
  EXPECT_FALSE(sel.gt_substituted);
}

TEST(SelectPair, AllTiedStillPicksDistinctCandidates) {
  const std::vector<double> s{0.8, 0.8, 0.8, 0.8};
  const auto sel = select_pair(s, 0.6);
  EXPECT_EQ(sel.chosen_index, 0u);
  EXPECT_EQ(sel.rejected_index, 1u);
}

TEST(SelectPair, EnumeratedPoolsOfFour) {
  // Every pool over the values {0, 0.5, 1}^4 against a direct re-derivation.
  const double vals[3] = {0.0, 0.5, 1.0};
  for (int code = 0; code < 81; ++code) {
    std::vector<double> s;
    for (int c = code, i = 0; i < 4; ++i, c /= 3) s.push_back(vals[c % 3]);
    const double mx = *std::max_element(s.begin(), s.end());
    const auto best = static_cast<std::size_t>(std::find(s.begin(), s.end(), mx) - s.begin());
    double mn = 2.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      if (i != best && s[i] < mn) {
        mn = s[i];
        worst = i;
      }
    }
    const auto sel = select_pair(s, 0.6);
    EXPECT_EQ(sel.best_index, best);
    EXPECT_EQ(sel.rejected_index, worst);
    EXPECT_NE(sel.best_index, sel.rejected_index);
    EXPECT_EQ(sel.gt_substituted, mx < 0.6);
    EXPECT_EQ(sel.chosen_index.has_value(), mx >= 0.6);
  }
}

TEST(SelectPair, ThresholdBoundary) {
  const double eps = 1e-12;
  EXPECT_FALSE(select_pair(std::vector<double>{0.6, 0.1}, 0.6).gt_substituted);
  EXPECT_TRUE(select_pair(std::vector<double>{0.6 - eps, 0.1}, 0.6).gt_substituted);
  EXPECT_FALSE(select_pair(std::vector<double>{0.6 + eps, 0.1}, 0.6).gt_substituted);
}

TEST(SelectPair, NeedsTwoCandidates) {
  EXPECT_THROW(select_pair(std::vector<double>{0.9}, 0.6), ValidationError);
  EXPECT_THROW(select_pair(std::vector<double>{}, 0.6), ValidationError);
}

TEST(BuildPair, ChoosesCleanRejectsInvalid) {
  const auto pool = clean_and_broken_pool(baseline_truth());
  const auto pair = build_pair(pool, kCfg);
  EXPECT_EQ(pair.selection.chosen_index, 1u);
  EXPECT_EQ(pair.selection.rejected_index, 0u);
  EXPECT_EQ(pair.chosen, pool.gt_text);
  EXPECT_EQ(pair.rejected, "not json");
  EXPECT_EQ(pair.chosen_score.total, 1.0);
  EXPECT_EQ(pair.rejected_score.total, 0.0);
  const auto j = pair.to_json();
  EXPECT_EQ(j.at("gt_substituted"), false);
  EXPECT_EQ(j.at("chosen_score"), 1.0);
}

TEST(BuildPair, SubstitutesGroundTruthBelowThreshold) {
  auto pool = clean_and_broken_pool(follow_up_truth());
  pool.candidates = {"a", "b", "{}"};
  const auto pair = build_pair(pool, kCfg);
  EXPECT_TRUE(pair.gt_substituted);
  EXPECT_FALSE(pair.selection.chosen_index);
  EXPECT_EQ(pair.chosen, pool.gt_text);
  EXPECT_EQ(pair.chosen_score.total, 1.0);
  EXPECT_EQ(pair.rejected, "b");  // "a" is the (substituted) best
  pool.gt_text.clear();
  EXPECT_THROW(build_pair(pool, kCfg), ValidationError);
}

TEST(CandidatePool, JsonRoundTripAndErrors) {
  const auto pool = clean_and_broken_pool(follow_up_truth());
  const auto back = CandidatePool::from_json(pool.to_json());
  EXPECT_EQ(back.candidates, pool.candidates);
  EXPECT_EQ(back.truth, pool.truth);
  auto j = pool.to_json();
  j["visit_kind"] = "baseline";
  EXPECT_THROW(CandidatePool::from_json(j), ValidationError);
  j.erase("candidates");
  EXPECT_THROW(CandidatePool::from_json(j), nlohmann::json::exception);
}

TEST(Dpo, EqualMarginsGiveLnTwo) {
  EXPECT_DOUBLE_EQ(dpo_loss(dpo(-10, -10, -20, -20)), 0.6931471805599453);
  const auto g = dpo_grad(dpo(-10, -10, -20, -20));
  EXPECT_DOUBLE_EQ(g.d_logp_policy_chosen, -0.05);
  EXPECT_DOUBLE_EQ(g.d_logp_policy_rejected, 0.05);
}

TEST(Dpo, KnownValueAtUnitLogit) {
  // logit = 0.1 * ((0 - (-5)) - (0 - 5)) = 1
  const auto in = dpo(0, -5, 0, 5);
  EXPECT_DOUBLE_EQ(dpo_logit(in), 1.0);
  EXPECT_NEAR(dpo_loss(in), 0.31326168751822286, 1e-15);
}

TEST(Dpo, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-50, 0);
  for (int i = 0; i < 200; ++i) {
    auto in = dpo(u(gen), u(gen), u(gen), u(gen), 0.05 + 0.5 * (i % 4));
    const auto g = dpo_grad(in);
    const double h = 1e-6;
    auto plus = in, minus = in;
    plus.logp_policy_chosen += h;
    minus.logp_policy_chosen -= h;
    EXPECT_NEAR(g.d_logp_policy_chosen, (dpo_loss(plus) - dpo_loss(minus)) / (2 * h), 1e-6);
    plus = in;
    minus = in;
    plus.logp_policy_rejected += h;
    minus.logp_policy_rejected -= h;
    EXPECT_NEAR(g.d_logp_policy_rejected, (dpo_loss(plus) - dpo_loss(minus)) / (2 * h), 1e-6);
  }
}

TEST(Dpo, ExtremeLogitsStayFinite) {
  const auto big = dpo(0, -10000, 0, 0);   // logit = 1000
  const auto small = dpo(0, 10000, 0, 0);  // logit = -1000
  EXPECT_EQ(dpo_loss(big), 0.0);
  EXPECT_DOUBLE_EQ(dpo_loss(small), 1000.0);
  EXPECT_TRUE(std::isfinite(dpo_grad(big).d_logp_policy_chosen));
  EXPECT_DOUBLE_EQ(dpo_grad(small).d_logp_policy_chosen, -0.1);
  EXPECT_EQ(dpo_grad(big).d_logp_policy_rejected, 0.0);
}

TEST(Dpo, BatchMeanAndErrors) {
  const std::vector<DpoInputs> batch{dpo(-1, -1, -1, -1), dpo(0, -5, 0, 5)};
  EXPECT_NEAR(dpo_batch_loss(batch), (0.6931471805599453 + 0.31326168751822286) / 2, 1e-15);
  EXPECT_THROW(dpo_batch_loss(std::vector<DpoInputs>{}), ValidationError);
  EXPECT_THROW(dpo_loss(dpo(NAN, 0, 0, 0)), ValidationError);
  EXPECT_THROW(dpo_loss(dpo(0, 0, 0, INFINITY)), ValidationError);
  EXPECT_THROW(dpo_loss(dpo(0, 0, 0, 0, 0.0)), ValidationError);
  EXPECT_THROW(dpo_loss(dpo(0, 0, 0, 0, -1.0)), ValidationError);
}

TEST(Dpo, InputsFromJsonBetaPrecedence) {
  const nlohmann::json j{{"logp_policy_chosen", -1.0}, {"logp_ref_chosen", -2.0},
                         {"logp_policy_rejected", -3.0}, {"logp_ref_rejected", -4.0}, {"beta", 0.5}};
  EXPECT_EQ(DpoInputs::from_json(j).beta, 0.5);
  EXPECT_EQ(DpoInputs::from_json(j, 0.2).beta, 0.2);
  auto no_beta = j;
  no_beta.erase("beta");
  EXPECT_EQ(DpoInputs::from_json(no_beta).beta, 0.1);
  no_beta.erase("logp_ref_rejected");
  EXPECT_THROW(DpoInputs::from_json(no_beta), nlohmann::json::exception);
}

TEST(Kendall, FrozenReferenceValues) {
  // Frozen from scipy.stats.kendalltau (tau-b).
  EXPECT_NEAR(*kendall_tau_b(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{3, 4, 1, 2, 5}), 0.2, 1e-15);
  EXPECT_NEAR(*kendall_tau_b(std::vector<double>{1, 1, 2, 3}, std::vector<double>{1, 2, 2, 3}), 0.8, 1e-15);
  EXPECT_NEAR(*kendall_tau_b(std::vector<double>{0.9, 0.5, 0.5, 0.1}, std::vector<double>{0.8, 0.6, 0.4, 0.4}),
              0.8, 1e-15);
}

TEST(Kendall, MatchesOracleOnRandomRankings) {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> u(0, 3);
  for (int rep = 0; rep < 300; ++rep) {
    std::vector<double> a, b;
    for (int i = 0; i < 6; ++i) {
      a.push_back(u(gen));
      b.push_back(u(gen));
    }
    const auto got = kendall_tau_b(a, b);
    const auto want = tau_b_oracle(a, b);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) EXPECT_NEAR(*got, *want, 1e-12);
  }
}

TEST(Kendall, UndefinedWhenAllTied) {
  EXPECT_FALSE(kendall_tau_b(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}));
  EXPECT_FALSE(kendall_tau_b(std::vector<double>{1}, std::vector<double>{1}));
  EXPECT_EQ(*kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 1.0);
  EXPECT_EQ(*kendall_tau_b(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0);
  EXPECT_THROW(kendall_tau_b(std::vector<double>{1, 2}, std::vector<double>{1}), ValidationError);
}

TEST(Alternatives, DefaultsAreValid) {
  const auto alts = default_alternatives(kCfg);
  ASSERT_EQ(alts.size(), 4u);
  EXPECT_EQ(alts[0].name, "equal_components");
  for (const auto& a : alts) {
    EXPECT_NO_THROW(a.config.validate()) << a.name;
    EXPECT_EQ(a.config.baseline.longitudinal, 0.0);
  }
  EXPECT_EQ(alts[3].config.registry.at("hippocampus").weight, 1.0);
  EXPECT_NEAR(alts[1].config.baseline.anat, 0.475, 1e-15);
}

TEST(Alternatives, FromJson) {
  const nlohmann::json j{{"alternatives",
                          {{{"name", "flat"}, {"lambda_follow_up", {0.2, 0.2, 0.2, 0.2, 0.2}}},
                           {{"name", "eq"}, {"equal_regions", true}}}}};
  const auto alts = alternatives_from_json(j, kCfg);
  ASSERT_EQ(alts.size(), 2u);
  EXPECT_EQ(alts[0].config.follow_up.anat, 0.2);
  EXPECT_EQ(alts[1].config.registry.at("hippocampus").weight, 1.0);
  EXPECT_THROW(alternatives_from_json({{"alternatives", {{{"lambda_baseline", {1, 0, 0, 0, 0}}}}}}, kCfg),
               nlohmann::json::exception);
}

TEST(Sensitivity, IdenticalConfigIsPerfectlyStable) {
  std::vector<CandidatePool> pools;
  const auto cohort = gen_cohort(CohortSpec::defaults(), 6, 2, 9);
  for (std::size_t i = 0; i < cohort.truths.size(); ++i) {
    pools.push_back(gen_pool(cohort.truths[i], PoolSpec::defaults(), kCfg, i).pool);
  }
  const std::vector<NamedConfig> same{{"same", kCfg}};
  const auto rep = sensitivity_analysis(pools, kCfg, same);
  ASSERT_EQ(rep.alternatives.size(), 1u);
  EXPECT_EQ(rep.pools, pools.size());
  EXPECT_EQ(rep.alternatives[0].pair_identity, 1.0);
  ASSERT_TRUE(rep.alternatives[0].tau_mean);
  EXPECT_EQ(*rep.alternatives[0].tau_mean, 1.0);
  const auto j = rep.to_json();
  EXPECT_EQ(j.at("alternatives")[0].at("tau_per_pool").size(), pools.size());
}

TEST(Sensitivity, TiedPoolsCountedUndefined) {
  auto pool = clean_and_broken_pool(baseline_truth());
  pool.candidates = {"x", "y"};
  const std::vector<CandidatePool> pools{pool};
  const auto rep = sensitivity_analysis(pools, kCfg, default_alternatives(kCfg));
  for (const auto& a : rep.alternatives) {
    EXPECT_EQ(a.tau_undefined, 1u);
    EXPECT_FALSE(a.tau_mean);
    EXPECT_EQ(a.pair_identity, 1.0);
  }
  pool.candidates = {"x"};
  const std::vector<CandidatePool> tiny{pool};
  EXPECT_THROW(sensitivity_analysis(tiny, kCfg, default_alternatives(kCfg)), ValidationError);
}
