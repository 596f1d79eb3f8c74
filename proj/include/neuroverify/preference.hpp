#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroverify/verifier.hpp"

namespace neuroverify {

// K >= 2 raw candidate outputs for one visit, with its ground truth and the
// serialized ground-truth report used when every candidate is poor.
struct CandidatePool {
  std::string sample_id;
  VisitKind visit_kind = VisitKind::Baseline;
  std::vector<std::string> candidates;
  GroundTruth truth;
  std::string gt_text;

  static CandidatePool from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Indices into a scored pool. chosen_index is empty when the ground truth was
// substituted for the winner.
struct PairSelection {
  std::optional<std::size_t> chosen_index;
  std::size_t best_index = 0;
  std::size_t rejected_index = 0;
  bool gt_substituted = false;

  bool operator==(const PairSelection&) const = default;
};

// chosen = first index attaining the maximum, rejected = first index other
// than the chosen one attaining the minimum of the rest. The ground truth
// replaces the chosen candidate when the maximum is below `threshold`.
// Throws ValidationError for fewer than two scores.
PairSelection select_pair(std::span<const double> scores, double threshold);

struct PreferencePair {
  std::string sample_id;
  std::string chosen;
  std::string rejected;
  VerifierScore chosen_score;
  VerifierScore rejected_score;
  PairSelection selection;
  bool gt_substituted = false;

  // {sample_id, chosen, rejected, chosen_score, rejected_score, gt_substituted}
  nlohmann::json to_json() const;
};

inline constexpr double kDefaultQualityThreshold = 0.6;

std::vector<VerifierScore> score_pool(const CandidatePool& pool, const VerifierConfig& cfg);

PreferencePair build_pair(const CandidatePool& pool, const VerifierConfig& cfg,
                          double threshold = kDefaultQualityThreshold);

// ---------------------------------------------------------------------------
// DPO objective for one pair, as a numerical utility. Log-probabilities are
// natural logs of the full response under the policy and reference models.

struct DpoInputs {
  double logp_policy_chosen = 0.0;
  double logp_ref_chosen = 0.0;
  double logp_policy_rejected = 0.0;
  double logp_ref_rejected = 0.0;
  double beta = 0.1;

  static DpoInputs from_json(const nlohmann::json& j, std::optional<double> beta_override = {});
};

struct DpoGradient {
  double d_logp_policy_chosen = 0.0;
  double d_logp_policy_rejected = 0.0;
};

// beta * ((pc - rc) - (pr - rr)). Throws ValidationError on non-finite input
// or beta <= 0.
double dpo_logit(const DpoInputs& in);

// -log sigmoid(logit), evaluated as softplus(-logit) so it stays finite for
// any finite logit.
double dpo_loss(const DpoInputs& in);

// d/d(pc) = -beta * (1 - sigmoid(a)), d/d(pr) = +beta * (1 - sigmoid(a)).
DpoGradient dpo_grad(const DpoInputs& in);

// Mean loss over a batch; the empirical expectation of the objective.
double dpo_batch_loss(std::span<const DpoInputs> batch);

// ---------------------------------------------------------------------------
// Weight-sensitivity analysis.

struct NamedConfig {
  std::string name;
  VerifierConfig config;
};

// equal_components, anatomy_heavy, diagnosis_heavy, equal_regions.
std::vector<NamedConfig> default_alternatives(const VerifierConfig& base);

// Alternatives document: {"alternatives": [{"name": ..., <VerifierConfig overrides>}, ...]}.
std::vector<NamedConfig> alternatives_from_json(const nlohmann::json& j, const VerifierConfig& base);

// Kendall's tau-b. Undefined (nullopt) when either ranking is entirely tied.
std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b);

struct AlternativeResult {
  std::string name;
  double pair_identity = 0.0;
  std::vector<std::optional<double>> tau;  // per pool
  std::optional<double> tau_min;
  std::optional<double> tau_mean;
  std::size_t tau_undefined = 0;
};

struct SensitivityReport {
  std::size_t pools = 0;
  std::vector<AlternativeResult> alternatives;

  nlohmann::json to_json() const;
};

SensitivityReport sensitivity_analysis(std::span<const CandidatePool> pools,
                                       const VerifierConfig& default_config,
                                       std::span<const NamedConfig> alternatives,
                                       double threshold = kDefaultQualityThreshold);

}  // namespace neuroverify
