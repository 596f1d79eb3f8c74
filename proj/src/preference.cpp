#include "neuroverify/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace neuroverify {

CandidatePool CandidatePool::from_json(const nlohmann::json& j) {
  CandidatePool p;
  p.sample_id = j.at("sample_id").get<std::string>();
  auto visit = parse_visit_kind(j.at("visit_kind").get<std::string>());
  if (!visit) throw ValidationError("pool '" + p.sample_id + "': bad visit_kind");
  p.visit_kind = *visit;
  p.candidates = j.at("candidates").get<std::vector<std::string>>();
  p.truth = GroundTruth::from_json(j.at("ground_truth"));
  p.gt_text = j.value("gt_text", std::string{});
  if (p.truth.visit_kind != p.visit_kind) {
    throw ValidationError("pool '" + p.sample_id + "': visit_kind disagrees with ground truth");
  }
  return p;
}

nlohmann::json CandidatePool::to_json() const {
  return {{"sample_id", sample_id},
          {"visit_kind", to_string(visit_kind)},
          {"candidates", candidates},
          {"ground_truth", truth.to_json()},
          {"gt_text", gt_text}};
}

PairSelection select_pair(std::span<const double> scores, double threshold) {
  if (scores.size() < 2) throw ValidationError("a candidate pool needs at least two candidates");
  PairSelection sel;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[sel.best_index]) sel.best_index = i;
  }
  std::optional<std::size_t> worst;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == sel.best_index) continue;
    if (!worst || scores[i] < scores[*worst]) worst = i;
  }
  sel.rejected_index = *worst;
  sel.gt_substituted = scores[sel.best_index] < threshold;
  if (!sel.gt_substituted) sel.chosen_index = sel.best_index;
  return sel;
}

nlohmann::json PreferencePair::to_json() const {
  nlohmann::json j;
  j["sample_id"] = sample_id;
  j["chosen"] = chosen;
  j["rejected"] = rejected;
  j["chosen_score"] = chosen_score.total;
  j["rejected_score"] = rejected_score.total;
  j["gt_substituted"] = gt_substituted;
  return j;
}

std::vector<VerifierScore> score_pool(const CandidatePool& pool, const VerifierConfig& cfg) {
  std::vector<VerifierScore> out;
  out.reserve(pool.candidates.size());
  for (const auto& raw : pool.candidates) out.push_back(score_raw(raw, pool.truth, cfg));
  return out;
}

namespace {
std::vector<double> totals(const std::vector<VerifierScore>& scores) {
  std::vector<double> t;
  t.reserve(scores.size());
  for (const auto& s : scores) t.push_back(s.total);
  return t;
}
}  // namespace

PreferencePair build_pair(const CandidatePool& pool, const VerifierConfig& cfg, double threshold) {
  if (pool.candidates.empty()) throw ValidationError("pool '" + pool.sample_id + "' is empty");
  auto scores = score_pool(pool, cfg);
  const auto sel = select_pair(totals(scores), threshold);

  PreferencePair pair;
  pair.sample_id = pool.sample_id;
  pair.selection = sel;
  pair.gt_substituted = sel.gt_substituted;
  pair.rejected = pool.candidates[sel.rejected_index];
  pair.rejected_score = scores[sel.rejected_index];
  if (sel.gt_substituted) {
    if (pool.gt_text.empty()) {
      throw ValidationError("pool '" + pool.sample_id +
                            "': best candidate below threshold and no gt_text to substitute");
    }
    pair.chosen = pool.gt_text;
    pair.chosen_score = score_raw(pool.gt_text, pool.truth, cfg);
  } else {
    pair.chosen = pool.candidates[*sel.chosen_index];
    pair.chosen_score = scores[*sel.chosen_index];
  }
  return pair;
}

// ---------------------------------------------------------------------------
// DPO

DpoInputs DpoInputs::from_json(const nlohmann::json& j, std::optional<double> beta_override) {
  DpoInputs in;
  in.logp_policy_chosen = j.at("logp_policy_chosen").get<double>();
  in.logp_ref_chosen = j.at("logp_ref_chosen").get<double>();
  in.logp_policy_rejected = j.at("logp_policy_rejected").get<double>();
  in.logp_ref_rejected = j.at("logp_ref_rejected").get<double>();
  in.beta = beta_override ? *beta_override : j.value("beta", in.beta);
  return in;
}

namespace {

// log(1 + exp(x)) without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// 1 - sigmoid(a) = sigmoid(-a), computed on the side that does not overflow.
double sigmoid_complement(double a) {
  if (a >= 0.0) {
    const double e = std::exp(-a);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(a));
}

}  // namespace

double dpo_logit(const DpoInputs& in) {
  for (double v : {in.logp_policy_chosen, in.logp_ref_chosen, in.logp_policy_rejected,
                   in.logp_ref_rejected, in.beta}) {
    if (!std::isfinite(v)) throw ValidationError("DPO inputs must be finite");
  }
  if (!(in.beta > 0.0)) throw ValidationError("DPO beta must be > 0");
  const double chosen_margin = in.logp_policy_chosen - in.logp_ref_chosen;
  const double rejected_margin = in.logp_policy_rejected - in.logp_ref_rejected;
  return in.beta * (chosen_margin - rejected_margin);
}

double dpo_loss(const DpoInputs& in) { return softplus(-dpo_logit(in)); }

DpoGradient dpo_grad(const DpoInputs& in) {
  const double g = in.beta * sigmoid_complement(dpo_logit(in));
  return {-g, g};
}

double dpo_batch_loss(std::span<const DpoInputs> batch) {
  if (batch.empty()) throw ValidationError("DPO batch is empty");
  double sum = 0.0;
  for (const auto& in : batch) sum += dpo_loss(in);
  return sum / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Sensitivity

std::vector<NamedConfig> default_alternatives(const VerifierConfig& base) {
  // Baseline weights follow the default convention: the longitudinal share is
  // split evenly between anatomy and diagnosis.
  auto with_follow_up = [&](ComponentWeights w) {
    VerifierConfig c = base;
    c.follow_up = w;
    c.baseline = {w.anat + w.longitudinal / 2, w.dx + w.longitudinal / 2, 0.0, w.reason, w.summary};
    return c;
  };
  VerifierConfig equal_regions = base;
  equal_regions.registry = base.registry.with_equal_weights();
  return {
      {"equal_components", with_follow_up({0.2, 0.2, 0.2, 0.2, 0.2})},
      {"anatomy_heavy", with_follow_up({0.40, 0.20, 0.15, 0.125, 0.125})},
      {"diagnosis_heavy", with_follow_up({0.20, 0.40, 0.15, 0.125, 0.125})},
      {"equal_regions", equal_regions},
  };
}

std::vector<NamedConfig> alternatives_from_json(const nlohmann::json& j, const VerifierConfig& base) {
  std::vector<NamedConfig> out;
  for (const auto& item : j.at("alternatives")) {
    NamedConfig nc;
    nc.name = item.at("name").get<std::string>();
    if (item.value("equal_regions", false)) {
      VerifierConfig c = base;
      c.registry = base.registry.with_equal_weights();
      nc.config = VerifierConfig::from_json(item, c);
    } else {
      nc.config = VerifierConfig::from_json(item, base);
    }
    out.push_back(std::move(nc));
  }
  return out;
}

std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("kendall_tau_b: length mismatch");
  const std::size_t n = a.size();
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) {
        ++ties_a;
        ++ties_b;
      } else if (da == 0.0) {
        ++ties_a;
      } else if (db == 0.0) {
        ++ties_b;
      } else if ((da > 0.0) == (db > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const long long pairs = static_cast<long long>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(pairs - ties_a) * static_cast<double>(pairs - ties_b));
  if (denom == 0.0) return std::nullopt;
  return static_cast<double>(concordant - discordant) / denom;
}

nlohmann::json SensitivityReport::to_json() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json alts = nlohmann::json::array();
  for (const auto& a : alternatives) {
    nlohmann::json per_pool = nlohmann::json::array();
    for (const auto& t : a.tau) per_pool.push_back(opt(t));
    alts.push_back({{"name", a.name},
                    {"pair_identity", a.pair_identity},
                    {"tau_min", opt(a.tau_min)},
                    {"tau_mean", opt(a.tau_mean)},
                    {"tau_undefined", a.tau_undefined},
                    {"tau_per_pool", per_pool}});
  }
  return {{"pools", pools}, {"alternatives", alts}};
}

SensitivityReport sensitivity_analysis(std::span<const CandidatePool> pools,
                                       const VerifierConfig& default_config,
                                       std::span<const NamedConfig> alternatives, double threshold) {
  auto scores_under = [&](const VerifierConfig& cfg) {
    std::vector<std::vector<double>> out;
    out.reserve(pools.size());
    for (const auto& p : pools) {
      if (p.candidates.size() < 2) {
        throw ValidationError("sensitivity: pool '" + p.sample_id + "' has fewer than 2 candidates");
      }
      out.push_back(totals(score_pool(p, cfg)));
    }
    return out;
  };

  const auto base = scores_under(default_config);
  std::vector<PairSelection> base_pairs;
  for (const auto& s : base) base_pairs.push_back(select_pair(s, threshold));

  SensitivityReport report;
  report.pools = pools.size();
  for (const auto& alt : alternatives) {
    const auto scores = scores_under(alt.config);
    AlternativeResult res;
    res.name = alt.name;
    std::size_t same = 0;
    double tau_sum = 0.0;
    std::size_t tau_count = 0;
    for (std::size_t i = 0; i < pools.size(); ++i) {
      if (select_pair(scores[i], threshold) == base_pairs[i]) ++same;
      auto tau = kendall_tau_b(base[i], scores[i]);
      res.tau.push_back(tau);
      if (tau) {
        tau_sum += *tau;
        ++tau_count;
        res.tau_min = res.tau_min ? std::min(*res.tau_min, *tau) : *tau;
      } else {
        ++res.tau_undefined;
      }
    }
    res.pair_identity = pools.empty() ? 1.0 : static_cast<double>(same) / pools.size();
    if (tau_count > 0) res.tau_mean = tau_sum / static_cast<double>(tau_count);
    report.alternatives.push_back(std::move(res));
  }
  return report;
}

}  // namespace neuroverify
