#include "neuroverify/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include "neuroverify/text.hpp"

namespace neuroverify {

// ---------------------------------------------------------------------------
// Ground truth

const RegionTruth* GroundTruth::find(std::string_view region) const {
  for (const auto& r : regions) {
    if (r.region == region) return &r;
  }
  return nullptr;
}

std::optional<PriorContext> GroundTruth::prior_context() const {
  if (visit_kind != VisitKind::FollowUp) return std::nullopt;
  PriorContext ctx;
  for (const auto& r : regions) {
    if (!r.prior_label) {
      throw MissingPriorError("truth '" + sample_id + "': no prior label for '" + r.region + "'");
    }
    ctx.labels[r.region] = *r.prior_label;
  }
  return ctx;
}

namespace {

template <typename T, typename Parse>
T parse_enum(const nlohmann::json& j, const char* key, Parse parse) {
  const auto s = j.at(key).get<std::string>();
  auto v = parse(s);
  if (!v) throw ValidationError(std::string("bad value '") + s + "' for '" + key + "'");
  return *v;
}

}  // namespace

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
  GroundTruth t;
  t.sample_id = j.value("sample_id", std::string{});
  t.visit_kind = parse_enum<VisitKind>(j, "visit_kind", parse_visit_kind);
  t.diagnosis = parse_enum<Diagnosis>(j, "diagnosis", parse_diagnosis);
  for (const auto& item : j.at("regions")) {
    RegionTruth r;
    r.region = item.at("region").get<std::string>();
    r.label = parse_enum<Severity>(item, "label", parse_severity);
    r.z = item.value("z", 0.0);
    if (item.contains("zone")) r.zone = parse_enum<ToleranceZone>(item, "zone", parse_tolerance_zone);
    if (item.contains("prior_label")) r.prior_label = parse_enum<Severity>(item, "prior_label", parse_severity);
    if (item.contains("prior_z")) r.prior_z = item.at("prior_z").get<double>();
    if (item.contains("change_direction")) {
      r.change_direction = parse_enum<ChangeDirection>(item, "change_direction", parse_change_direction);
    }
    if (item.contains("threshold_crossed")) r.threshold_crossed = item.at("threshold_crossed").get<bool>();
    t.regions.push_back(std::move(r));
  }
  if (t.visit_kind == VisitKind::FollowUp) {
    for (const auto& r : t.regions) {
      if (!r.prior_label || !r.change_direction || !r.threshold_crossed) {
        throw ValidationError("truth '" + t.sample_id + "': follow-up region '" + r.region +
                              "' needs prior_label, change_direction and threshold_crossed");
      }
    }
  }
  return t;
}

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json regions_json = nlohmann::json::array();
  for (const auto& r : regions) {
    nlohmann::json item{{"region", r.region},
                        {"label", to_string(r.label)},
                        {"z", r.z},
                        {"zone", to_string(r.zone)}};
    if (r.prior_label) item["prior_label"] = to_string(*r.prior_label);
    if (r.prior_z) item["prior_z"] = *r.prior_z;
    if (r.change_direction) item["change_direction"] = to_string(*r.change_direction);
    if (r.threshold_crossed) item["threshold_crossed"] = *r.threshold_crossed;
    regions_json.push_back(std::move(item));
  }
  return {{"sample_id", sample_id},
          {"visit_kind", to_string(visit_kind)},
          {"diagnosis", to_string(diagnosis)},
          {"regions", regions_json}};
}

// ---------------------------------------------------------------------------
// Configuration

void ComponentWeights::validate(std::string_view what) const {
  for (double w : {anat, dx, longitudinal, reason, summary}) {
    if (!(w >= 0.0)) throw ValidationError(std::string(what) + ": weights must be >= 0");
  }
  if (std::abs(sum() - 1.0) > 1e-9) {
    throw ValidationError(std::string(what) + ": weights must sum to 1");
  }
}

ComponentWeights ComponentWeights::from_json(const nlohmann::json& j) {
  if (j.is_array()) {
    if (j.size() != 5) throw ValidationError("component weights: expected 5 values");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(),
            j[4].get<double>()};
  }
  ComponentWeights w;
  w.anat = j.at("anat").get<double>();
  w.dx = j.at("dx").get<double>();
  w.longitudinal = j.at("long").get<double>();
  w.reason = j.at("reason").get<double>();
  w.summary = j.at("summary").get<double>();
  return w;
}

nlohmann::json ComponentWeights::to_json() const {
  return {{"anat", anat}, {"dx", dx}, {"long", longitudinal}, {"reason", reason}, {"summary", summary}};
}

void VerifierConfig::validate() const {
  follow_up.validate("lambda_follow_up");
  baseline.validate("lambda_baseline");
  for (double d : {discount_correct, discount_adjacent, discount_non_adjacent}) {
    if (!(d > 0.0 && d <= 1.0)) throw ValidationError("dx discounts must lie in (0, 1]");
  }
  for (double c : {dx_credit_adjacent, dx_credit_non_adjacent, tolerance_credit_base,
                   adjacent_outside_zone_credit, two_level_credit, long_direction_weight,
                   long_flag_weight}) {
    if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("verifier credits must lie in [0, 1]");
  }
  if (std::abs(long_direction_weight + long_flag_weight - 1.0) > 1e-9) {
    throw ValidationError("longitudinal direction and flag weights must sum to 1");
  }
  if (!(reversal_penalty <= 0.0)) throw ValidationError("reversal penalty must be <= 0");
}

VerifierConfig VerifierConfig::from_json(const nlohmann::json& j) { return from_json(j, VerifierConfig{}); }

VerifierConfig VerifierConfig::from_json(const nlohmann::json& j, const VerifierConfig& base) {
  VerifierConfig c = base;
  if (j.contains("registry")) c.registry = Registry::from_json(j.at("registry"));
  if (j.contains("lambda_follow_up")) c.follow_up = ComponentWeights::from_json(j.at("lambda_follow_up"));
  if (j.contains("lambda_baseline")) c.baseline = ComponentWeights::from_json(j.at("lambda_baseline"));
  if (j.contains("region_weights")) {
    std::vector<RegionSpec> regions = c.registry.regions();
    for (auto& r : regions) r.weight = j.at("region_weights").value(r.id, r.weight);
    c.registry = Registry(std::move(regions));
  }
  if (j.contains("dx_discount_divisors")) {
    const auto& d = j.at("dx_discount_divisors");
    c.discount_correct = 1.0 / d.value("correct", 1.0 / c.discount_correct);
    c.discount_adjacent = 1.0 / d.value("adjacent", 1.0 / c.discount_adjacent);
    c.discount_non_adjacent = 1.0 / d.value("non_adjacent", 1.0 / c.discount_non_adjacent);
  }
  if (j.contains("dx_credit")) {
    const auto& d = j.at("dx_credit");
    c.dx_credit_adjacent = d.value("adjacent", c.dx_credit_adjacent);
    c.dx_credit_non_adjacent = d.value("non_adjacent", c.dx_credit_non_adjacent);
  }
  if (j.contains("anatomy")) {
    const auto& a = j.at("anatomy");
    c.tolerance_credit_base = a.value("tolerance_credit_base", c.tolerance_credit_base);
    c.adjacent_outside_zone_credit = a.value("adjacent_outside_zone", c.adjacent_outside_zone_credit);
    c.two_level_credit = a.value("two_level", c.two_level_credit);
    if (a.contains("confidence_scaling")) {
      const auto s = a.at("confidence_scaling").get<std::string>();
      if (s == "reward_hedging") {
        c.confidence_scaling = ConfidenceScaling::RewardHedging;
      } else if (s == "reward_confidence") {
        c.confidence_scaling = ConfidenceScaling::RewardConfidence;
      } else {
        throw ValidationError("anatomy.confidence_scaling: unknown value '" + s + "'");
      }
    }
  }
  if (j.contains("longitudinal")) {
    const auto& l = j.at("longitudinal");
    c.long_direction_weight = l.value("direction_weight", c.long_direction_weight);
    c.long_flag_weight = l.value("flag_weight", c.long_flag_weight);
    c.reversal_penalty = l.value("reversal_penalty", c.reversal_penalty);
  }
  if (j.contains("synonyms")) c.lexicon.synonyms = SynonymTable::from_json(j.at("synonyms"));
  if (j.contains("progression_terms")) {
    c.lexicon.progression_terms = j.at("progression_terms").get<std::vector<std::string>>();
  }
  if (j.contains("summary_keywords")) {
    const auto& s = j.at("summary_keywords");
    if (s.contains("diagnosis")) {
      for (const auto& [name, list] : s.at("diagnosis").items()) {
        auto d = parse_diagnosis(name);
        if (!d) throw ValidationError("summary_keywords.diagnosis: unknown class '" + name + "'");
        c.keywords.diagnosis[*d] = list.get<std::vector<std::string>>();
      }
    }
    if (s.contains("severity")) {
      for (const auto& [name, list] : s.at("severity").items()) {
        auto v = parse_severity(name);
        if (!v) throw ValidationError("summary_keywords.severity: unknown level '" + name + "'");
        c.keywords.severity[*v] = list.get<std::vector<std::string>>();
      }
    }
    c.keywords.confidence_tolerance = s.value("confidence_tolerance", c.keywords.confidence_tolerance);
  }
  c.validate();
  return c;
}

nlohmann::json VerifierConfig::to_json() const {
  nlohmann::json dx_kw = nlohmann::json::object();
  for (const auto& [d, list] : keywords.diagnosis) dx_kw[std::string(to_string(d))] = list;
  nlohmann::json sev_kw = nlohmann::json::object();
  for (const auto& [s, list] : keywords.severity) sev_kw[std::string(to_string(s))] = list;
  return {
      {"registry", registry.to_json()},
      {"lambda_follow_up", follow_up.to_json()},
      {"lambda_baseline", baseline.to_json()},
      {"dx_discount_divisors",
       {{"correct", 1.0 / discount_correct},
        {"adjacent", 1.0 / discount_adjacent},
        {"non_adjacent", 1.0 / discount_non_adjacent}}},
      {"dx_credit", {{"adjacent", dx_credit_adjacent}, {"non_adjacent", dx_credit_non_adjacent}}},
      {"anatomy",
       {{"tolerance_credit_base", tolerance_credit_base},
        {"confidence_scaling", confidence_scaling == ConfidenceScaling::RewardHedging
                                   ? "reward_hedging"
                                   : "reward_confidence"},
        {"adjacent_outside_zone", adjacent_outside_zone_credit},
        {"two_level", two_level_credit}}},
      {"longitudinal",
       {{"direction_weight", long_direction_weight},
        {"flag_weight", long_flag_weight},
        {"reversal_penalty", reversal_penalty}}},
      {"synonyms", lexicon.synonyms.to_json()},
      {"progression_terms", lexicon.progression_terms},
      {"summary_keywords",
       {{"diagnosis", dx_kw},
        {"severity", sev_kw},
        {"confidence_tolerance", keywords.confidence_tolerance}}},
  };
}

// ---------------------------------------------------------------------------
// Components

namespace {

void require_same_regions(const StructuredReport& report, const GroundTruth& truth,
                          const Registry& registry) {
  if (report.regions.size() != truth.regions.size() || truth.regions.size() != registry.size()) {
    throw ValidationError("region sets of report, truth and registry differ");
  }
  for (const auto& spec : registry.regions()) {
    if (!report.find(spec.id) || !truth.find(spec.id)) {
      throw ValidationError("region '" + spec.id + "' missing from report or truth");
    }
  }
}

double tolerance_credit(double confidence, const VerifierConfig& cfg) {
  const double base = cfg.tolerance_credit_base;
  const double c = std::clamp(confidence, 0.0, 1.0);
  return cfg.confidence_scaling == ConfidenceScaling::RewardHedging ? base + (1.0 - base) * (1.0 - c)
                                                                    : base + (1.0 - base) * c;
}

}  // namespace

AnatScore score_anat(const StructuredReport& report, const GroundTruth& truth,
                     const VerifierConfig& cfg) {
  require_same_regions(report, truth, cfg.registry);
  AnatScore out;
  double weighted = 0.0;
  double total_weight = 0.0;
  for (const auto& spec : cfg.registry.regions()) {
    const auto& pred = *report.find(spec.id);
    const auto& tr = *truth.find(spec.id);
    double s = 0.0;
    const int gap = ordinal_distance(pred.label, tr.label);
    if (gap == 0) {
      s = 1.0;
    } else if (gap == 1) {
      s = tr.zone != ToleranceZone::None && tr.zone == boundary_between(pred.label, tr.label)
              ? tolerance_credit(pred.confidence, cfg)
              : cfg.adjacent_outside_zone_credit;
    } else {
      s = cfg.two_level_credit;
    }
    out.regions.push_back({spec.id, pred.label, tr.label, s, spec.weight});
    weighted += spec.weight * s;
    total_weight += spec.weight;
  }
  out.value = weighted / total_weight;
  return out;
}

DxScore score_dx(Diagnosis predicted, Diagnosis truth, const VerifierConfig& cfg) {
  switch (ordinal_distance(predicted, truth)) {
    case 0: return {1.0, cfg.discount_correct};
    case 1: return {cfg.dx_credit_adjacent, cfg.discount_adjacent};
    default: return {cfg.dx_credit_non_adjacent, cfg.discount_non_adjacent};
  }
}

double score_long(const StructuredReport& report, const GroundTruth& truth,
                  const VerifierConfig& cfg) {
  if (truth.visit_kind != VisitKind::FollowUp) {
    throw ValidationError("longitudinal score is undefined on a baseline visit");
  }
  require_same_regions(report, truth, cfg.registry);
  double sum = 0.0;
  for (const auto& spec : cfg.registry.regions()) {
    const auto& pred = *report.find(spec.id);
    const auto& tr = *truth.find(spec.id);
    if (!tr.prior_label || !tr.change_direction || !tr.threshold_crossed) {
      throw ValidationError("follow-up truth for '" + spec.id + "' lacks longitudinal fields");
    }
    if (code(*tr.prior_label) - code(pred.label) >= 2) {
      sum += cfg.reversal_penalty;
      continue;
    }
    double base = 0.0;
    if (pred.change_direction && *pred.change_direction == *tr.change_direction) {
      base += cfg.long_direction_weight;
    }
    if (pred.threshold_crossed && *pred.threshold_crossed == *tr.threshold_crossed) {
      base += cfg.long_flag_weight;
    }
    sum += base;
  }
  return std::clamp(sum / static_cast<double>(cfg.registry.size()), 0.0, 1.0);
}

double score_reason(const StructuredReport& report, VisitKind visit,
                    const std::optional<PriorContext>& prior, const VerifierConfig& cfg) {
  const std::string reasoning = report.reasoning_text();
  int applicable = 0;
  int passed = 0;
  for (const auto& r : report.regions) {
    if (is_abnormal(r.label)) {
      ++applicable;
      if (cfg.lexicon.synonyms.mentioned(reasoning, r.region)) ++passed;
    }
    if (r.threshold_crossed.value_or(false)) {
      ++applicable;
      if (progression_cited(reasoning, r.region, cfg.lexicon)) ++passed;
    }
  }
  if (visit == VisitKind::FollowUp) {
    const auto c3 = check_c3(report, prior, cfg.registry);
    for (const auto& r : report.regions) {
      ++applicable;
      const bool violated = std::any_of(c3.begin(), c3.end(), [&](const ConstraintFinding& f) {
        return f.region == r.region && f.is_violation();
      });
      if (!violated) ++passed;
    }
  }
  return applicable == 0 ? 1.0 : static_cast<double>(passed) / applicable;
}

namespace {

// Confidence figures quoted in the summary: "confidence 0.87", "confidence: 87%".
std::vector<double> quoted_confidences(const std::string& summary) {
  static const std::regex re(R"(confidence[^0-9\n]{0,24}?([0-9]+(?:\.[0-9]+)?)\s*(%)?)",
                             std::regex::icase);
  std::vector<double> out;
  for (auto it = std::sregex_iterator(summary.begin(), summary.end(), re);
       it != std::sregex_iterator(); ++it) {
    double v = std::stod((*it)[1].str());
    if ((*it)[2].matched || v > 1.0) v /= 100.0;
    out.push_back(v);
  }
  return out;
}

bool contradicts(std::string_view sentence, Severity label, const SummaryKeywords& kw) {
  const auto own = kw.severity.find(label);
  if (own != kw.severity.end() && text::contains_any_word(sentence, own->second)) return false;
  for (const auto& [level, words] : kw.severity) {
    if (level != label && text::contains_any_word(sentence, words)) return true;
  }
  return false;
}

}  // namespace

double score_summary(const StructuredReport& report, const VerifierConfig& cfg) {
  const std::string& summary = report.summary;
  int applicable = 0;
  int passed = 0;

  // (a) diagnosis keyword of the report's own diagnosis.
  ++applicable;
  if (auto it = cfg.keywords.diagnosis.find(report.diagnosis);
      it != cfg.keywords.diagnosis.end() && text::contains_any_word(summary, it->second)) {
    ++passed;
  }

  // (b) every severe region is named.
  bool any_severe = false;
  bool all_named = true;
  for (const auto& r : report.regions) {
    if (r.label == Severity::Severe) {
      any_severe = true;
      all_named = all_named && cfg.lexicon.synonyms.mentioned(summary, r.region);
    }
  }
  if (any_severe) {
    ++applicable;
    if (all_named) ++passed;
  }

  // (c) no region appears next to a severity word that contradicts its label.
  ++applicable;
  bool contradiction = false;
  for (auto sentence : text::sentences(summary)) {
    for (const auto& r : report.regions) {
      if (cfg.lexicon.synonyms.mentioned(sentence, r.region) &&
          contradicts(sentence, r.label, cfg.keywords)) {
        contradiction = true;
      }
    }
  }
  if (!contradiction) ++passed;

  // (d) any quoted diagnostic confidence matches the JSON value.
  const auto quoted = quoted_confidences(summary);
  if (!quoted.empty()) {
    ++applicable;
    const bool all_match = std::all_of(quoted.begin(), quoted.end(), [&](double q) {
      return std::abs(q - report.diagnosis_confidence) <= cfg.keywords.confidence_tolerance + 1e-9;
    });
    if (all_match) ++passed;
  }

  return static_cast<double>(passed) / applicable;
}

VerifierScore score(const StructuredReport& report, const GroundTruth& truth,
                    const VerifierConfig& cfg) {
  require_same_regions(report, truth, cfg.registry);
  const VisitKind visit = truth.visit_kind;
  const auto prior = truth.prior_context();
  const auto& w = cfg.weights_for(visit);

  VerifierScore out;
  out.status = ParseStatus::Valid;
  out.visit_kind = visit;

  auto anat = score_anat(report, truth, cfg);
  out.s_anat = anat.value;
  out.regions = std::move(anat.regions);
  const auto dx = score_dx(report.diagnosis, truth.diagnosis, cfg);
  out.s_dx = dx.value;
  out.multiplier = dx.multiplier;
  if (visit == VisitKind::FollowUp) out.s_long = score_long(report, truth, cfg);
  out.s_reason = score_reason(report, visit, prior, cfg);
  out.s_summary = score_summary(report, cfg);
  out.findings = check_all(report, visit, prior, cfg.registry, cfg.lexicon);

  const double weighted = w.anat * out.s_anat + w.dx * out.s_dx +
                          w.longitudinal * out.s_long.value_or(0.0) + w.reason * out.s_reason +
                          w.summary * out.s_summary;
  out.total = out.multiplier * weighted;
  return out;
}

VerifierScore score_raw(std::string_view raw, const GroundTruth& truth, const VerifierConfig& cfg) {
  auto parsed = parse_raw_output(raw, truth.visit_kind, cfg.registry);
  if (!parsed.valid()) {
    VerifierScore out;
    out.status = parsed.status;
    out.visit_kind = truth.visit_kind;
    out.multiplier = 1.0;
    out.total = 0.0;
    out.diagnostics = std::move(parsed.diagnostics);
    return out;
  }
  return score(*parsed.report, truth, cfg);
}

nlohmann::json VerifierScore::to_json() const {
  nlohmann::json regions_json = nlohmann::json::array();
  for (const auto& r : regions) {
    regions_json.push_back({{"region", r.region},
                            {"predicted", to_string(r.predicted)},
                            {"truth", to_string(r.truth)},
                            {"s_r", r.score},
                            {"weight", r.weight}});
  }
  nlohmann::json findings_json = nlohmann::json::array();
  for (const auto& f : findings) findings_json.push_back(f.to_json());
  nlohmann::json j{{"status", to_string(status)},
                   {"visit_kind", to_string(visit_kind)},
                   {"components",
                    {{"anat", s_anat},
                     {"dx", s_dx},
                     {"long", s_long ? nlohmann::json(*s_long) : nlohmann::json(nullptr)},
                     {"reason", s_reason},
                     {"summary", s_summary}}},
                   {"multiplier", multiplier},
                   {"total", total},
                   {"regions", regions_json},
                   {"findings", findings_json}};
  if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
  return j;
}

}  // namespace neuroverify
