#include "neuroverify/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "neuroverify/text.hpp"

namespace neuroverify {

double Rng::uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw ValidationError("Rng::index on an empty range");
  return std::min(static_cast<std::size_t>(uniform01() * static_cast<double>(n)), n - 1);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  for (unsigned char c : label) h = splitmix64(h ^ c);
  return splitmix64(h ^ splitmix64(index));
}

// ---------------------------------------------------------------------------
// Cohort spec

namespace {

TrueRegionParams default_params(const std::string& region) {
  if (region == "hippocampus") return {region, 0.0068, -0.000035, 0.00015, 0.00045};
  if (region == "entorhinal_cortex") return {region, 0.0028, -0.000015, 0.00006, 0.00025};
  if (region == "temporal_neocortex") return {region, 0.072, -0.00025, 0.001, 0.004};
  if (region == "amygdala") return {region, 0.0026, -0.000012, 0.00008, 0.0002};
  if (region == "lateral_ventricles") return {region, -0.004, 0.00045, 0.002, 0.006};
  throw ValidationError("cohort spec: no generating parameters for region '" + region + "'");
}

std::map<Diagnosis, ClassTrajectory> default_trajectories() {
  std::map<Diagnosis, ClassTrajectory> t;
  t[Diagnosis::CN] = {};
  t[Diagnosis::MCI] = {
      {{"hippocampus", -0.9}, {"entorhinal_cortex", -0.8}, {"temporal_neocortex", -0.4},
       {"amygdala", -0.6}, {"lateral_ventricles", -0.5}},
      {{"hippocampus", -0.15}, {"entorhinal_cortex", -0.12}, {"temporal_neocortex", -0.05},
       {"amygdala", -0.05}, {"lateral_ventricles", -0.05}},
  };
  t[Diagnosis::Dementia] = {
      {{"hippocampus", -1.6}, {"entorhinal_cortex", -1.5}, {"temporal_neocortex", -1.0},
       {"amygdala", -1.2}, {"lateral_ventricles", -1.2}},
      {{"hippocampus", -0.4}, {"entorhinal_cortex", -0.3}, {"temporal_neocortex", -0.2},
       {"amygdala", -0.2}, {"lateral_ventricles", -0.25}},
  };
  return t;
}

double lookup(const std::map<std::string, double>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? 0.0 : it->second;
}

Diagnosis diagnosis_from_key(const std::string& s) {
  auto d = parse_diagnosis(s);
  if (!d) throw ValidationError("cohort spec: unknown diagnosis '" + s + "'");
  return *d;
}

}  // namespace

CohortSpec CohortSpec::defaults() {
  CohortSpec s;
  for (const auto& r : s.registry.regions()) s.regions.push_back(default_params(r.id));
  s.trajectories = default_trajectories();
  return s;
}

CohortSpec CohortSpec::from_json(const nlohmann::json& j) {
  CohortSpec s = defaults();
  try {
    if (j.contains("registry")) {
      s.registry = Registry::from_json(j.at("registry"));
      std::vector<TrueRegionParams> params;
      for (const auto& r : s.registry.regions()) {
        auto it = std::find_if(s.regions.begin(), s.regions.end(),
                               [&](const TrueRegionParams& p) { return p.region == r.id; });
        params.push_back(it != s.regions.end() ? *it : TrueRegionParams{r.id, 0.0, 0.0, 0.0, 0.0});
      }
      s.regions = std::move(params);
    }
    if (j.contains("regions")) {
      for (const auto& item : j.at("regions")) {
        const auto id = item.at("region").get<std::string>();
        auto it = std::find_if(s.regions.begin(), s.regions.end(),
                               [&](const TrueRegionParams& p) { return p.region == id; });
        if (it == s.regions.end()) {
          throw ValidationError("cohort spec: region '" + id + "' is not in the registry");
        }
        it->alpha = item.value("alpha", it->alpha);
        it->beta_age = item.value("beta_age", it->beta_age);
        it->beta_sex = item.value("beta_sex", it->beta_sex);
        it->sigma = item.value("sigma", it->sigma);
      }
    }
    if (j.contains("age_range")) {
      const auto& a = j.at("age_range");
      s.age_min = a.at(0).get<double>();
      s.age_max = a.at(1).get<double>();
    }
    s.male_fraction = j.value("male_fraction", s.male_fraction);
    if (j.contains("mixture")) {
      s.mixture.clear();
      for (const auto& [k, v] : j.at("mixture").items()) s.mixture[diagnosis_from_key(k)] = v.get<double>();
    }
    if (j.contains("trajectories")) {
      for (const auto& [k, v] : j.at("trajectories").items()) {
        auto& t = s.trajectories[diagnosis_from_key(k)];
        if (v.contains("offset")) t.offset = v.at("offset").get<std::map<std::string, double>>();
        if (v.contains("drift")) t.drift = v.at("drift").get<std::map<std::string, double>>();
      }
    }
    s.subject_noise = j.value("subject_noise", s.subject_noise);
    s.visit_noise = j.value("visit_noise", s.visit_noise);
    s.visit_interval = j.value("visit_interval", s.visit_interval);
    if (j.contains("thresholds")) s.thresholds = Thresholds::from_json(j.at("thresholds"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("cohort spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json CohortSpec::to_json() const {
  nlohmann::json regions_json = nlohmann::json::array();
  for (const auto& p : regions) {
    regions_json.push_back({{"region", p.region},
                            {"alpha", p.alpha},
                            {"beta_age", p.beta_age},
                            {"beta_sex", p.beta_sex},
                            {"sigma", p.sigma}});
  }
  nlohmann::json mix = nlohmann::json::object();
  for (const auto& [d, p] : mixture) mix[std::string(to_string(d))] = p;
  nlohmann::json traj = nlohmann::json::object();
  for (const auto& [d, t] : trajectories) {
    traj[std::string(to_string(d))] = {{"offset", t.offset}, {"drift", t.drift}};
  }
  return {{"registry", registry.to_json()},
          {"regions", regions_json},
          {"age_range", {age_min, age_max}},
          {"male_fraction", male_fraction},
          {"mixture", mix},
          {"trajectories", traj},
          {"subject_noise", subject_noise},
          {"visit_noise", visit_noise},
          {"visit_interval", visit_interval},
          {"thresholds", thresholds.to_json()}};
}

void CohortSpec::validate() const {
  if (regions.size() != registry.size()) {
    throw ValidationError("cohort spec: generating parameters do not cover the registry");
  }
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].region != registry[i].id) {
      throw ValidationError("cohort spec: region parameters out of registry order");
    }
    const auto& p = regions[i];
    if (!(p.sigma > 0.0) || !std::isfinite(p.sigma)) {
      throw ValidationError("cohort spec: sigma must be > 0 for region '" + p.region + "'");
    }
    if (!std::isfinite(p.alpha) || !std::isfinite(p.beta_age) || !std::isfinite(p.beta_sex)) {
      throw ValidationError("cohort spec: non-finite coefficient for region '" + p.region + "'");
    }
  }
  if (!(age_min <= age_max) || !std::isfinite(age_min) || !std::isfinite(age_max)) {
    throw ValidationError("cohort spec: age range is empty");
  }
  if (!(male_fraction >= 0.0 && male_fraction <= 1.0)) {
    throw ValidationError("cohort spec: male_fraction must be in [0, 1]");
  }
  double total = 0.0;
  for (const auto& [d, p] : mixture) {
    if (!(p >= 0.0)) throw ValidationError("cohort spec: mixture weights must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("cohort spec: mixture must sum to 1");
  for (const auto& [d, t] : trajectories) {
    for (const auto* m : {&t.offset, &t.drift}) {
      for (const auto& [region, v] : *m) {
        if (!registry.index_of(region)) {
          throw ValidationError("cohort spec: trajectory names unknown region '" + region + "'");
        }
        if (!std::isfinite(v)) throw ValidationError("cohort spec: non-finite trajectory value");
      }
    }
  }
  if (!(subject_noise >= 0.0) || !(visit_noise >= 0.0)) {
    throw ValidationError("cohort spec: noise levels must be >= 0");
  }
  if (!(visit_interval >= 0.0)) throw ValidationError("cohort spec: visit_interval must be >= 0");
  thresholds.validate();
}

NormativeModel CohortSpec::true_model() const {
  NormativeModel m;
  m.registry_hash = registry.hash();
  for (const auto& p : regions) {
    RegionCoefficients c;
    c.alpha = p.alpha;
    c.beta_age = p.beta_age;
    c.beta_sex = p.beta_sex;
    c.sigma = p.sigma;
    m.regions.emplace_back(p.region, c);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Cohorts and truths

std::string sample_id_of(const VisitVolumes& v) { return v.subject_id + "_" + v.visit_id; }

namespace {

Diagnosis draw_class(const std::map<Diagnosis, double>& mixture, Rng& rng) {
  const double u = rng.uniform01();
  double acc = 0.0;
  Diagnosis last = Diagnosis::CN;
  for (const auto& [d, p] : mixture) {
    if (p <= 0.0) continue;
    acc += p;
    last = d;
    if (u < acc) return d;
  }
  return last;
}

std::string numbered(char prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

SynthCohort gen_cohort(const CohortSpec& spec, std::size_t n_subjects,
                       std::size_t visits_per_subject, std::uint64_t seed) {
  spec.validate();
  if (n_subjects == 0) throw ValidationError("gen_cohort: n_subjects must be > 0");
  if (visits_per_subject == 0) throw ValidationError("gen_cohort: visits_per_subject must be > 0");

  Rng rng(seed);
  const std::size_t k = spec.registry.size();
  SynthCohort out;
  out.rows.reserve(n_subjects * visits_per_subject);

  for (std::size_t s = 0; s < n_subjects; ++s) {
    const Diagnosis dx = draw_class(spec.mixture, rng);
    const double age0 = spec.age_min + (spec.age_max - spec.age_min) * rng.uniform01();
    const Sex sex = rng.bernoulli(spec.male_fraction) ? Sex::Male : Sex::Female;
    std::vector<double> subject_dev(k);
    for (auto& d : subject_dev) d = spec.subject_noise * rng.normal();

    static const ClassTrajectory kNone{};
    auto tit = spec.trajectories.find(dx);
    const ClassTrajectory& traj = tit == spec.trajectories.end() ? kNone : tit->second;

    for (std::size_t v = 0; v < visits_per_subject; ++v) {
      VisitVolumes row;
      row.subject_id = numbered('S', s + 1, 4);
      row.visit_id = numbered('V', v, 1);
      row.diagnosis = dx;
      row.age = age0 + spec.visit_interval * static_cast<double>(v);
      row.sex = sex;
      for (std::size_t r = 0; r < k; ++r) {
        const auto& region = spec.registry[r];
        const double jitter = spec.visit_noise * rng.normal();
        const double severity = lookup(traj.offset, region.id) +
                                lookup(traj.drift, region.id) * static_cast<double>(v) +
                                subject_dev[r] + jitter;
        const double z = region.direction == RegionDirection::Atrophy ? severity : -severity;
        const auto& p = spec.regions[r];
        const double mean = p.alpha + p.beta_age * row.age + p.beta_sex * (sex == Sex::Male ? 1.0 : 0.0);
        row.volumes[region.id] = mean + p.sigma * z;
      }
      out.rows.push_back(std::move(row));
    }
  }
  out.truths = derive_truths(out.rows, spec.true_model(), spec.registry, spec.thresholds);
  return out;
}

std::vector<GroundTruth> derive_truths(std::span<const VisitVolumes> rows,
                                       const NormativeModel& model, const Registry& registry,
                                       const Thresholds& thresholds) {
  std::vector<GroundTruth> out;
  out.reserve(rows.size());
  std::map<std::string, std::size_t> last_visit;  // subject -> index into out
  for (const auto& row : rows) {
    if (!row.diagnosis) {
      throw ValidationError("row " + sample_id_of(row) + " has no diagnosis for its ground truth");
    }
    GroundTruth t;
    t.sample_id = sample_id_of(row);
    t.diagnosis = *row.diagnosis;
    auto prior_it = last_visit.find(row.subject_id);
    t.visit_kind = prior_it == last_visit.end() ? VisitKind::Baseline : VisitKind::FollowUp;
    for (const auto& label : label_visit(model, row, registry, thresholds)) {
      RegionTruth rt;
      rt.region = label.region;
      rt.label = label.severity;
      rt.z = label.z;
      rt.zone = label.zone;
      if (prior_it != last_visit.end()) {
        const auto* prior = out[prior_it->second].find(label.region);
        rt.prior_label = prior->label;
        rt.prior_z = prior->z;
        rt.change_direction = derive_change_direction(prior->z, label.z, prior->label,
                                                      label.severity, thresholds.tolerance);
        rt.threshold_crossed = prior->label != label.severity;
      }
      t.regions.push_back(std::move(rt));
    }
    last_visit[row.subject_id] = out.size();
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clean reports

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

std::string format2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string change_noun(RegionDirection d) { return d == RegionDirection::Atrophy ? "atrophy" : "enlargement"; }

std::string dx_phrase(Diagnosis d, const SummaryKeywords& kw) {
  if (d == Diagnosis::CN) return "cognitively normal status";
  auto it = kw.diagnosis.find(d);
  if (it != kw.diagnosis.end() && !it->second.empty()) return it->second.front();
  return std::string(to_string(d));
}

std::string finding_sentence(const RegionAssessment& r, const VerifierConfig& cfg) {
  const auto& spec = cfg.registry.at(r.region);
  return capitalized(to_string(r.label)) + " " + change_noun(spec.direction) + " of the " +
         cfg.lexicon.synonyms.display_name(r.region) + ".";
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

}  // namespace

StructuredReport gen_clean_report_model(const GroundTruth& truth, const VerifierConfig& cfg,
                                        std::uint64_t seed) {
  Rng rng(seed);
  StructuredReport r;
  std::vector<std::string> observations;
  std::vector<std::string> progression;
  std::vector<std::string> summary_findings;

  for (const auto& spec : cfg.registry.regions()) {
    const auto* t = truth.find(spec.id);
    if (!t) throw ValidationError("truth '" + truth.sample_id + "' lacks region '" + spec.id + "'");
    RegionAssessment a;
    a.region = spec.id;
    a.label = t->label;
    a.confidence = round2(rng.uniform(0.60, 0.95));
    if (truth.visit_kind == VisitKind::FollowUp) {
      a.change_direction = t->change_direction;
      a.threshold_crossed = t->threshold_crossed;
      if (a.threshold_crossed.value_or(false)) {
        progression.push_back("The " + cfg.lexicon.synonyms.display_name(spec.id) +
                              " shows interval change with progression since the prior scan.");
      }
    }
    if (is_abnormal(a.label)) {
      observations.push_back(finding_sentence(a, cfg));
      summary_findings.push_back(finding_sentence(a, cfg));
    }
    r.regions.push_back(std::move(a));
  }
  if (observations.empty()) observations.push_back("Regional volumes fall within normative limits.");
  observations.insert(observations.end(), progression.begin(), progression.end());
  r.imaging_observations = join(observations);

  r.diagnosis = truth.diagnosis;
  r.diagnosis_confidence = 1.0;  // always correct, so calibrated only at 1
  std::string integration = "The overall pattern is most consistent with " +
                            dx_phrase(r.diagnosis, cfg.keywords) + ".";
  if (truth.visit_kind == VisitKind::Baseline) {
    integration += " No prior scan is available for comparison.";
  } else if (progression.empty()) {
    integration += " No threshold crossing since the prior scan.";
  }
  r.clinical_integration = integration;

  std::vector<std::string> summary{"Findings are consistent with " +
                                   dx_phrase(r.diagnosis, cfg.keywords) +
                                   " (diagnostic confidence " + format2(r.diagnosis_confidence) +
                                   ")."};
  if (summary_findings.empty()) summary_findings.push_back("No regional abnormality is identified.");
  summary.insert(summary.end(), summary_findings.begin(), summary_findings.end());
  r.summary = join(summary);
  return r;
}

std::string gen_clean_report(const GroundTruth& truth, const VerifierConfig& cfg,
                             std::uint64_t seed) {
  return serialize_report(gen_clean_report_model(truth, cfg, seed), cfg.registry);
}

// ---------------------------------------------------------------------------
// Error injection

namespace {

constexpr std::array<std::pair<ErrorType, std::string_view>, 9> kErrorNames{{
    {ErrorType::AdjacentLabelFlip, "adjacent_label_flip"},
    {ErrorType::TwoLevelLabelFlip, "two_level_label_flip"},
    {ErrorType::DxAdjacent, "dx_adjacent"},
    {ErrorType::DxNonAdjacent, "dx_non_adjacent"},
    {ErrorType::OmitMention, "omit_mention"},
    {ErrorType::ImpossibleReversal, "impossible_reversal"},
    {ErrorType::FlagDirectionMismatch, "flag_direction_mismatch"},
    {ErrorType::SummaryContradiction, "summary_contradiction"},
    {ErrorType::ConfidenceJitter, "confidence_jitter"},
}};

}  // namespace

std::string_view to_string(ErrorType e) {
  for (const auto& [t, name] : kErrorNames) {
    if (t == e) return name;
  }
  return "unknown";
}

std::optional<ErrorType> parse_error_type(std::string_view s) {
  for (const auto& [t, name] : kErrorNames) {
    if (name == s) return t;
  }
  return std::nullopt;
}

ErrorSpec ErrorSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("error spec must be an object");
  ErrorSpec s;
  for (const auto& [k, v] : j.items()) {
    auto t = parse_error_type(k);
    if (!t) throw ValidationError("error spec: unknown corruption '" + k + "'");
    if (!v.is_number()) throw ValidationError("error spec: '" + k + "' must be a number");
    s.probability[*t] = v.get<double>();
  }
  s.validate();
  return s;
}

nlohmann::json ErrorSpec::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [t, p] : probability) j[std::string(to_string(t))] = p;
  return j;
}

void ErrorSpec::validate() const {
  for (const auto& [t, p] : probability) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("error spec: probability of " + std::string(to_string(t)) +
                            " must be in [0, 1]");
    }
  }
}

bool InjectionManifest::has(ErrorType t) const {
  return std::any_of(applied.begin(), applied.end(),
                     [&](const AppliedCorruption& a) { return a.type == t; });
}

nlohmann::json InjectionManifest::to_json() const {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : applied) {
    a.push_back({{"type", to_string(c.type)}, {"region", c.region}, {"detail", c.detail}});
  }
  nlohmann::json s = nlohmann::json::array();
  for (const auto& c : skipped) s.push_back({{"type", to_string(c.type)}, {"reason", c.reason}});
  return {{"applied", a}, {"skipped", s}};
}

namespace {

template <typename Pred>
RegionAssessment* pick_region(StructuredReport& report, const std::set<std::string>& touched,
                              Rng& rng, Pred pred) {
  std::vector<RegionAssessment*> eligible;
  for (auto& r : report.regions) {
    if (!touched.count(r.region) && pred(r)) eligible.push_back(&r);
  }
  if (eligible.empty()) return nullptr;
  return eligible[rng.index(eligible.size())];
}

std::string transition(Severity from, Severity to) {
  return std::string(to_string(from)) + "->" + std::string(to_string(to));
}

// Drops every sentence of `text` that mentions the region.
std::string drop_mentions(const std::string& text, std::string_view region, const SynonymTable& syn) {
  std::vector<std::string> kept;
  for (auto s : text::sentences(text)) {
    auto trimmed = text::trim(s);
    if (trimmed.empty() || syn.mentioned(trimmed, region)) continue;
    std::string sentence(trimmed);
    if (sentence.back() != '.') sentence += '.';
    kept.push_back(std::move(sentence));
  }
  return join(kept);
}

}  // namespace

std::optional<AppliedCorruption> apply_corruption(StructuredReport& report, ErrorType type,
                                                  const GroundTruth& truth,
                                                  const VerifierConfig& cfg, Rng& rng,
                                                  std::set<std::string>& touched) {
  const bool follow_up = truth.visit_kind == VisitKind::FollowUp;
  auto region_result = [&](RegionAssessment& r, std::string detail) {
    touched.insert(r.region);
    return AppliedCorruption{type, r.region, std::move(detail)};
  };

  switch (type) {
    case ErrorType::AdjacentLabelFlip: {
      auto* r = pick_region(report, touched, rng, [](const RegionAssessment&) { return true; });
      if (!r) return std::nullopt;
      Severity to = Severity::Mild;
      if (r->label == Severity::Mild) to = rng.bernoulli(0.5) ? Severity::Normal : Severity::Severe;
      const auto detail = transition(r->label, to);
      r->label = to;
      return region_result(*r, detail);
    }
    case ErrorType::TwoLevelLabelFlip: {
      auto* r = pick_region(report, touched, rng,
                            [](const RegionAssessment& a) { return a.label != Severity::Mild; });
      if (!r) return std::nullopt;
      const Severity to = r->label == Severity::Normal ? Severity::Severe : Severity::Normal;
      const auto detail = transition(r->label, to);
      r->label = to;
      return region_result(*r, detail);
    }
    case ErrorType::DxAdjacent: {
      const Diagnosis from = report.diagnosis;
      Diagnosis to = Diagnosis::MCI;
      if (from == Diagnosis::MCI) to = rng.bernoulli(0.5) ? Diagnosis::CN : Diagnosis::Dementia;
      report.diagnosis = to;
      return AppliedCorruption{type, "", std::string(to_string(from)) + "->" + std::string(to_string(to))};
    }
    case ErrorType::DxNonAdjacent: {
      const Diagnosis from = report.diagnosis;
      if (from == Diagnosis::MCI) return std::nullopt;
      report.diagnosis = from == Diagnosis::CN ? Diagnosis::Dementia : Diagnosis::CN;
      return AppliedCorruption{type, "",
                               std::string(to_string(from)) + "->" + std::string(to_string(report.diagnosis))};
    }
    case ErrorType::OmitMention: {
      const std::string reasoning = report.reasoning_text();
      auto* r = pick_region(report, touched, rng, [&](const RegionAssessment& a) {
        return is_abnormal(a.label) && cfg.lexicon.synonyms.mentioned(reasoning, a.region);
      });
      if (!r) return std::nullopt;
      report.imaging_observations = drop_mentions(report.imaging_observations, r->region, cfg.lexicon.synonyms);
      report.clinical_integration = drop_mentions(report.clinical_integration, r->region, cfg.lexicon.synonyms);
      if (report.imaging_observations.empty()) report.imaging_observations = "See the summary below.";
      return region_result(*r, "mention removed from reasoning");
    }
    case ErrorType::ImpossibleReversal: {
      if (!follow_up) return std::nullopt;
      auto* r = pick_region(report, touched, rng, [&](const RegionAssessment& a) {
        const auto* t = truth.find(a.region);
        return t && t->prior_label == Severity::Severe && a.label != Severity::Normal;
      });
      if (!r) return std::nullopt;
      const auto detail = transition(r->label, Severity::Normal) + " after severe prior";
      r->label = Severity::Normal;
      return region_result(*r, detail);
    }
    case ErrorType::FlagDirectionMismatch: {
      if (!follow_up) return std::nullopt;
      auto* r = pick_region(report, touched, rng, [](const RegionAssessment& a) {
        return a.change_direction.has_value() && a.threshold_crossed.has_value();
      });
      if (!r) return std::nullopt;
      if (rng.bernoulli(0.5)) {
        r->threshold_crossed = !*r->threshold_crossed;
        return region_result(*r, std::string("threshold_crossed -> ") + (*r->threshold_crossed ? "true" : "false"));
      }
      std::vector<ChangeDirection> others;
      for (auto d : {ChangeDirection::Stable, ChangeDirection::ProgressiveAtrophy,
                     ChangeDirection::ProgressiveEnlargement}) {
        if (d != *r->change_direction) others.push_back(d);
      }
      r->change_direction = others[rng.index(others.size())];
      return region_result(*r, "change_direction -> " + std::string(to_string(*r->change_direction)));
    }
    case ErrorType::SummaryContradiction: {
      auto* r = pick_region(report, touched, rng, [](const RegionAssessment&) { return true; });
      if (!r) return std::nullopt;
      const auto& spec = cfg.registry.at(r->region);
      const std::string name = cfg.lexicon.synonyms.display_name(r->region);
      const std::string sentence =
          r->label == Severity::Severe
              ? "The " + name + " appears normal."
              : "The " + name + " shows severe " + change_noun(spec.direction) + ".";
      report.summary = report.summary.empty() ? sentence : report.summary + " " + sentence;
      return region_result(*r, sentence);
    }
    case ErrorType::ConfidenceJitter: {
      const double from = report.diagnosis_confidence;
      const double delta = round2(rng.uniform(0.05, 0.20));
      double to = rng.bernoulli(0.5) ? from + delta : from - delta;
      if (to < 0.0 || to > 1.0) to = to > 1.0 ? from - delta : from + delta;
      to = std::clamp(round2(to), 0.0, 1.0);
      if (std::abs(to - from) <= cfg.keywords.confidence_tolerance) return std::nullopt;
      report.diagnosis_confidence = to;
      return AppliedCorruption{type, "", format2(from) + "->" + format2(to)};
    }
  }
  return std::nullopt;
}

InjectionResult inject_errors(std::string_view clean, const ErrorSpec& spec,
                              const GroundTruth& truth, const VerifierConfig& cfg,
                              std::uint64_t seed) {
  spec.validate();
  InjectionResult out;
  out.raw = std::string(clean);
  auto parsed = parse_raw_output(clean, truth.visit_kind, cfg.registry);
  if (!parsed.valid()) throw ValidationError("inject_errors: clean input does not parse as a valid report");
  StructuredReport report = std::move(*parsed.report);

  Rng rng(seed);
  std::set<std::string> touched;
  for (ErrorType t : kAllErrorTypes) {
    auto it = spec.probability.find(t);
    if (it == spec.probability.end() || it->second <= 0.0) continue;
    if (!rng.bernoulli(it->second)) continue;
    if (auto applied = apply_corruption(report, t, truth, cfg, rng, touched)) {
      out.manifest.applied.push_back(std::move(*applied));
    } else {
      out.manifest.skipped.push_back({t, "not applicable to this report"});
    }
  }
  if (!out.manifest.applied.empty()) out.raw = serialize_report(report, cfg.registry);
  return out;
}

// ---------------------------------------------------------------------------
// Pools

PoolSpec PoolSpec::defaults() {
  PoolSpec s;
  for (ErrorType t : kAllErrorTypes) s.errors.probability[t] = 0.3;
  return s;
}

PoolSpec PoolSpec::from_json(const nlohmann::json& j) {
  PoolSpec s = defaults();
  try {
    s.k = j.value("k", s.k);
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "independent") {
        s.mode = PoolMode::Independent;
      } else if (m == "nested") {
        s.mode = PoolMode::Nested;
      } else {
        throw ValidationError("pool spec: unknown mode '" + m + "'");
      }
    }
    if (j.contains("errors")) s.errors = ErrorSpec::from_json(j.at("errors"));
    if (j.contains("nested_order")) {
      s.nested_order.clear();
      for (const auto& name : j.at("nested_order")) {
        auto t = parse_error_type(name.get<std::string>());
        if (!t) throw ValidationError("pool spec: unknown corruption in nested_order");
        s.nested_order.push_back(*t);
      }
    }
    s.shuffle = j.value("shuffle", s.shuffle);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pool spec: ") + e.what());
  }
  if (s.k < 2) throw ValidationError("pool spec: k must be >= 2");
  return s;
}

nlohmann::json PoolSpec::to_json() const {
  nlohmann::json order = nlohmann::json::array();
  for (auto t : nested_order) order.push_back(to_string(t));
  return {{"k", k},
          {"mode", mode == PoolMode::Nested ? "nested" : "independent"},
          {"errors", errors.to_json()},
          {"nested_order", order},
          {"shuffle", shuffle}};
}

nlohmann::json GeneratedPool::manifest_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& m : manifests) per.push_back(m.to_json());
  return {{"sample_id", pool.sample_id}, {"clean_index", clean_index}, {"candidates", per}};
}

namespace {

// Tries the given types in order until one applies.
std::optional<AppliedCorruption> apply_first(StructuredReport& report,
                                             const std::vector<ErrorType>& types,
                                             const GroundTruth& truth, const VerifierConfig& cfg,
                                             Rng& rng, std::set<std::string>& touched) {
  for (ErrorType t : types) {
    if (auto a = apply_corruption(report, t, truth, cfg, rng, touched)) return a;
  }
  return std::nullopt;
}

}  // namespace

GeneratedPool gen_pool(const GroundTruth& truth, const PoolSpec& spec, const VerifierConfig& cfg,
                       std::uint64_t seed) {
  if (spec.k < 2) throw ValidationError("gen_pool: k must be >= 2");
  spec.errors.validate();
  Rng rng(seed);
  const StructuredReport clean_model = gen_clean_report_model(truth, cfg, derive_seed(seed, "clean"));
  const std::string clean = serialize_report(clean_model, cfg.registry);

  std::vector<ErrorType> fallback(kAllErrorTypes.begin(), kAllErrorTypes.end());
  std::vector<ErrorType> enabled;
  for (ErrorType t : kAllErrorTypes) {
    auto it = spec.errors.probability.find(t);
    if (it != spec.errors.probability.end() && it->second > 0.0) enabled.push_back(t);
  }
  if (enabled.empty()) enabled = fallback;

  std::vector<std::string> candidates{clean};
  std::vector<InjectionManifest> manifests{InjectionManifest{}};

  StructuredReport nested = clean_model;
  InjectionManifest nested_manifest;
  std::set<std::string> nested_touched;
  std::size_t cursor = 0;

  for (std::size_t j = 1; j < spec.k; ++j) {
    if (spec.mode == PoolMode::Independent) {
      auto result = inject_errors(clean, spec.errors, truth, cfg, derive_seed(seed, "candidate", j));
      if (result.manifest.applied.empty()) {
        StructuredReport report = clean_model;
        std::set<std::string> touched;
        std::vector<ErrorType> order = enabled;
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        auto forced = apply_first(report, order, truth, cfg, rng, touched);
        if (!forced) forced = apply_first(report, fallback, truth, cfg, rng, touched);
        if (!forced) throw ValidationError("gen_pool: no corruption applies to '" + truth.sample_id + "'");
        result.manifest.applied.push_back(*forced);
        result.raw = serialize_report(report, cfg.registry);
      }
      candidates.push_back(std::move(result.raw));
      manifests.push_back(std::move(result.manifest));
    } else {
      std::optional<AppliedCorruption> added;
      while (!added && cursor < spec.nested_order.size()) {
        added = apply_corruption(nested, spec.nested_order[cursor++], truth, cfg, rng, nested_touched);
      }
      if (!added) added = apply_first(nested, fallback, truth, cfg, rng, nested_touched);
      if (!added) throw ValidationError("gen_pool: no corruption applies to '" + truth.sample_id + "'");
      nested_manifest.applied.push_back(*added);
      candidates.push_back(serialize_report(nested, cfg.registry));
      manifests.push_back(nested_manifest);
    }
  }

  std::vector<std::size_t> order(spec.k);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (spec.shuffle) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  }

  GeneratedPool out;
  out.pool.sample_id = truth.sample_id;
  out.pool.visit_kind = truth.visit_kind;
  out.pool.truth = truth;
  out.pool.gt_text = clean;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    out.pool.candidates.push_back(candidates[order[pos]]);
    out.manifests.push_back(manifests[order[pos]]);
    if (order[pos] == 0) out.clean_index = pos;
  }
  return out;
}

}  // namespace neuroverify
