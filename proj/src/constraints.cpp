#include "neuroverify/constraints.hpp"

#include <algorithm>

#include "neuroverify/text.hpp"

namespace neuroverify {

namespace {
std::string spaced(std::string_view id) {
  std::string s(id);
  std::replace(s.begin(), s.end(), '_', ' ');
  return s;
}
}  // namespace

SynonymTable::SynonymTable(std::map<std::string, std::vector<std::string>> terms)
    : terms_(std::move(terms)) {}

SynonymTable SynonymTable::defaults() {
  return SynonymTable({
      {"hippocampus", {"hippocampus", "hippocampal", "hippocampi"}},
      {"entorhinal_cortex", {"entorhinal cortex", "entorhinal"}},
      {"temporal_neocortex",
       {"temporal neocortex", "temporal neocortical", "lateral temporal cortex"}},
      {"amygdala", {"amygdala", "amygdalar", "amygdalae"}},
      {"lateral_ventricles", {"lateral ventricles", "ventricular", "ventricle"}},
  });
}

SynonymTable SynonymTable::from_json(const nlohmann::json& j) {
  std::map<std::string, std::vector<std::string>> terms;
  for (const auto& [region, list] : j.items()) {
    terms[region] = list.get<std::vector<std::string>>();
  }
  return SynonymTable(std::move(terms));
}

nlohmann::json SynonymTable::to_json() const { return terms_; }

std::vector<std::string> SynonymTable::terms_for(std::string_view region) const {
  std::vector<std::string> out{std::string(region)};
  const auto sp = spaced(region);
  if (sp != region) out.push_back(sp);
  if (auto it = terms_.find(std::string(region)); it != terms_.end()) {
    out.insert(out.end(), it->second.begin(), it->second.end());
  }
  return out;
}

bool SynonymTable::mentioned(std::string_view text, std::string_view region) const {
  return text::contains_any(text, terms_for(region));
}

std::string SynonymTable::display_name(std::string_view region) const {
  if (auto it = terms_.find(std::string(region)); it != terms_.end() && !it->second.empty()) {
    return it->second.front();
  }
  return spaced(region);
}

Severity PriorContext::at(std::string_view region) const {
  auto it = labels.find(std::string(region));
  if (it == labels.end()) {
    throw MissingPriorError("no prior label for region '" + std::string(region) + "'");
  }
  return it->second;
}

std::string_view to_string(Constraint c) {
  switch (c) {
    case Constraint::C1: return "C1";
    case Constraint::C2: return "C2";
    case Constraint::C3: return "C3";
  }
  return "C1";
}

std::string_view to_string(FindingSeverity s) {
  return s == FindingSeverity::Violation ? "violation" : "warning";
}

std::string_view to_string(Rule r) {
  switch (r) {
    case Rule::Mention: return "mention";
    case Rule::ProgressionCitation: return "progression_citation";
    case Rule::ImplausibleReversal: return "implausible_reversal";
    case Rule::FlagMatchesLabelChange: return "flag_matches_label_change";
    case Rule::DirectionMatchesWorsening: return "direction_matches_worsening";
    case Rule::StableImpliesNoCrossing: return "stable_implies_no_crossing";
    case Rule::ImprovementDirection: return "improvement_direction";
  }
  return "mention";
}

nlohmann::json ConstraintFinding::to_json() const {
  return {{"constraint", to_string(constraint)},
          {"rule", to_string(rule)},
          {"region", region},
          {"severity", to_string(severity)},
          {"description", description}};
}

bool progression_cited(std::string_view text, std::string_view region,
                       const ConstraintLexicon& lexicon) {
  const auto terms = lexicon.synonyms.terms_for(region);
  for (auto sentence : text::sentences(text)) {
    if (text::contains_any(sentence, terms) &&
        text::contains_any(sentence, lexicon.progression_terms)) {
      return true;
    }
  }
  return false;
}

std::vector<ConstraintFinding> check_c1(const StructuredReport& report,
                                        const ConstraintLexicon& lexicon) {
  std::vector<ConstraintFinding> out;
  const std::string reasoning = report.reasoning_text();
  for (const auto& r : report.regions) {
    if (is_abnormal(r.label) && !lexicon.synonyms.mentioned(reasoning, r.region)) {
      out.push_back({Constraint::C1, Rule::Mention, r.region,
                     "region labeled " + std::string(to_string(r.label)) +
                         " is not referenced in the reasoning text",
                     FindingSeverity::Violation});
    }
    if (r.threshold_crossed.value_or(false) && !progression_cited(reasoning, r.region, lexicon)) {
      out.push_back({Constraint::C1, Rule::ProgressionCitation, r.region,
                     "threshold crossing is not cited with a progression term",
                     FindingSeverity::Violation});
    }
  }
  return out;
}

std::vector<ConstraintFinding> check_c2(const StructuredReport& report,
                                        const std::optional<PriorContext>& prior) {
  if (!prior) throw MissingPriorError("C2 requires the prior visit's labels");
  std::vector<ConstraintFinding> out;
  for (const auto& r : report.regions) {
    const Severity before = prior->at(r.region);
    if (code(before) - code(r.label) >= 2) {
      out.push_back({Constraint::C2, Rule::ImplausibleReversal, r.region,
                     "label " + std::string(to_string(r.label)) + " is two levels milder than prior " +
                         std::string(to_string(before)),
                     FindingSeverity::Violation});
    }
  }
  return out;
}

std::vector<ConstraintFinding> check_c3(const StructuredReport& report,
                                        const std::optional<PriorContext>& prior,
                                        const Registry& registry) {
  if (!prior) throw MissingPriorError("C3 requires the prior visit's labels");
  std::vector<ConstraintFinding> out;
  for (const auto& r : report.regions) {
    if (!r.threshold_crossed || !r.change_direction) {
      throw ValidationError("C3: region '" + r.region + "' lacks follow-up fields");
    }
    const Severity before = prior->at(r.region);
    const bool crossed = *r.threshold_crossed;
    const ChangeDirection dir = *r.change_direction;
    const bool changed = before != r.label;
    const bool worsened = code(r.label) > code(before);

    if (crossed != changed) {
      out.push_back({Constraint::C3, Rule::FlagMatchesLabelChange, r.region,
                     std::string("threshold_crossed=") + (crossed ? "true" : "false") +
                         " but label went " + std::string(to_string(before)) + " -> " +
                         std::string(to_string(r.label)),
                     FindingSeverity::Violation});
    }
    const ChangeDirection expected = worsening_direction(registry.at(r.region).direction);
    if (crossed && worsened && dir != expected) {
      out.push_back({Constraint::C3, Rule::DirectionMatchesWorsening, r.region,
                     "worsening crossing reported as " + std::string(to_string(dir)) + ", expected " +
                         std::string(to_string(expected)),
                     FindingSeverity::Violation});
    }
    if (dir == ChangeDirection::Stable && crossed) {
      out.push_back({Constraint::C3, Rule::StableImpliesNoCrossing, r.region,
                     "change_direction=stable with threshold_crossed=true",
                     FindingSeverity::Violation});
    }
    if (crossed && changed && !worsened && dir != ChangeDirection::Stable) {
      out.push_back({Constraint::C3, Rule::ImprovementDirection, r.region,
                     "improvement reported with progressive vocabulary (" +
                         std::string(to_string(dir)) + ")",
                     FindingSeverity::Warning});
    }
  }
  return out;
}

std::vector<ConstraintFinding> check_all(const StructuredReport& report, VisitKind visit,
                                         const std::optional<PriorContext>& prior,
                                         const Registry& registry,
                                         const ConstraintLexicon& lexicon) {
  auto out = check_c1(report, lexicon);
  if (visit == VisitKind::FollowUp) {
    auto c2 = check_c2(report, prior);
    auto c3 = check_c3(report, prior, registry);
    out.insert(out.end(), c2.begin(), c2.end());
    out.insert(out.end(), c3.begin(), c3.end());
  }
  return out;
}

}  // namespace neuroverify
