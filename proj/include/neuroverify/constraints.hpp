#pragma once

// Code-checkable report constraints.
//
//   C1  every abnormal region is mentioned in the reasoning text, and a
//       crossed threshold is cited with a progression term in the same
//       sentence as the region;
//   C2  no region is two or more severity levels milder than its prior label;
//   C3  threshold_crossed, the label change and change_direction agree.
//
// Matching is lexical: case-insensitive substring search over a region
// synonym table.

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/report.hpp"
#include "neuroverify/types.hpp"

namespace neuroverify {

class MissingPriorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SynonymTable {
 public:
  SynonymTable() = default;
  explicit SynonymTable(std::map<std::string, std::vector<std::string>> terms);

  static SynonymTable defaults();
  static SynonymTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  // The id itself, the id with '_' read as ' ', and the configured synonyms.
  std::vector<std::string> terms_for(std::string_view region) const;

  bool mentioned(std::string_view text, std::string_view region) const;

  // First configured synonym, else the id with '_' read as ' '.
  std::string display_name(std::string_view region) const;

 private:
  std::map<std::string, std::vector<std::string>> terms_;
};

struct ConstraintLexicon {
  SynonymTable synonyms = SynonymTable::defaults();
  std::vector<std::string> progression_terms{"progress", "worsen", "increase", "atrophy since",
                                             "interval change"};
};

struct PriorContext {
  std::map<std::string, Severity> labels;  // previous visit's normative labels

  Severity at(std::string_view region) const;  // throws MissingPriorError
};

enum class Constraint { C1, C2, C3 };
std::string_view to_string(Constraint c);

enum class FindingSeverity { Violation, Warning };
std::string_view to_string(FindingSeverity s);

enum class Rule {
  Mention,                   // C1: abnormal region referenced in reasoning
  ProgressionCitation,       // C1: crossing cited with a progression term
  ImplausibleReversal,       // C2
  FlagMatchesLabelChange,    // C3 (a)
  DirectionMatchesWorsening, // C3 (b)
  StableImpliesNoCrossing,   // C3 (c)
  ImprovementDirection,      // C3 warning: one-level improvement reported as progressive
};
std::string_view to_string(Rule r);

struct ConstraintFinding {
  Constraint constraint = Constraint::C1;
  Rule rule = Rule::Mention;
  std::string region;
  std::string description;
  FindingSeverity severity = FindingSeverity::Violation;

  bool is_violation() const { return severity == FindingSeverity::Violation; }
  nlohmann::json to_json() const;
  bool operator==(const ConstraintFinding&) const = default;
};

std::vector<ConstraintFinding> check_c1(const StructuredReport& report,
                                        const ConstraintLexicon& lexicon);

// Throws MissingPriorError without a prior context (baseline visits).
std::vector<ConstraintFinding> check_c2(const StructuredReport& report,
                                        const std::optional<PriorContext>& prior);

// Throws MissingPriorError without a prior context, ValidationError when a
// region lacks its follow-up fields.
std::vector<ConstraintFinding> check_c3(const StructuredReport& report,
                                        const std::optional<PriorContext>& prior,
                                        const Registry& registry);

// C1 always; C2 and C3 on follow-up visits.
std::vector<ConstraintFinding> check_all(const StructuredReport& report, VisitKind visit,
                                         const std::optional<PriorContext>& prior,
                                         const Registry& registry,
                                         const ConstraintLexicon& lexicon);

// True when some sentence of `text` mentions `region` together with a
// progression term.
bool progression_cited(std::string_view text, std::string_view region,
                       const ConstraintLexicon& lexicon);

}  // namespace neuroverify
