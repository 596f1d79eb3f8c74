#include "neuroverify/report.hpp"

#include <algorithm>
#include <set>

#include "neuroverify/text.hpp"

namespace neuroverify {

using ojson = nlohmann::ordered_json;
namespace k = report_keys;

namespace {

constexpr std::size_t kMaxObjectCandidates = 256;

// Returns one past the closing brace matching the '{' at `start`, or npos when
// the object never closes. Braces inside string literals are ignored.
std::size_t match_object(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

struct Extracted {
  ojson object;
  std::size_t end = 0;
};

// First balanced {...} span that parses as a JSON object. Spans that balance
// but fail to parse (a prompt-echoed schema template, say) are skipped.
std::optional<Extracted> extract_object(std::string_view raw) {
  std::size_t pos = 0;
  std::size_t tried = 0;
  while ((pos = raw.find('{', pos)) != std::string_view::npos && tried < kMaxObjectCandidates) {
    ++tried;
    const std::size_t end = match_object(raw, pos);
    if (end == std::string_view::npos) {
      ++pos;
      continue;
    }
    auto parsed = ojson::parse(raw.substr(pos, end - pos), nullptr, false);
    if (!parsed.is_discarded() && parsed.is_object()) return Extracted{std::move(parsed), end};
    ++pos;
  }
  return std::nullopt;
}

bool is_known_top_key(const std::string& key) {
  static const std::set<std::string> known{k::kObservations, k::kIntegration, k::kRegions,
                                           k::kDiagnosis, k::kDiagnosisConfidence};
  return known.count(key) > 0;
}

bool is_known_region_key(const std::string& key) {
  static const std::set<std::string> known{k::kRegion, k::kLabel, k::kConfidence,
                                           k::kChangeDirection, k::kThresholdCrossed};
  return known.count(key) > 0;
}

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

class SchemaChecker {
 public:
  SchemaChecker(VisitKind visit, const Registry& registry, ParseOutcome& out)
      : visit_(visit), registry_(registry), out_(out) {}

  std::optional<StructuredReport> check(const ojson& obj) {
    StructuredReport report;
    for (const auto& [key, _] : obj.items()) {
      report.raw_key_order.push_back(key);
      if (!is_known_top_key(key)) out_.warnings.push_back("unknown top-level key '" + key + "'");
    }

    report.imaging_observations = required_string(obj, k::kObservations);
    report.clinical_integration = required_string(obj, k::kIntegration);

    if (auto d = required_enum(obj, k::kDiagnosis, parse_diagnosis, "CN|MCI|Dementia")) {
      report.diagnosis = *d;
    }
    if (auto c = required_fraction(obj, k::kDiagnosisConfidence, k::kDiagnosisConfidence)) {
      report.diagnosis_confidence = *c;
    }

    auto it = obj.find(k::kRegions);
    if (it == obj.end()) {
      fail("missing key 'regions'");
    } else if (!it->is_array()) {
      fail("'regions' must be an array");
    } else {
      report.regions = check_regions(*it);
    }

    if (failed_) return std::nullopt;
    return report;
  }

 private:
  void fail(std::string msg) {
    failed_ = true;
    out_.diagnostics.push_back(std::move(msg));
  }

  std::string required_string(const ojson& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail(std::string("missing key '") + key + "'");
      return {};
    }
    if (!it->is_string()) {
      fail(std::string("'") + key + "' must be a string");
      return {};
    }
    return it->get<std::string>();
  }

  template <typename Parse>
  auto required_enum(const ojson& obj, const std::string& key, Parse parse, const char* allowed,
                     const std::string& where = {}) -> decltype(parse(std::string_view{})) {
    const std::string label = where.empty() ? key : where + "." + key;
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail("missing key '" + label + "'");
      return std::nullopt;
    }
    if (!it->is_string()) {
      fail("'" + label + "' must be a string");
      return std::nullopt;
    }
    auto v = parse(it->template get_ref<const std::string&>());
    if (!v) {
      fail("'" + label + "': unknown value '" + it->template get<std::string>() + "' (allowed: " +
           allowed + ")");
    }
    return v;
  }

  std::optional<double> required_fraction(const ojson& obj, const std::string& key,
                                          const std::string& label) {
    auto it = obj.find(key);
    if (it == obj.end()) {
      fail("missing key '" + label + "'");
      return std::nullopt;
    }
    if (!it->is_number()) {
      fail("'" + label + "' must be a number");
      return std::nullopt;
    }
    const double v = it->get<double>();
    if (!in_unit_interval(v)) {
      fail("'" + label + "' out of range [0,1]: " + it->dump());
      return std::nullopt;
    }
    return v;
  }

  std::vector<RegionAssessment> check_regions(const ojson& arr) {
    std::vector<std::optional<RegionAssessment>> slots(registry_.size());
    for (std::size_t n = 0; n < arr.size(); ++n) {
      const auto& item = arr[n];
      const std::string where = "regions[" + std::to_string(n) + "]";
      if (!item.is_object()) {
        fail(where + " must be an object");
        continue;
      }
      for (const auto& [key, _] : item.items()) {
        if (!is_known_region_key(key)) out_.warnings.push_back("unknown key '" + where + "." + key + "'");
      }
      RegionAssessment ra;
      std::optional<std::size_t> slot;
      auto rit = item.find(k::kRegion);
      if (rit == item.end() || !rit->is_string()) {
        fail(where + ": missing or non-string 'region'");
      } else {
        ra.region = rit->get<std::string>();
        slot = registry_.index_of(ra.region);
        if (!slot) {
          fail(where + ": unknown region '" + ra.region + "'");
        } else if (slots[*slot]) {
          fail(where + ": duplicate region '" + ra.region + "'");
          slot.reset();
        }
      }
      if (auto l = required_enum(item, k::kLabel, parse_severity, "normal|mild|severe", where)) {
        ra.label = *l;
      }
      if (auto c = required_fraction(item, k::kConfidence, where + "." + k::kConfidence)) {
        ra.confidence = *c;
      }

      const bool has_dir = item.contains(k::kChangeDirection);
      const bool has_flag = item.contains(k::kThresholdCrossed);
      if (visit_ == VisitKind::FollowUp) {
        ra.change_direction = required_enum(item, k::kChangeDirection, parse_change_direction,
                                            "stable|progressive_atrophy|progressive_enlargement",
                                            where);
        auto fit = item.find(k::kThresholdCrossed);
        if (fit == item.end()) {
          fail("missing key '" + where + ".threshold_crossed' (required on follow-up)");
        } else if (!fit->is_boolean()) {
          fail("'" + where + ".threshold_crossed' must be a boolean");
        } else {
          ra.threshold_crossed = fit->get<bool>();
        }
      } else {
        if (has_dir) fail(where + ": 'change_direction' not allowed on a baseline visit");
        if (has_flag) fail(where + ": 'threshold_crossed' not allowed on a baseline visit");
      }
      if (slot) slots[*slot] = std::move(ra);
    }

    std::vector<RegionAssessment> ordered;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i]) {
        fail("missing assessment for region '" + registry_[i].id + "'");
      } else {
        ordered.push_back(std::move(*slots[i]));
      }
    }
    return ordered;
  }

  VisitKind visit_;
  const Registry& registry_;
  ParseOutcome& out_;
  bool failed_ = false;
};

}  // namespace

const RegionAssessment* StructuredReport::find(std::string_view region) const {
  for (const auto& r : regions) {
    if (r.region == region) return &r;
  }
  return nullptr;
}

RegionAssessment* StructuredReport::find(std::string_view region) {
  for (auto& r : regions) {
    if (r.region == region) return &r;
  }
  return nullptr;
}

std::string StructuredReport::reasoning_text() const {
  return imaging_observations + "\n" + clinical_integration;
}

bool StructuredReport::operator==(const StructuredReport& o) const {
  return imaging_observations == o.imaging_observations &&
         clinical_integration == o.clinical_integration && regions == o.regions &&
         diagnosis == o.diagnosis && diagnosis_confidence == o.diagnosis_confidence &&
         summary == o.summary;
}

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Valid: return "valid";
    case ParseStatus::InvalidJson: return "invalid_json";
    case ParseStatus::SchemaViolation: return "schema_violation";
  }
  return "invalid_json";
}

std::optional<ParseStatus> parse_parse_status(std::string_view s) {
  if (s == "valid") return ParseStatus::Valid;
  if (s == "invalid_json") return ParseStatus::InvalidJson;
  if (s == "schema_violation") return ParseStatus::SchemaViolation;
  return std::nullopt;
}

ParseOutcome parse_raw_output(std::string_view raw, VisitKind visit, const Registry& registry) {
  ParseOutcome out;
  try {
    auto extracted = extract_object(raw);
    if (!extracted) {
      out.status = ParseStatus::InvalidJson;
      out.diagnostics.push_back("no parseable JSON object found");
      return out;
    }
    SchemaChecker checker(visit, registry, out);
    auto report = checker.check(extracted->object);
    if (!report) {
      out.status = ParseStatus::SchemaViolation;
      return out;
    }

    const std::string_view trailing = raw.substr(extracted->end);
    const auto marker = trailing.find(kSummaryMarker);
    if (marker == std::string_view::npos) {
      out.warnings.push_back("no [Diagnostic Summary] paragraph; summary is empty");
    } else {
      report->summary = std::string(text::trim(trailing.substr(marker + kSummaryMarker.size())));
    }
    out.status = ParseStatus::Valid;
    out.report = std::move(report);
  } catch (const std::exception& e) {
    out = ParseOutcome{};
    out.status = ParseStatus::InvalidJson;
    out.diagnostics.push_back(std::string("parse failure: ") + e.what());
  }
  return out;
}

ojson report_to_json(const StructuredReport& report) {
  ojson regions = ojson::array();
  for (const auto& r : report.regions) {
    ojson item;
    item[k::kRegion] = r.region;
    item[k::kLabel] = to_string(r.label);
    item[k::kConfidence] = r.confidence;
    if (r.change_direction) item[k::kChangeDirection] = to_string(*r.change_direction);
    if (r.threshold_crossed) item[k::kThresholdCrossed] = *r.threshold_crossed;
    regions.push_back(std::move(item));
  }
  ojson j;
  j[k::kObservations] = report.imaging_observations;
  j[k::kIntegration] = report.clinical_integration;
  j[k::kRegions] = std::move(regions);
  j[k::kDiagnosis] = to_string(report.diagnosis);
  j[k::kDiagnosisConfidence] = report.diagnosis_confidence;
  return j;
}

std::string serialize_report(const StructuredReport& report) {
  std::string out = report_to_json(report).dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
  out += "\n\n";
  out += kSummaryMarker;
  out += "\n";
  out += report.summary;
  out += "\n";
  return out;
}

std::string serialize_report(const StructuredReport& report, const Registry& registry) {
  StructuredReport ordered = report;
  std::stable_sort(ordered.regions.begin(), ordered.regions.end(),
                   [&](const RegionAssessment& a, const RegionAssessment& b) {
                     return registry.index_of(a.region).value_or(registry.size()) <
                            registry.index_of(b.region).value_or(registry.size());
                   });
  return serialize_report(ordered);
}

std::vector<std::string> lint_reasoning_first(const StructuredReport& report) {
  const auto& order = report.raw_key_order;
  std::vector<std::string> warnings;
  if (order.empty()) return warnings;

  std::size_t last_reasoning = 0;
  bool any_reasoning = false;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] == k::kObservations || order[i] == k::kIntegration) {
      last_reasoning = i;
      any_reasoning = true;
    }
  }
  if (!any_reasoning) return warnings;

  for (std::size_t i = 0; i < last_reasoning; ++i) {
    const auto& key = order[i];
    if (key == k::kRegions || key == k::kDiagnosis || key == k::kDiagnosisConfidence) {
      warnings.push_back("'" + key + "' appears before the reasoning fields");
    }
  }
  return warnings;
}

}  // namespace neuroverify
