#include "neuroverify/types.hpp"

#include <array>
#include <utility>

namespace neuroverify {
namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::array<std::pair<std::string_view, E>, N>& table,
                        std::string_view s) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, Severity>, 3> kSeverity{{
    {"normal", Severity::Normal},
    {"mild", Severity::Mild},
    {"severe", Severity::Severe},
}};

constexpr std::array<std::pair<std::string_view, Diagnosis>, 3> kDiagnosis{{
    {"CN", Diagnosis::CN},
    {"MCI", Diagnosis::MCI},
    {"Dementia", Diagnosis::Dementia},
}};

constexpr std::array<std::pair<std::string_view, ChangeDirection>, 3> kDirection{{
    {"stable", ChangeDirection::Stable},
    {"progressive_atrophy", ChangeDirection::ProgressiveAtrophy},
    {"progressive_enlargement", ChangeDirection::ProgressiveEnlargement},
}};

constexpr std::array<std::pair<std::string_view, VisitKind>, 2> kVisit{{
    {"baseline", VisitKind::Baseline},
    {"follow_up", VisitKind::FollowUp},
}};

constexpr std::array<std::pair<std::string_view, RegionDirection>, 2> kRegionDir{{
    {"atrophy", RegionDirection::Atrophy},
    {"enlargement", RegionDirection::Enlargement},
}};

constexpr std::array<std::pair<std::string_view, Sex>, 2> kSex{{
    {"female", Sex::Female},
    {"male", Sex::Male},
}};

}  // namespace

std::string_view to_string(Severity s) { return kSeverity[code(s)].first; }
std::string_view to_string(Diagnosis d) { return kDiagnosis[code(d)].first; }
std::string_view to_string(ChangeDirection c) { return kDirection[static_cast<int>(c)].first; }
std::string_view to_string(VisitKind v) { return kVisit[static_cast<int>(v)].first; }
std::string_view to_string(RegionDirection r) { return kRegionDir[static_cast<int>(r)].first; }
std::string_view to_string(Sex s) { return kSex[static_cast<int>(s)].first; }

std::optional<Severity> parse_severity(std::string_view s) { return lookup(kSeverity, s); }
std::optional<Diagnosis> parse_diagnosis(std::string_view s) { return lookup(kDiagnosis, s); }
std::optional<ChangeDirection> parse_change_direction(std::string_view s) {
  return lookup(kDirection, s);
}
std::optional<VisitKind> parse_visit_kind(std::string_view s) { return lookup(kVisit, s); }
std::optional<RegionDirection> parse_region_direction(std::string_view s) {
  return lookup(kRegionDir, s);
}

std::optional<Sex> parse_sex(std::string_view s) {
  if (auto v = lookup(kSex, s)) return v;
  // Cohort exports commonly use single-letter codes.
  if (s == "M" || s == "m") return Sex::Male;
  if (s == "F" || s == "f") return Sex::Female;
  return std::nullopt;
}

}  // namespace neuroverify
