#pragma once

// Ordinal vocabularies shared by every module, plus the error types used
// across the library. Wire names are lower-case snake_case except for the
// diagnosis codes, which keep their clinical spelling.

#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace neuroverify {

// Ordered normal < mild < severe. The numeric code is the ordinal distance.
enum class Severity : std::uint8_t { Normal = 0, Mild = 1, Severe = 2 };

// Ordered CN < MCI < Dementia.
enum class Diagnosis : std::uint8_t { CN = 0, MCI = 1, Dementia = 2 };

enum class ChangeDirection : std::uint8_t {
  Stable = 0,
  ProgressiveAtrophy = 1,
  ProgressiveEnlargement = 2,
};

enum class VisitKind : std::uint8_t { Baseline = 0, FollowUp = 1 };

// Which way a region deteriorates. Enlargement regions mirror the z axis.
enum class RegionDirection : std::uint8_t { Atrophy = 0, Enlargement = 1 };

enum class Sex : std::uint8_t { Female = 0, Male = 1 };

inline constexpr int code(Severity s) { return static_cast<int>(s); }
inline constexpr int code(Diagnosis d) { return static_cast<int>(d); }

inline int ordinal_distance(Diagnosis a, Diagnosis b) { return std::abs(code(a) - code(b)); }
inline int ordinal_distance(Severity a, Severity b) { return std::abs(code(a) - code(b)); }

inline bool is_abnormal(Severity s) { return s != Severity::Normal; }

std::string_view to_string(Severity s);
std::string_view to_string(Diagnosis d);
std::string_view to_string(ChangeDirection c);
std::string_view to_string(VisitKind v);
std::string_view to_string(RegionDirection r);
std::string_view to_string(Sex s);

std::optional<Severity> parse_severity(std::string_view s);
std::optional<Diagnosis> parse_diagnosis(std::string_view s);
std::optional<ChangeDirection> parse_change_direction(std::string_view s);
std::optional<VisitKind> parse_visit_kind(std::string_view s);
std::optional<RegionDirection> parse_region_direction(std::string_view s);
std::optional<Sex> parse_sex(std::string_view s);

// The progressive direction that corresponds to worsening in a region.
inline ChangeDirection worsening_direction(RegionDirection r) {
  return r == RegionDirection::Atrophy ? ChangeDirection::ProgressiveAtrophy
                                       : ChangeDirection::ProgressiveEnlargement;
}

// Bad input content: schema violations, inconsistent configs, degenerate data.
// The CLI maps it to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system and stream failures. CLI exit code 1.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace neuroverify
