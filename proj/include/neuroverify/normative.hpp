#pragma once

// Per-region normative model of ICV-normalized volume:
//
//   v = alpha + beta_age * age + beta_sex * [male] + sigma * z
//
// fitted by ordinary least squares on cognitively normal visits, and the
// mapping from z to the three-level severity scale with tolerance zones
// around each cut.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/types.hpp"

namespace neuroverify {

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnknownRegionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct Thresholds {
  double mild_cut = -0.5;
  double severe_cut = -1.5;
  double tolerance = 0.25;  // half-width of each boundary zone

  // severe_cut < mild_cut < 0, tolerance > 0, zones disjoint.
  void validate() const;

  static Thresholds from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  bool operator==(const Thresholds&) const = default;
};

// The five cut configurations used for threshold-robustness sweeps, from the
// most lenient (-0.7 / -2.0) to the strictest (-0.3 / -1.0).
std::array<Thresholds, 5> threshold_sweep();

enum class ToleranceZone { None, MildBoundary, SevereBoundary };
std::string_view to_string(ToleranceZone z);
std::optional<ToleranceZone> parse_tolerance_zone(std::string_view s);

// Zone that separates two adjacent severities; None when not adjacent.
ToleranceZone boundary_between(Severity a, Severity b);

struct VisitVolumes {
  std::string subject_id;
  std::string visit_id;
  std::optional<Diagnosis> diagnosis;
  double age = 0.0;
  Sex sex = Sex::Female;
  std::map<std::string, double> volumes;  // region id -> ICV-normalized volume
};

struct RegionCoefficients {
  double alpha = 0.0;
  double beta_age = 0.0;
  double beta_sex = 0.0;  // offset for male; female is the reference level
  double sigma = 1.0;     // residual SD, denominator n - 3
  std::size_t n_fit = 0;

  double predict(double age, Sex sex) const {
    return alpha + beta_age * age + beta_sex * (sex == Sex::Male ? 1.0 : 0.0);
  }
};

struct NormativeModel {
  std::vector<std::pair<std::string, RegionCoefficients>> regions;  // registry order
  std::string registry_hash;

  const RegionCoefficients& at(std::string_view region) const;  // throws UnknownRegionError
  bool has(std::string_view region) const;

  static NormativeModel from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct FitOptions {
  std::size_t min_fit_size = 30;
};

// OLS of v_r on (1, age, [male]) for each registry region. Rows are put in a
// canonical order first, so the result is bit-identical under any permutation
// of the input. Throws InsufficientDataError when fewer than min_fit_size rows
// are available, one sex is missing, or the design is rank-deficient.
NormativeModel fit_normative(std::span<const VisitVolumes> cohort, const Registry& registry,
                             const FitOptions& options = {});

double zscore(const NormativeModel& model, const VisitVolumes& visit, std::string_view region);

// Atrophy regions: normal if z > mild_cut, mild if severe_cut < z <= mild_cut,
// severe if z <= severe_cut. Enlargement regions apply the same rule to -z.
Severity discretize(double z, const RegionSpec& spec, const Thresholds& t);

ToleranceZone tolerance_zone(double z, const RegionSpec& spec, const Thresholds& t);

struct RegionLabel {
  std::string region;
  double z = 0.0;
  Severity severity = Severity::Normal;
  ToleranceZone zone = ToleranceZone::None;
};

std::vector<RegionLabel> label_visit(const NormativeModel& model, const VisitVolumes& visit,
                                     const Registry& registry, const Thresholds& t);

// Ground-truth change direction between two visits of one region. A label
// change always yields a progressive direction (by the sign of dz); otherwise
// |dz| <= tolerance is stable and larger moves follow the sign: falling z is
// progressive_atrophy, rising z is progressive_enlargement.
ChangeDirection derive_change_direction(double z_prior, double z_current, Severity prior,
                                        Severity current, double tolerance);

// Cohort CSV: subject_id,visit_id,diagnosis,age,sex,<region_1>,...,<region_k>
std::vector<VisitVolumes> read_cohort_csv(std::istream& in, const Registry& registry);
void write_cohort_csv(std::ostream& out, std::span<const VisitVolumes> rows,
                      const Registry& registry);

}  // namespace neuroverify
