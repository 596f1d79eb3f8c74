#pragma once

// Synthetic cohorts, ground truths, clean reports and corrupted candidates.
//
// Random numbers come from std::mt19937_64, whose output sequence is fixed by
// the standard. Conversions are done here rather than with <random>
// distributions (which are implementation-defined):
//   uniform01  = (next >> 11) * 2^-53
//   normal     = Box-Muller on two uniform01 draws, cosine branch only
//   index(n)   = floor(uniform01 * n)

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroverify/normative.hpp"
#include "neuroverify/preference.hpp"
#include "neuroverify/registry.hpp"
#include "neuroverify/report.hpp"
#include "neuroverify/verifier.hpp"

namespace neuroverify {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

struct TrueRegionParams {
  std::string region;
  double alpha = 0.0;
  double beta_age = 0.0;
  double beta_sex = 0.0;
  double sigma = 1.0;
};

// Offsets and per-visit drift in severity units (negative is worse for every
// region; enlargement regions get z = -severity).
struct ClassTrajectory {
  std::map<std::string, double> offset;
  std::map<std::string, double> drift;
};

struct CohortSpec {
  Registry registry = Registry::defaults();
  std::vector<TrueRegionParams> regions;  // registry order
  double age_min = 55.0;
  double age_max = 90.0;
  double male_fraction = 0.5;
  std::map<Diagnosis, double> mixture{
      {Diagnosis::CN, 0.38}, {Diagnosis::MCI, 0.48}, {Diagnosis::Dementia, 0.14}};
  std::map<Diagnosis, ClassTrajectory> trajectories;
  double subject_noise = 1.0;  // per-subject, per-region z deviation
  double visit_noise = 0.0;    // per-visit z jitter
  double visit_interval = 1.0; // years between visits
  Thresholds thresholds;

  static CohortSpec defaults();
  // Keys absent from `j` keep default values.
  static CohortSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  // The generating parameters as a normative model.
  NormativeModel true_model() const;
};

struct SynthCohort {
  std::vector<VisitVolumes> rows;
  std::vector<GroundTruth> truths;  // one per row, same order
};

// Subjects S0001.., visits V0..; sample ids "<subject>_<visit>".
SynthCohort gen_cohort(const CohortSpec& spec, std::size_t n_subjects,
                       std::size_t visits_per_subject, std::uint64_t seed);

// Ground truth for every row of a cohort, from a normative model. Visits of a
// subject are ordered by visit order in `rows`; the first is the baseline.
std::vector<GroundTruth> derive_truths(std::span<const VisitVolumes> rows,
                                       const NormativeModel& model, const Registry& registry,
                                       const Thresholds& thresholds);

std::string sample_id_of(const VisitVolumes& v);

// A report that scores exactly 1.0 against `truth` under `cfg`.
StructuredReport gen_clean_report_model(const GroundTruth& truth, const VerifierConfig& cfg,
                                        std::uint64_t seed);
std::string gen_clean_report(const GroundTruth& truth, const VerifierConfig& cfg,
                             std::uint64_t seed);

enum class ErrorType {
  AdjacentLabelFlip,
  TwoLevelLabelFlip,
  DxAdjacent,
  DxNonAdjacent,
  OmitMention,
  ImpossibleReversal,
  FlagDirectionMismatch,
  SummaryContradiction,
  ConfidenceJitter,
};

inline constexpr std::array<ErrorType, 9> kAllErrorTypes{
    ErrorType::AdjacentLabelFlip,    ErrorType::TwoLevelLabelFlip, ErrorType::DxAdjacent,
    ErrorType::DxNonAdjacent,        ErrorType::OmitMention,       ErrorType::ImpossibleReversal,
    ErrorType::FlagDirectionMismatch, ErrorType::SummaryContradiction,
    ErrorType::ConfidenceJitter};

std::string_view to_string(ErrorType e);
std::optional<ErrorType> parse_error_type(std::string_view s);

// Probability of attempting each corruption; absent types are 0.
struct ErrorSpec {
  std::map<ErrorType, double> probability;

  static ErrorSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct AppliedCorruption {
  ErrorType type;
  std::string region;  // empty for report-level corruptions
  std::string detail;
};

struct SkippedCorruption {
  ErrorType type;
  std::string reason;
};

struct InjectionManifest {
  std::vector<AppliedCorruption> applied;
  std::vector<SkippedCorruption> skipped;

  bool has(ErrorType t) const;
  nlohmann::json to_json() const;
};

struct InjectionResult {
  std::string raw;
  InjectionManifest manifest;
};

// Applies one corruption in place. Regions already in `touched` are not
// chosen again; the corrupted region is added. Returns nullopt (report
// untouched) when the corruption does not apply to this report and truth.
std::optional<AppliedCorruption> apply_corruption(StructuredReport& report, ErrorType type,
                                                  const GroundTruth& truth,
                                                  const VerifierConfig& cfg, Rng& rng,
                                                  std::set<std::string>& touched);

// Each type is attempted with its probability, in kAllErrorTypes order.
// An empty spec returns `clean` unchanged.
InjectionResult inject_errors(std::string_view clean, const ErrorSpec& spec,
                              const GroundTruth& truth, const VerifierConfig& cfg,
                              std::uint64_t seed);

// How corrupted candidates are built.
//   independent  each candidate draws corruptions from the error spec; when
//                nothing applied, one applicable type with nonzero
//                probability is forced
//   nested       candidate j carries the corruptions of candidate j-1 plus one
//                more, drawn in order from `nested_order`
enum class PoolMode { Independent, Nested };

struct PoolSpec {
  std::size_t k = 4;
  PoolMode mode = PoolMode::Independent;
  ErrorSpec errors;
  std::vector<ErrorType> nested_order{ErrorType::TwoLevelLabelFlip, ErrorType::AdjacentLabelFlip,
                                      ErrorType::DxAdjacent, ErrorType::SummaryContradiction,
                                      ErrorType::ConfidenceJitter};
  bool shuffle = true;

  static PoolSpec defaults();
  static PoolSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct GeneratedPool {
  CandidatePool pool;
  std::size_t clean_index = 0;
  std::vector<InjectionManifest> manifests;  // per candidate; empty for the clean one

  nlohmann::json manifest_json() const;
};

// Candidate 0 is clean before shuffling. gt_text is the clean report.
GeneratedPool gen_pool(const GroundTruth& truth, const PoolSpec& spec, const VerifierConfig& cfg,
                       std::uint64_t seed);

}  // namespace neuroverify
