#pragma once

// Evaluation suite over predicted reports against ground truth. Undefined
// quantities (empty strata, degenerate marginals) are std::nullopt and
// serialize as null.

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neuroverify/constraints.hpp"
#include "neuroverify/report.hpp"
#include "neuroverify/verifier.hpp"

namespace neuroverify {

struct EvalRecord {
  std::string sample_id;
  VisitKind visit_kind = VisitKind::Baseline;
  ParseStatus status = ParseStatus::Valid;
  std::optional<StructuredReport> predicted;  // present iff status == Valid
  GroundTruth truth;

  bool valid() const { return status == ParseStatus::Valid && predicted.has_value(); }
};

// Parses `raw` with the truth's visit kind.
EvalRecord make_record(std::string_view raw, const GroundTruth& truth, const Registry& registry);

// Rows: truth class, columns: predicted class (CN, MCI, Dementia).
using Confusion = std::array<std::array<long long, 3>, 3>;

struct DxMetrics {
  Confusion confusion{};
  std::size_t n_records = 0;
  std::size_t n_valid = 0;
  std::size_t n_invalid = 0;
  std::optional<double> accuracy;  // invalid predictions count as errors
  std::optional<double> macro_f1;  // valid predictions only
  std::array<std::optional<double>, 3> per_class_f1{};
  long long adjacent_errors = 0;
  long long non_adjacent_errors = 0;
  std::vector<std::string> notes;
};

DxMetrics confusion_and_dx(std::span<const EvalRecord> records);

// Accuracy and macro F1 straight from a confusion matrix (all entries valid).
std::optional<double> accuracy_of(const Confusion& m);
std::optional<double> macro_f1_of(const Confusion& m, std::vector<std::string>* notes = nullptr);

enum class KappaWeighting { Linear, Quadratic };

// 1 - sum(w*O) / sum(w*E) with disagreement weights |i-j|/2 or (i-j)^2/4 and E
// from the marginal products. Undefined when the expected disagreement is 0.
std::optional<double> weighted_kappa(const Confusion& m, KappaWeighting weighting);

// Records with true MCI dropped, predicted MCI mapped to CN.
std::optional<double> binary_adcn(std::span<const EvalRecord> records);

struct RegionMetrics {
  std::vector<std::string> regions;
  std::vector<std::optional<double>> accuracy;  // per region
  std::vector<std::optional<double>> kappa;     // per region, quadratic
  std::optional<double> mean_region_accuracy;
  std::array<std::optional<double>, 3> per_severity_accuracy{};  // pooled over regions
  std::optional<double> false_abnormal;  // P(pred abnormal | truth normal)
  std::optional<double> false_severe;    // P(pred severe | truth normal)
};

RegionMetrics region_metrics(std::span<const EvalRecord> records, const Registry& registry);

struct CalibrationSample {
  double confidence = 0.0;
  bool correct = false;
};

// Equal-width bins on [0, 1]; a confidence of exactly 1 falls in the last bin.
std::optional<double> expected_calibration_error(std::span<const CalibrationSample> samples,
                                                 int bins = 10);

// Diagnostic ECE over valid records using diagnosis_confidence.
std::optional<double> ece(std::span<const EvalRecord> records, int bins = 10);

// Micro-averaged F1 of "region mentioned in reasoning" against the report's
// own abnormal labels. Records with neither abnormal labels nor mentions are
// skipped.
std::optional<double> reasoning_f1(std::span<const EvalRecord> records, const SynonymTable& synonyms);

// Fraction of follow-up regions whose predicted change_direction matches the
// truth direction.
std::optional<double> longitudinal_direction_accuracy(std::span<const EvalRecord> records);

struct MetricsReport {
  std::size_t n_records = 0;
  std::map<ParseStatus, std::size_t> status_counts;
  std::optional<double> json_validity;
  DxMetrics dx;
  std::optional<double> kappa_linear;
  std::optional<double> kappa_quadratic;
  std::optional<double> binary_adcn_accuracy;
  RegionMetrics regions;
  std::optional<double> ece;
  std::optional<double> reasoning_f1;
  std::optional<double> longitudinal_direction_accuracy;

  nlohmann::json to_json() const;
};

MetricsReport evaluate(std::span<const EvalRecord> records, const Registry& registry,
                       const SynonymTable& synonyms, int ece_bins = 10);

void write_confusion_csv(std::ostream& out, const Confusion& m);

}  // namespace neuroverify
