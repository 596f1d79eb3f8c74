#include "neuroverify/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace neuroverify {

EvalRecord make_record(std::string_view raw, const GroundTruth& truth, const Registry& registry) {
  auto parsed = parse_raw_output(raw, truth.visit_kind, registry);
  EvalRecord r;
  r.sample_id = truth.sample_id;
  r.visit_kind = truth.visit_kind;
  r.status = parsed.status;
  r.predicted = std::move(parsed.report);
  r.truth = truth;
  return r;
}

namespace {
std::optional<double> ratio(long long num, long long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

std::optional<double> accuracy_of(const Confusion& m) {
  long long total = 0, diag = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) total += m[i][j];
    diag += m[i][i];
  }
  return ratio(diag, total);
}

std::optional<double> macro_f1_of(const Confusion& m, std::vector<std::string>* notes) {
  double sum = 0.0;
  int classes = 0;
  for (int c = 0; c < 3; ++c) {
    long long tp = m[c][c], fn = 0, fp = 0;
    for (int k = 0; k < 3; ++k) {
      if (k == c) continue;
      fn += m[c][k];
      fp += m[k][c];
    }
    if (tp + fn + fp == 0) {
      if (notes) {
        notes->push_back("class " + std::string(to_string(static_cast<Diagnosis>(c))) +
                         " absent from truth and predictions; skipped in macro F1");
      }
      continue;
    }
    sum += 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
    ++classes;
  }
  if (classes == 0) return std::nullopt;
  return sum / classes;
}

DxMetrics confusion_and_dx(std::span<const EvalRecord> records) {
  DxMetrics out;
  out.n_records = records.size();
  long long correct = 0;
  for (const auto& r : records) {
    if (!r.valid()) {
      ++out.n_invalid;
      continue;
    }
    ++out.n_valid;
    const int t = code(r.truth.diagnosis);
    const int p = code(r.predicted->diagnosis);
    ++out.confusion[t][p];
    if (t == p) {
      ++correct;
    } else if (std::abs(t - p) == 1) {
      ++out.adjacent_errors;
    } else {
      ++out.non_adjacent_errors;
    }
  }
  out.accuracy = ratio(correct, static_cast<long long>(out.n_records));
  out.macro_f1 = macro_f1_of(out.confusion, &out.notes);
  for (int c = 0; c < 3; ++c) {
    long long tp = out.confusion[c][c], rest = 0;
    for (int k = 0; k < 3; ++k) {
      if (k != c) rest += out.confusion[c][k] + out.confusion[k][c];
    }
    if (tp + rest > 0) out.per_class_f1[c] = 2.0 * tp / static_cast<double>(2 * tp + rest);
  }
  return out;
}

std::optional<double> weighted_kappa(const Confusion& m, KappaWeighting weighting) {
  std::array<double, 3> rows{}, cols{};
  double n = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      rows[i] += m[i][j];
      cols[j] += m[i][j];
      n += m[i][j];
    }
  }
  if (n == 0.0) return std::nullopt;
  double observed = 0.0, expected = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double d = i - j;
      const double w = weighting == KappaWeighting::Linear ? std::abs(d) / 2.0 : d * d / 4.0;
      observed += w * m[i][j];
      expected += w * rows[i] * cols[j] / n;
    }
  }
  if (expected == 0.0) return std::nullopt;
  return 1.0 - observed / expected;
}

std::optional<double> binary_adcn(std::span<const EvalRecord> records) {
  long long total = 0, correct = 0;
  for (const auto& r : records) {
    if (r.truth.diagnosis == Diagnosis::MCI) continue;
    ++total;
    if (!r.valid()) continue;
    Diagnosis p = r.predicted->diagnosis;
    if (p == Diagnosis::MCI) p = Diagnosis::CN;
    if (p == r.truth.diagnosis) ++correct;
  }
  return ratio(correct, total);
}

RegionMetrics region_metrics(std::span<const EvalRecord> records, const Registry& registry) {
  RegionMetrics out;
  std::array<long long, 3> stratum_total{}, stratum_correct{};
  long long truth_normal = 0, false_abnormal = 0, false_severe = 0;
  double acc_sum = 0.0;
  int acc_count = 0;

  for (const auto& spec : registry.regions()) {
    Confusion m{};
    for (const auto& r : records) {
      if (!r.valid()) continue;
      const auto* pred = r.predicted->find(spec.id);
      const auto* tr = r.truth.find(spec.id);
      if (!pred || !tr) continue;
      const int t = code(tr->label);
      const int p = code(pred->label);
      ++m[t][p];
      ++stratum_total[t];
      if (t == p) ++stratum_correct[t];
      if (tr->label == Severity::Normal) {
        ++truth_normal;
        if (is_abnormal(pred->label)) ++false_abnormal;
        if (pred->label == Severity::Severe) ++false_severe;
      }
    }
    out.regions.push_back(spec.id);
    const auto acc = accuracy_of(m);
    out.accuracy.push_back(acc);
    out.kappa.push_back(weighted_kappa(m, KappaWeighting::Quadratic));
    if (acc) {
      acc_sum += *acc;
      ++acc_count;
    }
  }
  if (acc_count > 0) out.mean_region_accuracy = acc_sum / acc_count;
  for (int s = 0; s < 3; ++s) out.per_severity_accuracy[s] = ratio(stratum_correct[s], stratum_total[s]);
  out.false_abnormal = ratio(false_abnormal, truth_normal);
  out.false_severe = ratio(false_severe, truth_normal);
  return out;
}

std::optional<double> expected_calibration_error(std::span<const CalibrationSample> samples,
                                                 int bins) {
  if (bins < 1) throw ValidationError("ECE needs at least one bin");
  if (samples.empty()) return std::nullopt;
  std::vector<double> conf_sum(bins, 0.0), correct_sum(bins, 0.0);
  std::vector<long long> count(bins, 0);
  for (const auto& s : samples) {
    const double c = std::clamp(s.confidence, 0.0, 1.0);
    const int b = std::min(static_cast<int>(c * bins), bins - 1);
    conf_sum[b] += c;
    correct_sum[b] += s.correct ? 1.0 : 0.0;
    ++count[b];
  }
  const double n = static_cast<double>(samples.size());
  double ece = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double nb = static_cast<double>(count[b]);
    ece += (nb / n) * std::abs(correct_sum[b] / nb - conf_sum[b] / nb);
  }
  return ece;
}

std::optional<double> ece(std::span<const EvalRecord> records, int bins) {
  std::vector<CalibrationSample> samples;
  for (const auto& r : records) {
    if (!r.valid()) continue;
    samples.push_back({r.predicted->diagnosis_confidence, r.predicted->diagnosis == r.truth.diagnosis});
  }
  return expected_calibration_error(samples, bins);
}

std::optional<double> reasoning_f1(std::span<const EvalRecord> records, const SynonymTable& synonyms) {
  long long tp = 0, fp = 0, fn = 0;
  for (const auto& r : records) {
    if (!r.valid()) continue;
    const std::string reasoning = r.predicted->reasoning_text();
    for (const auto& region : r.predicted->regions) {
      const bool positive = is_abnormal(region.label);
      const bool mentioned = synonyms.mentioned(reasoning, region.region);
      if (positive && mentioned) ++tp;
      if (!positive && mentioned) ++fp;
      if (positive && !mentioned) ++fn;
    }
  }
  if (tp + fp + fn == 0) return std::nullopt;
  return 2.0 * tp / static_cast<double>(2 * tp + fp + fn);
}

std::optional<double> longitudinal_direction_accuracy(std::span<const EvalRecord> records) {
  long long total = 0, correct = 0;
  for (const auto& r : records) {
    if (r.visit_kind != VisitKind::FollowUp || !r.valid()) continue;
    for (const auto& tr : r.truth.regions) {
      if (!tr.change_direction) continue;
      const auto* pred = r.predicted->find(tr.region);
      ++total;
      if (pred && pred->change_direction == tr.change_direction) ++correct;
    }
  }
  return ratio(correct, total);
}

MetricsReport evaluate(std::span<const EvalRecord> records, const Registry& registry,
                       const SynonymTable& synonyms, int ece_bins) {
  MetricsReport out;
  out.n_records = records.size();
  for (auto s : {ParseStatus::Valid, ParseStatus::InvalidJson, ParseStatus::SchemaViolation}) {
    out.status_counts[s] = 0;
  }
  for (const auto& r : records) ++out.status_counts[r.status];
  out.json_validity = ratio(static_cast<long long>(out.status_counts[ParseStatus::Valid]),
                            static_cast<long long>(records.size()));
  out.dx = confusion_and_dx(records);
  out.kappa_linear = weighted_kappa(out.dx.confusion, KappaWeighting::Linear);
  out.kappa_quadratic = weighted_kappa(out.dx.confusion, KappaWeighting::Quadratic);
  out.binary_adcn_accuracy = binary_adcn(records);
  out.regions = region_metrics(records, registry);
  out.ece = ece(records, ece_bins);
  out.reasoning_f1 = reasoning_f1(records, synonyms);
  out.longitudinal_direction_accuracy = longitudinal_direction_accuracy(records);
  return out;
}

nlohmann::json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [s, n] : status_counts) counts[std::string(to_string(s))] = n;

  nlohmann::json confusion = nlohmann::json::array();
  for (const auto& row : dx.confusion) confusion.push_back(row);

  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < 3; ++c) {
    per_class[std::string(to_string(static_cast<Diagnosis>(c)))] = opt(dx.per_class_f1[c]);
  }

  nlohmann::json per_region = nlohmann::json::array();
  for (std::size_t i = 0; i < regions.regions.size(); ++i) {
    per_region.push_back({{"region", regions.regions[i]},
                          {"accuracy", opt(regions.accuracy[i])},
                          {"kappa_quadratic", opt(regions.kappa[i])}});
  }
  nlohmann::json per_severity = nlohmann::json::object();
  for (int s = 0; s < 3; ++s) {
    per_severity[std::string(to_string(static_cast<Severity>(s)))] =
        opt(regions.per_severity_accuracy[s]);
  }

  return {
      {"n_records", n_records},
      {"status_counts", counts},
      {"json_validity", opt(json_validity)},
      {"diagnosis",
       {{"accuracy", opt(dx.accuracy)},
        {"macro_f1", opt(dx.macro_f1)},
        {"per_class_f1", per_class},
        {"kappa_linear", opt(kappa_linear)},
        {"kappa_quadratic", opt(kappa_quadratic)},
        {"confusion", confusion},
        {"confusion_axes", "rows=truth, cols=predicted, order CN,MCI,Dementia"},
        {"n_valid", dx.n_valid},
        {"n_invalid", dx.n_invalid},
        {"adjacent_errors", dx.adjacent_errors},
        {"non_adjacent_errors", dx.non_adjacent_errors},
        {"binary_adcn_accuracy", opt(binary_adcn_accuracy)},
        {"ece", opt(ece)},
        {"notes", dx.notes}}},
      {"regions",
       {{"per_region", per_region},
        {"mean_region_accuracy", opt(regions.mean_region_accuracy)},
        {"per_severity_accuracy", per_severity},
        {"false_abnormal_rate", opt(regions.false_abnormal)},
        {"false_severe_rate", opt(regions.false_severe)}}},
      {"reasoning_f1", opt(reasoning_f1)},
      {"longitudinal_direction_accuracy", opt(longitudinal_direction_accuracy)},
  };
}

void write_confusion_csv(std::ostream& out, const Confusion& m) {
  out << "truth,CN,MCI,Dementia\n";
  for (int i = 0; i < 3; ++i) {
    out << to_string(static_cast<Diagnosis>(i));
    for (int j = 0; j < 3; ++j) out << ',' << m[i][j];
    out << '\n';
  }
}

}  // namespace neuroverify
