#include "neuroverify/normative.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <tuple>

#include "neuroverify/text.hpp"

namespace neuroverify {

void Thresholds::validate() const {
  if (!(severe_cut < mild_cut && mild_cut < 0.0)) {
    throw ValidationError("thresholds: require severe_cut < mild_cut < 0");
  }
  if (!(tolerance > 0.0)) throw ValidationError("thresholds: tolerance must be > 0");
  if (!(mild_cut - severe_cut > 2.0 * tolerance)) {
    throw ValidationError("thresholds: tolerance zones around the two cuts overlap");
  }
}

Thresholds Thresholds::from_json(const nlohmann::json& j) {
  Thresholds t;
  t.mild_cut = j.value("mild_cut", t.mild_cut);
  t.severe_cut = j.value("severe_cut", t.severe_cut);
  t.tolerance = j.value("tolerance", t.tolerance);
  t.validate();
  return t;
}

nlohmann::json Thresholds::to_json() const {
  return {{"mild_cut", mild_cut}, {"severe_cut", severe_cut}, {"tolerance", tolerance}};
}

std::array<Thresholds, 5> threshold_sweep() {
  return {{
      {-0.7, -2.0, 0.25},
      {-0.6, -1.75, 0.25},
      {-0.5, -1.5, 0.25},
      {-0.4, -1.25, 0.25},
      {-0.3, -1.0, 0.25},
  }};
}

std::string_view to_string(ToleranceZone z) {
  switch (z) {
    case ToleranceZone::None: return "none";
    case ToleranceZone::MildBoundary: return "mild_boundary";
    case ToleranceZone::SevereBoundary: return "severe_boundary";
  }
  return "none";
}

std::optional<ToleranceZone> parse_tolerance_zone(std::string_view s) {
  if (s == "none") return ToleranceZone::None;
  if (s == "mild_boundary") return ToleranceZone::MildBoundary;
  if (s == "severe_boundary") return ToleranceZone::SevereBoundary;
  return std::nullopt;
}

ToleranceZone boundary_between(Severity a, Severity b) {
  if (ordinal_distance(a, b) != 1) return ToleranceZone::None;
  return std::max(code(a), code(b)) == 1 ? ToleranceZone::MildBoundary
                                         : ToleranceZone::SevereBoundary;
}

const RegionCoefficients& NormativeModel::at(std::string_view region) const {
  for (const auto& [id, c] : regions) {
    if (id == region) return c;
  }
  throw UnknownRegionError("normative model has no region '" + std::string(region) + "'");
}

bool NormativeModel::has(std::string_view region) const {
  return std::any_of(regions.begin(), regions.end(),
                     [&](const auto& p) { return p.first == region; });
}

NormativeModel NormativeModel::from_json(const nlohmann::json& j) {
  NormativeModel m;
  m.registry_hash = j.value("registry_hash", std::string{});
  for (const auto& item : j.at("regions")) {
    RegionCoefficients c;
    c.alpha = item.at("alpha").get<double>();
    c.beta_age = item.at("beta_age").get<double>();
    c.beta_sex = item.at("beta_sex").get<double>();
    c.sigma = item.at("sigma").get<double>();
    c.n_fit = item.value("n_fit", std::size_t{0});
    m.regions.emplace_back(item.at("region").get<std::string>(), c);
  }
  return m;
}

nlohmann::json NormativeModel::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [id, c] : regions) {
    arr.push_back({{"region", id},
                   {"alpha", c.alpha},
                   {"beta_age", c.beta_age},
                   {"beta_sex", c.beta_sex},
                   {"sigma", c.sigma},
                   {"n_fit", c.n_fit}});
  }
  return {{"registry_hash", registry_hash}, {"regions", arr}};
}

NormativeModel fit_normative(std::span<const VisitVolumes> cohort, const Registry& registry,
                             const FitOptions& options) {
  // Canonical row order makes the floating-point reduction order independent
  // of how the caller happened to sort the cohort.
  std::vector<const VisitVolumes*> rows;
  rows.reserve(cohort.size());
  for (const auto& v : cohort) rows.push_back(&v);
  std::sort(rows.begin(), rows.end(), [](const VisitVolumes* a, const VisitVolumes* b) {
    return std::tie(a->subject_id, a->visit_id, a->age, a->sex, a->volumes) <
           std::tie(b->subject_id, b->visit_id, b->age, b->sex, b->volumes);
  });

  NormativeModel model;
  model.registry_hash = registry.hash();

  for (const auto& spec : registry.regions()) {
    std::vector<const VisitVolumes*> used;
    for (const auto* r : rows) {
      if (r->volumes.count(spec.id)) used.push_back(r);
    }
    const auto n = used.size();
    if (n < options.min_fit_size || n < 4) {
      throw InsufficientDataError("fit '" + spec.id + "': " + std::to_string(n) +
                                  " rows, need at least " +
                                  std::to_string(std::max<std::size_t>(options.min_fit_size, 4)));
    }
    const bool has_male = std::any_of(used.begin(), used.end(),
                                      [](const VisitVolumes* r) { return r->sex == Sex::Male; });
    const bool has_female = std::any_of(used.begin(), used.end(),
                                        [](const VisitVolumes* r) { return r->sex == Sex::Female; });
    if (!has_male || !has_female) {
      throw InsufficientDataError("fit '" + spec.id + "': both sexes must be represented");
    }

    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = used[i]->age;
      X(i, 2) = used[i]->sex == Sex::Male ? 1.0 : 0.0;
      y(i) = used[i]->volumes.at(spec.id);
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < 3) {
      throw InsufficientDataError("fit '" + spec.id + "': design matrix is rank-deficient");
    }
    const Eigen::Vector3d beta = qr.solve(y);
    const double rss = (y - X * beta).squaredNorm();

    RegionCoefficients c;
    c.alpha = beta(0);
    c.beta_age = beta(1);
    c.beta_sex = beta(2);
    c.sigma = std::sqrt(rss / static_cast<double>(n - 3));
    c.n_fit = n;
    model.regions.emplace_back(spec.id, c);
  }
  return model;
}

double zscore(const NormativeModel& model, const VisitVolumes& visit, std::string_view region) {
  const auto& c = model.at(region);
  auto it = visit.volumes.find(std::string(region));
  if (it == visit.volumes.end()) {
    throw UnknownRegionError("visit '" + visit.visit_id + "' has no volume for '" +
                             std::string(region) + "'");
  }
  if (!(c.sigma > 0.0)) {
    throw ValidationError("normative model for '" + std::string(region) +
                          "' has non-positive sigma");
  }
  return (it->second - c.predict(visit.age, visit.sex)) / c.sigma;
}

namespace {
double oriented(double z, const RegionSpec& spec) {
  return spec.direction == RegionDirection::Atrophy ? z : -z;
}
}  // namespace

Severity discretize(double z, const RegionSpec& spec, const Thresholds& t) {
  const double s = oriented(z, spec);
  if (s > t.mild_cut) return Severity::Normal;
  if (s > t.severe_cut) return Severity::Mild;
  return Severity::Severe;
}

ToleranceZone tolerance_zone(double z, const RegionSpec& spec, const Thresholds& t) {
  const double s = oriented(z, spec);
  if (std::abs(s - t.mild_cut) <= t.tolerance) return ToleranceZone::MildBoundary;
  if (std::abs(s - t.severe_cut) <= t.tolerance) return ToleranceZone::SevereBoundary;
  return ToleranceZone::None;
}

std::vector<RegionLabel> label_visit(const NormativeModel& model, const VisitVolumes& visit,
                                     const Registry& registry, const Thresholds& t) {
  std::vector<RegionLabel> out;
  out.reserve(registry.size());
  for (const auto& spec : registry.regions()) {
    RegionLabel l;
    l.region = spec.id;
    l.z = zscore(model, visit, spec.id);
    l.severity = discretize(l.z, spec, t);
    l.zone = tolerance_zone(l.z, spec, t);
    out.push_back(std::move(l));
  }
  return out;
}

ChangeDirection derive_change_direction(double z_prior, double z_current, Severity prior,
                                        Severity current, double tolerance) {
  const double dz = z_current - z_prior;
  if (prior == current && std::abs(dz) <= tolerance) return ChangeDirection::Stable;
  if (dz == 0.0) return ChangeDirection::Stable;
  return dz < 0.0 ? ChangeDirection::ProgressiveAtrophy : ChangeDirection::ProgressiveEnlargement;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.emplace_back(text::trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("cohort CSV: bad number '" + s + "' for " + what);
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<VisitVolumes> read_cohort_csv(std::istream& in, const Registry& registry) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("cohort CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("cohort CSV: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto c_subject = column("subject_id");
  const auto c_visit = column("visit_id");
  const auto c_dx = column("diagnosis");
  const auto c_age = column("age");
  const auto c_sex = column("sex");
  std::vector<std::size_t> c_regions;
  for (const auto& r : registry.regions()) c_regions.push_back(column(r.id));

  std::vector<VisitVolumes> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("cohort CSV line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
    }
    VisitVolumes v;
    v.subject_id = cells[c_subject];
    v.visit_id = cells[c_visit];
    if (!cells[c_dx].empty()) {
      v.diagnosis = parse_diagnosis(cells[c_dx]);
      if (!v.diagnosis) {
        throw ValidationError("cohort CSV line " + std::to_string(line_no) +
                              ": bad diagnosis '" + cells[c_dx] + "'");
      }
    }
    v.age = parse_double(cells[c_age], "age");
    if (!(v.age > 0.0)) throw ValidationError("cohort CSV line " + std::to_string(line_no) + ": age must be > 0");
    auto sex = parse_sex(cells[c_sex]);
    if (!sex) throw ValidationError("cohort CSV line " + std::to_string(line_no) + ": bad sex '" + cells[c_sex] + "'");
    v.sex = *sex;
    for (std::size_t i = 0; i < c_regions.size(); ++i) {
      const double vol = parse_double(cells[c_regions[i]], registry[i].id);
      if (!(vol > 0.0)) {
        throw ValidationError("cohort CSV line " + std::to_string(line_no) + ": volume of '" +
                              registry[i].id + "' must be > 0");
      }
      v.volumes[registry[i].id] = vol;
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

void write_cohort_csv(std::ostream& out, std::span<const VisitVolumes> rows,
                      const Registry& registry) {
  out << "subject_id,visit_id,diagnosis,age,sex";
  for (const auto& r : registry.regions()) out << ',' << r.id;
  out << '\n';
  for (const auto& v : rows) {
    out << v.subject_id << ',' << v.visit_id << ','
        << (v.diagnosis ? std::string(to_string(*v.diagnosis)) : std::string{}) << ','
        << format_double(v.age) << ',' << to_string(v.sex);
    for (const auto& r : registry.regions()) out << ',' << format_double(v.volumes.at(r.id));
    out << '\n';
  }
}

}  // namespace neuroverify
