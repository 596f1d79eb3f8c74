// Command-line entry point. Data goes to files or stdout ("-"), diagnostics to
// stderr. Exit codes: 0 success, 2 validation error, 1 I/O error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "neuroverify/config.hpp"
#include "neuroverify/metrics.hpp"
#include "neuroverify/normative.hpp"
#include "neuroverify/preference.hpp"
#include "neuroverify/synth.hpp"
#include "neuroverify/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neuroverify;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// I/O

class Input {
 public:
  explicit Input(const std::string& path) : path_(path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*file_) throw IoError("cannot open " + path);
  }
  std::istream& stream() { return file_ ? *file_ : std::cin; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::unique_ptr<std::ifstream> file_;
};

class Output {
 public:
  explicit Output(const std::string& path) : path_(path) {
    if (path == "-") return;
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw IoError("cannot write " + path);
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }
  void finish() {
    stream().flush();
    if (!stream()) throw IoError("write failed: " + path_);
  }

 private:
  std::string path_;
  std::unique_ptr<std::ofstream> file_;
};

std::string slurp(const std::string& path) {
  Input in(path);
  std::stringstream ss;
  ss << in.stream().rdbuf();
  return ss.str();
}

json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

json read_json_path(const std::string& path) { return parse_json_text(slurp(path), path); }

// Reads JSONL lines in chunks, maps each through `fn` (concurrently when
// jobs > 1) and writes results in input order.
void map_jsonl(std::istream& in, std::ostream& out, const std::string& where, unsigned jobs,
               const std::function<std::string(const json&, std::size_t)>& fn) {
  constexpr std::size_t kChunk = 512;
  std::size_t line_no = 0;
  std::string line;
  bool eof = false;
  while (!eof) {
    std::vector<std::pair<std::size_t, std::string>> chunk;
    while (chunk.size() < kChunk) {
      if (!std::getline(in, line)) {
        eof = true;
        break;
      }
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      chunk.emplace_back(line_no, line);
    }
    std::vector<std::string> results(chunk.size());
    std::vector<std::exception_ptr> errors(chunk.size());
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t i = begin; i < chunk.size(); i += step) {
        try {
          const auto& [no, text] = chunk[i];
          results[i] = fn(parse_json_text(text, where + ":" + std::to_string(no)), no);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(chunk.size())));
    if (n <= 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> threads;
      for (unsigned t = 0; t < n; ++t) threads.emplace_back(work, t, n);
      for (auto& t : threads) t.join();
    }
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (errors[i]) {
        try {
          std::rethrow_exception(errors[i]);
        } catch (const ValidationError& e) {
          throw ValidationError(where + ":" + std::to_string(chunk[i].first) + ": " + e.what());
        } catch (const json::exception& e) {
          throw ValidationError(where + ":" + std::to_string(chunk[i].first) + ": " + e.what());
        }
      }
      out << results[i] << '\n';
    }
  }
  if (in.bad()) throw IoError("read failed: " + where);
}

std::vector<json> read_jsonl(const std::string& path) {
  Input in(path);
  std::vector<json> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in.stream(), line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.push_back(parse_json_text(line, path + ":" + std::to_string(no)));
  }
  if (in.stream().bad()) throw IoError("read failed: " + path);
  return out;
}

std::map<std::string, GroundTruth> read_truths(const std::string& path) {
  std::map<std::string, GroundTruth> out;
  for (const auto& j : read_jsonl(path)) {
    auto t = GroundTruth::from_json(j);
    if (!out.emplace(t.sample_id, t).second) {
      throw ValidationError(path + ": duplicate sample_id '" + t.sample_id + "'");
    }
  }
  return out;
}

const GroundTruth& truth_for(const std::map<std::string, GroundTruth>& truths, const std::string& id) {
  auto it = truths.find(id);
  if (it == truths.end()) throw ValidationError("no ground truth for sample_id '" + id + "'");
  return it->second;
}

void write_text(const fs::path& path, const std::string& text) {
  Output out(path.string());
  out.stream() << text;
  out.finish();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Config plumbing shared by every command

struct CommonOptions {
  std::string config;
  std::string registry;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config,
                  std::string("Config document (default: $") + kConfigEnvVar + ")");
  cmd->add_option("--registry", o.registry, "Region registry JSON (overrides the config)");
}

AppConfig resolve_config(const CommonOptions& o) {
  auto cfg = load_config(o.config.empty() ? std::nullopt : std::optional<fs::path>(o.config));
  if (!o.registry.empty()) set_registry(cfg, Registry::from_json(read_json_path(o.registry)));
  return cfg;
}

void check_norms(const NormativeModel& norms, const Registry& registry) {
  if (!norms.registry_hash.empty() && norms.registry_hash != registry.hash()) {
    throw ValidationError("normative model was fitted for a different region registry (hash " +
                          norms.registry_hash + ", expected " + registry.hash() + ")");
  }
  for (const auto& r : registry.regions()) {
    if (!norms.has(r.id)) throw ValidationError("normative model lacks region '" + r.id + "'");
  }
}

// ---------------------------------------------------------------------------
// Commands

int cmd_fit_norms(const CommonOptions& common, const std::string& cohort_path,
                  const std::string& out_path, std::optional<std::size_t> min_fit) {
  auto cfg = resolve_config(common);
  if (min_fit) cfg.fit.min_fit_size = *min_fit;
  Input in(cohort_path);
  const auto rows = read_cohort_csv(in.stream(), cfg.registry());
  std::vector<VisitVolumes> cn;
  for (const auto& r : rows) {
    if (!r.diagnosis) {
      throw ValidationError("fit-norms: row " + sample_id_of(r) +
                            " has no diagnosis; only rows labelled CN can be used");
    }
    if (*r.diagnosis == Diagnosis::CN) cn.push_back(r);
  }
  std::cerr << "fit-norms: " << cn.size() << " CN rows of " << rows.size() << '\n';
  const auto model = fit_normative(cn, cfg.registry(), cfg.fit);
  Output out(out_path);
  out.stream() << model.to_json().dump(2) << '\n';
  out.finish();
  return 0;
}

int cmd_zscore(const CommonOptions& common, const std::string& norms_path,
               const std::string& volumes_path, const std::string& thresholds_path,
               const std::string& out_path) {
  auto cfg = resolve_config(common);
  if (!thresholds_path.empty()) {
    const auto j = read_json_path(thresholds_path);
    cfg.thresholds = Thresholds::from_json(j.contains("thresholds") ? j.at("thresholds") : j);
  }
  const auto norms = NormativeModel::from_json(read_json_path(norms_path));
  check_norms(norms, cfg.registry());
  Input in(volumes_path);
  const auto rows = read_cohort_csv(in.stream(), cfg.registry());
  Output out(out_path);
  for (const auto& row : rows) {
    json regions = json::array();
    for (const auto& l : label_visit(norms, row, cfg.registry(), cfg.thresholds)) {
      regions.push_back({{"region", l.region},
                         {"z", l.z},
                         {"label", to_string(l.severity)},
                         {"zone", to_string(l.zone)}});
    }
    out.stream() << json{{"sample_id", sample_id_of(row)},
                         {"subject_id", row.subject_id},
                         {"visit_id", row.visit_id},
                         {"regions", regions}}
                        .dump()
                 << '\n';
  }
  out.finish();
  return 0;
}

// A report input is JSONL when its first non-blank line is a JSON object with
// a "raw" field; otherwise the whole input is one raw model output.
bool looks_like_jsonl(const std::string& text) {
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      return j.is_object() && j.contains("raw");
    } catch (const json::exception&) {
      return false;
    }
  }
  return false;
}

int cmd_verify(const CommonOptions& common, const std::string& report_path,
               const std::string& truth_path, const std::string& norms_path,
               const std::string& sample_id, const std::string& out_path, unsigned jobs) {
  const auto cfg = resolve_config(common);
  if (!norms_path.empty()) check_norms(NormativeModel::from_json(read_json_path(norms_path)), cfg.registry());
  const auto truths = read_truths(truth_path);
  const std::string text = slurp(report_path);
  Output out(out_path);

  if (looks_like_jsonl(text)) {
    std::istringstream in(text);
    map_jsonl(in, out.stream(), report_path, jobs, [&](const json& j, std::size_t) {
      const auto id = j.at("sample_id").get<std::string>();
      json s = score_raw(j.at("raw").get<std::string>(), truth_for(truths, id), cfg.verifier).to_json();
      json line{{"sample_id", id}};
      line.update(s);
      return line.dump();
    });
  } else {
    std::string id = sample_id;
    if (id.empty()) {
      if (truths.size() != 1) {
        throw ValidationError("verify: a single raw report needs --sample-id when the truth file has " +
                              std::to_string(truths.size()) + " entries");
      }
      id = truths.begin()->first;
    }
    json line{{"sample_id", id}};
    line.update(score_raw(text, truth_for(truths, id), cfg.verifier).to_json());
    out.stream() << line.dump() << '\n';
  }
  out.finish();
  return 0;
}

int cmd_build_pairs(const CommonOptions& common, const std::string& pools_path,
                    std::optional<double> threshold, const std::string& out_path, unsigned jobs) {
  auto cfg = resolve_config(common);
  if (threshold) cfg.pair_threshold = *threshold;
  Input in(pools_path);
  Output out(out_path);
  map_jsonl(in.stream(), out.stream(), pools_path, jobs, [&](const json& j, std::size_t) {
    return build_pair(CandidatePool::from_json(j), cfg.verifier, cfg.pair_threshold).to_json().dump();
  });
  out.finish();
  return 0;
}

int cmd_dpo_loss(const CommonOptions& common, const std::string& inputs_path,
                 std::optional<double> beta, bool grad, const std::string& out_path) {
  const auto cfg = resolve_config(common);
  Input in(inputs_path);
  Output out(out_path);
  double sum = 0.0;
  std::size_t n = 0;
  map_jsonl(in.stream(), out.stream(), inputs_path, 1, [&](const json& j, std::size_t) {
    std::optional<double> b = beta;
    if (!b && !j.contains("beta")) b = cfg.dpo_beta;
    const auto inputs = DpoInputs::from_json(j, b);
    const double loss = dpo_loss(inputs);
    sum += loss;
    ++n;
    json line{{"loss", loss}};
    if (grad) {
      const auto g = dpo_grad(inputs);
      line["d_logp_policy_chosen"] = g.d_logp_policy_chosen;
      line["d_logp_policy_rejected"] = g.d_logp_policy_rejected;
    }
    return line.dump();
  });
  if (n == 0) throw ValidationError("dpo-loss: no input lines");
  out.stream() << json{{"batch_mean_loss", sum / static_cast<double>(n)}, {"n", n}}.dump() << '\n';
  out.finish();
  return 0;
}

int cmd_eval(const CommonOptions& common, const std::string& predictions_path,
             const std::string& truths_path, const std::string& out_path,
             const std::string& confusion_csv, std::optional<int> ece_bins) {
  auto cfg = resolve_config(common);
  if (ece_bins) cfg.ece_bins = *ece_bins;
  cfg.validate();
  const auto truths = read_truths(truths_path);
  std::vector<EvalRecord> records;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(predictions_path)) {
    const auto id = j.at("sample_id").get<std::string>();
    if (!seen.insert(id).second) throw ValidationError("eval: duplicate prediction for '" + id + "'");
    records.push_back(make_record(j.at("raw").get<std::string>(), truth_for(truths, id), cfg.registry()));
  }
  const auto report = evaluate(records, cfg.registry(), cfg.verifier.lexicon.synonyms, cfg.ece_bins);
  Output out(out_path);
  out.stream() << report.to_json().dump(2) << '\n';
  out.finish();
  if (!confusion_csv.empty()) {
    Output csv(confusion_csv);
    write_confusion_csv(csv.stream(), report.dx.confusion);
    csv.finish();
  }
  return 0;
}

std::vector<CandidatePool> read_pools(const std::string& path) {
  std::vector<CandidatePool> pools;
  for (const auto& j : read_jsonl(path)) pools.push_back(CandidatePool::from_json(j));
  return pools;
}

int cmd_sensitivity(const CommonOptions& common, const std::string& pools_path,
                    const std::string& alternatives_path, std::optional<double> threshold,
                    const std::string& out_path) {
  auto cfg = resolve_config(common);
  if (threshold) cfg.pair_threshold = *threshold;
  const auto pools = read_pools(pools_path);
  const auto alts = alternatives_path.empty()
                        ? default_alternatives(cfg.verifier)
                        : alternatives_from_json(read_json_path(alternatives_path), cfg.verifier);
  const auto report = sensitivity_analysis(pools, cfg.verifier, alts, cfg.pair_threshold);
  Output out(out_path);
  out.stream() << report.to_json().dump(2) << '\n';
  out.finish();
  return 0;
}

struct SynthSpec {
  CohortSpec cohort = CohortSpec::defaults();
  std::size_t n_subjects = 100;
  std::size_t visits_per_subject = 3;
  PoolSpec pool = PoolSpec::defaults();
};

SynthSpec read_synth_spec(const std::string& path) {
  SynthSpec s;
  if (path.empty()) return s;
  const auto j = read_json_path(path);
  if (!j.is_object()) throw ValidationError(path + ": synth spec must be an object");
  try {
    if (j.contains("cohort")) s.cohort = CohortSpec::from_json(j.at("cohort"));
    s.n_subjects = j.value("n_subjects", s.n_subjects);
    s.visits_per_subject = j.value("visits_per_subject", s.visits_per_subject);
    if (j.contains("pool")) s.pool = PoolSpec::from_json(j.at("pool"));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return s;
}

void write_jsonl(const fs::path& path, const std::vector<json>& lines) {
  Output out(path.string());
  for (const auto& l : lines) out.stream() << l.dump() << '\n';
  out.finish();
}

int cmd_synth(const std::string& what, const CommonOptions& common, const std::string& spec_path,
              std::uint64_t seed, const std::string& out_dir, const std::string& norms_path) {
  auto cfg = resolve_config(common);
  const auto spec = read_synth_spec(spec_path);
  if (spec.cohort.registry.hash() != cfg.registry().hash()) set_registry(cfg, spec.cohort.registry);
  ensure_dir(out_dir);
  const fs::path dir(out_dir);

  auto cohort = gen_cohort(spec.cohort, spec.n_subjects, spec.visits_per_subject,
                           derive_seed(seed, "cohort"));
  {
    Output csv((dir / "cohort.csv").string());
    write_cohort_csv(csv.stream(), cohort.rows, spec.cohort.registry);
    csv.finish();
  }
  write_text(dir / "true_norms.json", spec.cohort.true_model().to_json().dump(2) + "\n");

  if (!norms_path.empty()) {
    const auto norms = NormativeModel::from_json(read_json_path(norms_path));
    check_norms(norms, spec.cohort.registry);
    cohort.truths = derive_truths(cohort.rows, norms, spec.cohort.registry, spec.cohort.thresholds);
  }
  std::vector<json> truth_lines;
  for (const auto& t : cohort.truths) truth_lines.push_back(t.to_json());
  write_jsonl(dir / "truths.jsonl", truth_lines);

  if (what == "candidates") {
    std::vector<json> pools, predictions, manifests;
    for (std::size_t i = 0; i < cohort.truths.size(); ++i) {
      const auto g = gen_pool(cohort.truths[i], spec.pool, cfg.verifier, derive_seed(seed, "pool", i));
      pools.push_back(g.pool.to_json());
      predictions.push_back({{"sample_id", g.pool.sample_id}, {"raw", g.pool.gt_text}});
      manifests.push_back(g.manifest_json());
    }
    write_jsonl(dir / "pools.jsonl", pools);
    write_jsonl(dir / "predictions.jsonl", predictions);
    write_jsonl(dir / "manifests.jsonl", manifests);
  }
  std::cerr << "synth " << what << ": " << cohort.rows.size() << " visits written to " << out_dir << '\n';
  return 0;
}

int cmd_print_config(const CommonOptions& common, std::optional<double> threshold,
                     std::optional<double> beta, std::optional<int> ece_bins,
                     std::optional<std::size_t> min_fit) {
  auto cfg = resolve_config(common);
  if (threshold) cfg.pair_threshold = *threshold;
  if (beta) cfg.dpo_beta = *beta;
  if (ece_bins) cfg.ece_bins = *ece_bins;
  if (min_fit) cfg.fit.min_fit_size = *min_fit;
  cfg.validate();
  std::cout << cfg.to_json().dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification, scoring, preference-pair and evaluation engine for structured "
               "longitudinal neuroimaging reports"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("neuroverify ") + kToolVersion + " config-schema " + kSchemaVersion);

  CommonOptions common;
  std::string out = "-";
  unsigned jobs = 1;
  std::function<int()> run;

  // fit-norms
  auto* fit = app.add_subcommand("fit-norms", "Fit the normative model on CN rows of a cohort CSV");
  std::string cohort_path;
  std::optional<std::size_t> min_fit;
  add_common(fit, common);
  fit->add_option("--cohort", cohort_path, "Cohort CSV ('-' for stdin)")->required();
  fit->add_option("--out", out, "Output norms JSON");
  fit->add_option("--min-fit-size", min_fit, "Minimum number of CN rows");
  fit->callback([&] { run = [&] { return cmd_fit_norms(common, cohort_path, out, min_fit); }; });

  // zscore
  auto* zs = app.add_subcommand("zscore", "Z-scores, labels and tolerance zones per visit");
  std::string norms_path, volumes_path, thresholds_path;
  add_common(zs, common);
  zs->add_option("--norms", norms_path, "Norms JSON")->required();
  zs->add_option("--volumes", volumes_path, "Volumes CSV ('-' for stdin)")->required();
  zs->add_option("--thresholds", thresholds_path, "Thresholds JSON (overrides the config)");
  zs->add_option("--out", out, "Output labels JSONL");
  zs->callback([&] { run = [&] { return cmd_zscore(common, norms_path, volumes_path, thresholds_path, out); }; });

  // verify
  auto* ver = app.add_subcommand("verify", "Score raw reports against ground truth");
  std::string report_path, truth_path, sample_id;
  add_common(ver, common);
  ver->add_option("--report", report_path, "Raw report file or JSONL of {sample_id, raw}")->required();
  ver->add_option("--truth", truth_path, "Ground-truth JSONL")->required();
  ver->add_option("--norms", norms_path, "Norms JSON, checked against the registry");
  ver->add_option("--sample-id", sample_id, "Truth entry for a single raw report");
  ver->add_option("--out", out, "Output scores JSONL");
  ver->add_option("--jobs", jobs, "Worker threads");
  ver->callback([&] {
    run = [&] { return cmd_verify(common, report_path, truth_path, norms_path, sample_id, out, jobs); };
  });

  // build-pairs
  auto* bp = app.add_subcommand("build-pairs", "Chosen/rejected pairs from candidate pools");
  std::string pools_path;
  std::optional<double> threshold;
  add_common(bp, common);
  bp->add_option("--pools", pools_path, "Pools JSONL ('-' for stdin)")->required();
  bp->add_option("--threshold", threshold, "Quality threshold for ground-truth substitution");
  bp->add_option("--out", out, "Output pairs JSONL");
  bp->add_option("--jobs", jobs, "Worker threads");
  bp->callback([&] { run = [&] { return cmd_build_pairs(common, pools_path, threshold, out, jobs); }; });

  // dpo-loss
  auto* dpo = app.add_subcommand("dpo-loss", "DPO loss per line plus the batch mean");
  std::string inputs_path;
  std::optional<double> beta;
  bool grad = false;
  add_common(dpo, common);
  dpo->add_option("--inputs", inputs_path, "Log-probability JSONL ('-' for stdin)")->required();
  dpo->add_option("--beta", beta, "Temperature (overrides per-line and config values)");
  dpo->add_flag("--grad", grad, "Also emit gradients w.r.t. the policy log-probabilities");
  dpo->add_option("--out", out, "Output JSONL");
  dpo->callback([&] { run = [&] { return cmd_dpo_loss(common, inputs_path, beta, grad, out); }; });

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluation metrics over predictions");
  std::string predictions_path, truths_path, confusion_csv;
  std::optional<int> ece_bins;
  add_common(ev, common);
  ev->add_option("--predictions", predictions_path, "JSONL of {sample_id, raw}")->required();
  ev->add_option("--truths", truths_path, "Ground-truth JSONL")->required();
  ev->add_option("--out", out, "Output metrics JSON");
  ev->add_option("--confusion-csv", confusion_csv, "Also write the diagnosis confusion matrix");
  ev->add_option("--ece-bins", ece_bins, "Number of calibration bins");
  ev->callback([&] {
    run = [&] { return cmd_eval(common, predictions_path, truths_path, out, confusion_csv, ece_bins); };
  });

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "Pair identity and Kendall tau under alternative weights");
  std::string alternatives_path;
  add_common(sens, common);
  sens->add_option("--pools", pools_path, "Pools JSONL")->required();
  sens->add_option("--alternatives", alternatives_path, "Alternatives JSON (default: built-in set)");
  sens->add_option("--threshold", threshold, "Quality threshold");
  sens->add_option("--out", out, "Output report JSON");
  sens->callback([&] {
    run = [&] { return cmd_sensitivity(common, pools_path, alternatives_path, threshold, out); };
  });

  // synth
  auto* syn = app.add_subcommand("synth", "Synthetic cohorts and candidate pools");
  std::string what, spec_path, out_dir;
  std::uint64_t seed = 0;
  add_common(syn, common);
  syn->add_option("kind", what, "cohort | candidates")->required()->check(CLI::IsMember({"cohort", "candidates"}));
  syn->add_option("--spec", spec_path, "Synth spec JSON (default: built-in)");
  syn->add_option("--seed", seed, "Seed")->required();
  syn->add_option("--out-dir", out_dir, "Output directory")->required();
  syn->add_option("--norms", norms_path, "Derive truths from these norms instead of the generators");
  syn->callback([&] { run = [&] { return cmd_synth(what, common, spec_path, seed, out_dir, norms_path); }; });

  // print-config
  auto* pc = app.add_subcommand("print-config", "Print the resolved configuration");
  std::optional<double> pc_threshold, pc_beta;
  std::optional<int> pc_bins;
  std::optional<std::size_t> pc_min_fit;
  add_common(pc, common);
  pc->add_option("--threshold", pc_threshold, "Quality threshold");
  pc->add_option("--beta", pc_beta, "DPO temperature");
  pc->add_option("--ece-bins", pc_bins, "Calibration bins");
  pc->add_option("--min-fit-size", pc_min_fit, "Minimum fit size");
  pc->callback([&] {
    run = [&] { return cmd_print_config(common, pc_threshold, pc_beta, pc_bins, pc_min_fit); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run();
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
