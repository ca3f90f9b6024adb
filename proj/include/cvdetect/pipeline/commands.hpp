// Copyright 2026 The cvdetect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cvdetect/attacks/io.hpp"
#include "cvdetect/data/cifar10.hpp"
#include "cvdetect/data/idx.hpp"
#include "cvdetect/detector/detect.hpp"
#include "cvdetect/evaluation/report.hpp"
#include "cvdetect/models/checkpoint.hpp"
#include "cvdetect/pipeline/config.hpp"
#include "cvdetect/pipeline/manifest.hpp"

namespace cvdetect::pipeline {

inline constexpr const char* kClassifierFile = "models/classifier.ckpt";
inline constexpr const char* kCvaeFile = "models/cvae.ckpt";
inline constexpr const char* kReferenceFile = "reference/reference.bin";
inline constexpr const char* kHoldoutFile = "reference/holdout.json";
inline constexpr const char* kReportJson = "report/report.json";
inline constexpr const char* kReportCsv = "report/report.csv";

inline std::string attack_file(const std::string& id) { return "attacks/" + id + ".adv"; }

using Log = std::function<void(const std::string&)>;

/// A run directory plus the configuration that drives it.
struct Run {
  RunConfig cfg;
  RunManifest manifest;
  Log log;

  explicit Run(RunConfig c, Log l = {}) : cfg(std::move(c)), manifest(cfg.out_dir), log(std::move(l)) {
    manifest.set_run_info(to_json(cfg), cfg.seed, cfg.deterministic);
  }

  std::filesystem::path path(const std::string& rel) const { return manifest.dir() / rel; }
  void say(const std::string& s) const {
    if (log) log(s);
  }
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline std::string fmt(double v, const char* f = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::trunc) << s;
}

/// Per-attack seed: derived from the run seed and the attack id, then mixed with the attack's own seed field.
inline AttackConfig seeded(const RunConfig& cfg, AttackConfig a, const std::string& base_id) {
  a.seed = derive_seed(cfg.stage_seed("attack/" + base_id), a.seed);
  return a;
}

}  // namespace detail

/// Load a canonical split, truncated to the configured limit.
inline LabeledDataset load_split(const RunConfig& cfg, const std::string& split) {
  const auto dir = resolve_data_dir(cfg);
  if (!std::filesystem::is_directory(dir))
    throw DependencyError("dataset directory " + dir.string() + " does not exist",
                          cfg.dataset == "mnist" ? "tools/fetch_mnist.sh" : "tools/fetch_cifar10.sh");
  LabeledDataset d = cfg.dataset == "mnist" ? load_mnist_split(dir, split) : load_cifar10_split(dir, split);
  d.tag = cfg.dataset;
  const auto limit = split == "train" ? cfg.train_limit : cfg.test_limit;
  if (limit && *limit < d.size()) d = d.head(*limit);
  return d;
}

inline ClassifierModel<float> cmd_train_classifier(Run& run) {
  detail::Stopwatch sw;
  const auto train = load_split(run.cfg, "train");
  TrainConfig t = run.cfg.classifier_train;
  t.seed = run.cfg.stage_seed("train-classifier");
  run.say("training " + run.cfg.classifier_profile + " on " + std::to_string(train.size()) + " images");
  auto model = train_classifier<float>(train, t, run.cfg.classifier_profile, run.log);
  const auto test = load_split(run.cfg, "test");
  const double err = error_rate(classifier_predict(model, test.images), test.labels);
  run.say("clean test error " + detail::fmt(err));
  save_checkpoint(model, run.path(kClassifierFile));
  run.manifest.record("train-classifier", {kClassifierFile}, sw.seconds(), {{"test_error", err}});
  return model;
}

inline CVAEModel<float> cmd_train_cvae(Run& run) {
  detail::Stopwatch sw;
  const auto train = load_split(run.cfg, "train");
  TrainConfig t = run.cfg.cvae_train;
  t.seed = run.cfg.stage_seed("train-cvae");
  run.say("training per-class CVAE (" + run.cfg.cvae_arch.id() + ") on " + std::to_string(train.size()) + " images");
  auto model = train_cvae<float>(train, t, run.cfg.cvae_arch, run.log);
  save_checkpoint(model, run.path(kCvaeFile));
  run.manifest.record("train-cvae", {kCvaeFile}, sw.seconds());
  return model;
}

inline ReconReference cmd_build_reference(Run& run) {
  detail::Stopwatch sw;
  run.manifest.require(kCvaeFile, "train-cvae");
  const auto cvae = load_cvae<float>(run.path(kCvaeFile), run.cfg.dataset);
  const auto train = load_split(run.cfg, "train");
  std::vector<std::size_t> keep(train.size()), hold;
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (run.cfg.holdout > 0) std::tie(keep, hold) = holdout_indices(train.size(), run.cfg.holdout, run.cfg.stage_seed("holdout"));
  if (keep.size() < kMinReferenceSize)
    throw ArgumentError("only " + std::to_string(keep.size()) + " training images left for the reference; need " +
                        std::to_string(kMinReferenceSize));
  std::string cls_id;
  if (run.manifest.has_stage("train-classifier"))
    cls_id = run.manifest.document()["stages"]["train-classifier"]["outputs"][kClassifierFile].get<std::string>();
  auto ref = build_reference(cvae, train.subset(keep), cls_id);
  ref.cvae_id = run.manifest.document()["stages"]["train-cvae"]["outputs"][kCvaeFile].get<std::string>();
  save_reference(ref, run.path(kReferenceFile));
  detail::write_text(run.path(kHoldoutFile), nlohmann::json({{"indices", hold}}).dump() + "\n");
  run.say("reference: N=" + std::to_string(ref.size()) + ", median distance " +
          detail::fmt(ref.distances[ref.size() / 2]) + ", holdout " + std::to_string(hold.size()));
  run.manifest.record("build-reference", {kReferenceFile, kHoldoutFile}, sw.seconds());
  return ref;
}

/// Attacked images: the first `eval_samples` test images, further capped by the attack's own `samples`.
inline LabeledDataset evaluation_set(const RunConfig& cfg, const LabeledDataset& test,
                                     std::optional<std::size_t> cap = std::nullopt) {
  std::size_t n = std::min(cfg.eval_samples, test.size());
  if (cap) n = std::min(n, *cap);
  return test.head(n);
}

namespace detail {

inline AttackArtifact execute_attack(const Run& run, const AttackConfig& a, const std::string& base_id,
                                     const ClassifierModel<float>& cls, const CVAEModel<float>* cvae,
                                     const LabeledDataset& test) {
  const auto eval = evaluation_set(run.cfg, test, a.samples);
  AttackArtifact art;
  art.config = a;
  art.labels = eval.labels;
  art.source_indices.resize(eval.size());
  std::iota(art.source_indices.begin(), art.source_indices.end(), std::size_t{0});
  art.result = run_attack(seeded(run.cfg, a, base_id), cls, cvae, eval.images, eval.labels);
  return art;
}

}  // namespace detail

/// Run one configured attack (or every attack when `id` is empty) and store the adversarial images.
inline std::vector<AttackArtifact> cmd_attack(Run& run, const std::string& id = "") {
  run.manifest.require(kClassifierFile, "train-classifier");
  const auto cls = load_classifier<float>(run.path(kClassifierFile), run.cfg.dataset);
  std::optional<CVAEModel<float>> cvae;
  const auto test = load_split(run.cfg, "test");
  std::vector<AttackArtifact> out;
  for (const auto& a : run.cfg.attacks) {
    if (!id.empty() && a.label() != id) continue;
    detail::Stopwatch sw;
    if (a.kind == AttackKind::kWhiteboxPgd && !cvae) {
      run.manifest.require(kCvaeFile, "train-cvae");
      cvae = load_cvae<float>(run.path(kCvaeFile), run.cfg.dataset);
    }
    auto art = detail::execute_attack(run, a, a.label(), cls, cvae ? &*cvae : nullptr, test);
    const auto rel = attack_file(a.label());
    save_attack(run.path(rel), art);
    write_attack_csv(run.path("attacks/" + a.label() + ".csv"), art);
    run.say("attack " + a.label() + ": " + std::to_string(art.result.size()) + " samples, success " +
            detail::fmt(art.result.success_rate()));
    run.manifest.record("attack/" + a.label(), {rel}, sw.seconds(), {{"success_rate", art.result.success_rate()}});
    out.push_back(std::move(art));
  }
  if (out.empty() && !id.empty()) (void)run.cfg.attack(id);
  return out;
}

/// Detection CSV for the adversarial images of `id`, or for the clean evaluation images when `id` is "clean".
inline std::vector<DetectionResult> cmd_detect(Run& run, const std::string& id, double t) {
  detail::Stopwatch sw;
  run.manifest.require(kClassifierFile, "train-classifier");
  run.manifest.require(kCvaeFile, "train-cvae");
  run.manifest.require(kReferenceFile, "build-reference");
  const auto cls = load_classifier<float>(run.path(kClassifierFile), run.cfg.dataset);
  const auto cvae = load_cvae<float>(run.path(kCvaeFile), run.cfg.dataset);
  const auto ref = load_reference(run.path(kReferenceFile));
  ImageBatch x;
  if (id == "clean") {
    x = evaluation_set(run.cfg, load_split(run.cfg, "test")).images;
  } else {
    (void)run.cfg.attack(id);
    run.manifest.require(attack_file(id), "attack/" + id);
    x = load_attack(run.path(attack_file(id))).result.x_adv;
  }
  const auto res = detect(cls, cvae, ref, x, t, {run.cfg.latent_samples, run.cfg.stage_seed("detect")});
  const std::string rel = "detect/" + id + ".csv";
  write_detections_csv(run.path(rel), res);
  std::size_t flagged = 0;
  for (const auto& r : res) flagged += r.flagged;
  run.say("detect " + id + " at t=" + detail::fmt(t, "%g") + ": flagged " + std::to_string(flagged) + "/" +
          std::to_string(res.size()));
  run.manifest.record("detect/" + id, {rel}, sw.seconds(), {{"threshold", t}});
  return res;
}

namespace detail {

struct Scoring {
  ClassifierModel<float> cls;
  CVAEModel<float> cvae;
  ReconReference ref;
  LabeledDataset test;
  double e_normal = 0;
  std::vector<double> d_clean, p_clean;
};

inline Scoring load_scoring(Run& run) {
  run.manifest.require(kClassifierFile, "train-classifier");
  run.manifest.require(kCvaeFile, "train-cvae");
  run.manifest.require(kReferenceFile, "build-reference");
  Scoring s{load_classifier<float>(run.path(kClassifierFile), run.cfg.dataset),
            load_cvae<float>(run.path(kCvaeFile), run.cfg.dataset), load_reference(run.path(kReferenceFile)),
            load_split(run.cfg, "test"), 0.0, {}, {}};
  s.e_normal = error_rate(classifier_predict(s.cls, s.test.images), s.test.labels);
  for (const auto& r : detect(s.cls, s.cvae, s.ref, evaluation_set(run.cfg, s.test).images, 1.0,
                              {run.cfg.latent_samples, run.cfg.stage_seed("detect")})) {
    s.d_clean.push_back(r.recon_distance);
    s.p_clean.push_back(r.p_value);
  }
  return s;
}

inline AttackRow score_attack(const Run& run, const Scoring& s, const AttackArtifact& art) {
  const auto det = detect(s.cls, s.cvae, s.ref, art.result.x_adv, 1.0,
                          {run.cfg.latent_samples, run.cfg.stage_seed("detect")});
  std::vector<double> d, p;
  for (const auto& r : det) {
    d.push_back(r.recon_distance);
    p.push_back(r.p_value);
  }
  return evaluate_attack(art.config, s.p_clean, d, p, art.result.success, art.result.norms, s.e_normal,
                         run.cfg.thresholds, art.config.kind == AttackKind::kRandom);
}

inline std::vector<std::string> export_row_files(const Run& run, const std::string& dir, const AttackRow& row) {
  std::vector<std::string> files;
  if (row.has_detection_metrics()) {
    roc_export(row.roc, run.path(dir + "/roc/" + row.id + ".csv"));
    files.push_back(dir + "/roc/" + row.id + ".csv");
  }
  return files;
}

inline void export_histogram(const Run& run, const std::string& rel, const Histogram& h) {
  const auto p = run.path(rel);
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::trunc);
  out << "bin_left,bin_right,count\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  if (total == 0) return;
  for (std::size_t b = 0; b < h.counts.size(); ++b) out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
}

}  // namespace detail

/// Score every configured attack against the clean evaluation images and write the report.
inline EvalReport cmd_evaluate(Run& run) {
  detail::Stopwatch sw;
  for (const auto& a : run.cfg.attacks) run.manifest.require(attack_file(a.label()), "attack/" + a.label());
  run.manifest.require(kHoldoutFile, "build-reference");
  const auto s = detail::load_scoring(run);

  EvalReport rep;
  rep.dataset = run.cfg.dataset;
  rep.e_normal = s.e_normal;
  rep.n_clean = s.p_clean.size();
  rep.thresholds = run.cfg.thresholds;
  rep.clean_flag_rates = flag_rates(s.p_clean, rep.thresholds);
  rep.clean_distance_hist = histogram(s.d_clean, kHistogramBins);
  rep.clean_p_value_hist = histogram(s.p_clean, kHistogramBins, 0.0, 1.0);

  std::ifstream hin(run.path(kHoldoutFile));
  const auto hold = nlohmann::json::parse(hin).at("indices").get<std::vector<std::size_t>>();
  if (!hold.empty()) {
    const auto train = load_split(run.cfg, "train");
    std::vector<double> p_hold;
    for (const auto& r : detect(s.cls, s.cvae, s.ref, train.subset(hold).images, 1.0,
                                {run.cfg.latent_samples, run.cfg.stage_seed("detect")}))
      p_hold.push_back(r.p_value);
    rep.holdout_n = p_hold.size();
    rep.holdout_ks = ks_uniform(p_hold);
    rep.holdout_flag_rates = flag_rates(p_hold, rep.thresholds);
  }

  std::vector<std::string> outputs{kReportJson, kReportCsv};
  for (const auto& a : run.cfg.attacks) {
    const auto art = load_attack(run.path(attack_file(a.label())));
    rep.rows.push_back(detail::score_attack(run, s, art));
    const auto& row = rep.rows.back();
    run.say(row.id + ": error " + detail::fmt(row.error_rate) + ", AUC " + detail::fmt(row.auc) + ", risk " +
            detail::fmt(row.robust_risk_upper));
    for (auto& f : detail::export_row_files(run, "report", row)) outputs.push_back(f);
    detail::export_histogram(run, "report/hist/" + row.id + "_distance.csv", row.distance_hist);
    detail::export_histogram(run, "report/hist/" + row.id + "_pvalue.csv", row.p_value_hist);
  }
  detail::export_histogram(run, "report/hist/clean_distance.csv", rep.clean_distance_hist);
  detail::export_histogram(run, "report/hist/clean_pvalue.csv", rep.clean_p_value_hist);
  write_report(rep, run.path(kReportJson), run.path(kReportCsv));
  run.say("E_normal " + detail::fmt(rep.e_normal) + ", holdout KS " + detail::fmt(rep.holdout_ks));
  run.manifest.record("evaluate", outputs, sw.seconds());
  return rep;
}

inline std::string sweep_dir(const SweepConfig& sw) { return "sweeps/" + sw.attack + "-" + to_string(sw.parameter); }

/// Re-run one attack for each swept value and report each value as a row.
inline EvalReport cmd_sweep(Run& run, const SweepConfig& sw) {
  detail::Stopwatch clock;
  const auto& base = run.cfg.attack(sw.attack);
  auto s = detail::load_scoring(run);
  EvalReport rep;
  rep.dataset = run.cfg.dataset;
  rep.e_normal = s.e_normal;
  rep.n_clean = s.p_clean.size();
  rep.thresholds = run.cfg.thresholds;
  rep.clean_flag_rates = flag_rates(s.p_clean, rep.thresholds);
  std::string csv = std::string(to_string(sw.parameter)) + ",error_rate,auc,robust_risk_upper,mean_norm\n";
  for (double v : sw.values) {
    AttackConfig a = base;
    if (sw.parameter == SweepParameter::kSigma) a.sigma = v;
    else a.eps = v;
    a.id = base.label() + "@" + to_string(sw.parameter) + "=" + detail::fmt(v, "%g");
    a.validate();
    const auto art = detail::execute_attack(run, a, base.label(), s.cls, &s.cvae, s.test);
    rep.rows.push_back(detail::score_attack(run, s, art));
    const auto& row = rep.rows.back();
    run.say("sweep " + row.id + ": error " + detail::fmt(row.error_rate) + ", AUC " + detail::fmt(row.auc));
    csv += detail::fmt(v, "%g") + "," + detail::fmt(row.error_rate, "%.6f") + "," + detail::fmt(row.auc, "%.6f") +
           "," + detail::fmt(row.robust_risk_upper, "%.6f") + "," + detail::fmt(row.mean_norm, "%.6f") + "\n";
  }
  const auto dir = sweep_dir(sw);
  write_report(rep, run.path(dir + "/report.json"), run.path(dir + "/report.csv"));
  detail::write_text(run.path(dir + "/sweep.csv"), csv);
  run.manifest.record("sweep/" + sw.attack + "/" + to_string(sw.parameter),
                      {dir + "/report.json", dir + "/report.csv", dir + "/sweep.csv"}, clock.seconds());
  return rep;
}

/// Markdown summary of the evaluation report and any sweeps.
inline std::string cmd_report(Run& run) {
  detail::Stopwatch sw;
  run.manifest.require(kReportJson, "evaluate");
  std::ifstream in(run.path(kReportJson));
  const auto r = nlohmann::json::parse(in);
  auto num = [](const nlohmann::json& v) { return v.is_number() ? detail::fmt(v.get<double>(), "%.3f") : std::string("n/a"); };
  std::ostringstream md;
  md << "# Detection report: " << r.at("dataset").get<std::string>() << "\n\n";
  md << "Clean test error (E_normal): " << num(r.at("E_normal")) << "  \n";
  md << "Clean evaluation images: " << r.at("n_clean") << "  \n";
  const auto& cal = r.at("calibration");
  md << "Holdout calibration: n=" << cal.at("holdout_n") << ", KS distance to uniform " << num(cal.at("ks_uniform"))
     << "\n\n";
  md << "| attack | parameters | error rate | AUC | robust risk (upper) |\n|---|---|---|---|---|\n";
  for (const auto& a : r.at("attacks"))
    md << "| " << a.at("attack_id").get<std::string>() << " | " << a.at("parameters").get<std::string>() << " | "
       << num(a.at("error_rate")) << " | " << num(a.at("auc")) << " | " << num(a.at("robust_risk_upper")) << " |\n";
  for (const auto& s : run.cfg.sweeps) {
    const auto p = run.path(sweep_dir(s) + "/sweep.csv");
    if (!std::filesystem::exists(p)) continue;
    md << "\n## Sweep: " << s.attack << " over " << to_string(s.parameter) << "\n\n```\n";
    std::ifstream sin(p);
    md << sin.rdbuf() << "```\n";
  }
  detail::write_text(run.path("report/report.md"), md.str());
  run.manifest.record("report", {"report/report.md"}, sw.seconds());
  return md.str();
}

}  // namespace cvdetect::pipeline
