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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvdetect/attacks/config.hpp"
#include "cvdetect/evaluation/metrics.hpp"

namespace cvdetect {

inline constexpr std::size_t kHistogramBins = 50;

/// One attack's line in the report. Detection metrics use successful adversarial samples only.
struct AttackRow {
  std::string id;
  AttackConfig config;
  std::size_t n_attacked = 0;
  std::size_t n_success = 0;
  double error_rate = 0;  ///< attack success rate
  double mean_norm = 0;   ///< over successful samples
  double auc = std::numeric_limits<double>::quiet_NaN();
  double robust_risk_upper = std::numeric_limits<double>::quiet_NaN();
  double risk_threshold = std::numeric_limits<double>::quiet_NaN();
  bool all_samples = false;             ///< detection metrics over every perturbed sample (noise baseline)
  std::vector<double> detection_rates;  ///< fraction flagged at each report threshold
  RocCurve roc;
  Histogram distance_hist;
  Histogram p_value_hist;

  bool has_detection_metrics() const { return std::isfinite(auc); }
};

struct EvalReport {
  std::string dataset;
  double e_normal = 0;  ///< clean-test error of the classifier
  std::size_t n_clean = 0;
  std::vector<double> thresholds;
  std::vector<double> clean_flag_rates;  ///< false-positive rate at each threshold
  std::size_t holdout_n = 0;             ///< clean training images excluded from the reference
  double holdout_ks = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> holdout_flag_rates;
  Histogram clean_distance_hist;
  Histogram clean_p_value_hist;
  std::vector<AttackRow> rows;

  const AttackRow& row(const std::string& id) const {
    for (const auto& r : rows)
      if (r.id == id) return r;
    throw ArgumentError("no report row for attack '" + id + "'");
  }
};

/// Short human-readable parameter summary, e.g. "eps=0.15 norm=linf".
inline std::string attack_parameters(const AttackConfig& c) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  switch (c.kind) {
    case AttackKind::kRandom: return "eps=" + num(c.eps);
    case AttackKind::kFgsm: return "eps=" + num(c.eps) + " norm=" + to_string(c.norm);
    case AttackKind::kRfgsm:
      return "eps=" + num(c.eps) + " eps_rand=" + num(c.eps_rand) + " norm=" + to_string(c.norm);
    case AttackKind::kPgd:
      return "eps=" + num(c.eps) + " alpha=" + num(c.alpha) + " n=" + std::to_string(c.resolved_iterations()) +
             " norm=" + to_string(c.norm);
    case AttackKind::kCw:
      return "c_init=" + num(c.cw.c_init) + " steps=" + std::to_string(c.cw.binary_search_steps) +
             " max_iter=" + std::to_string(c.cw.max_iter) + " lr=" + num(c.cw.lr);
    case AttackKind::kDeepfool:
      return "overshoot=" + num(c.df.overshoot) + " max_iter=" + std::to_string(c.df.max_iter);
    case AttackKind::kWhiteboxPgd:
      return "eps=" + num(c.eps) + " alpha=" + num(c.alpha) + " n=" + std::to_string(c.resolved_iterations()) +
             " sigma=" + num(c.sigma);
  }
  return "";
}

/// Score one attack against the clean-side p-values. `distances`, `p_adv` and `success` cover every attacked sample.
/// Detection metrics use the successful samples, or all samples when `all_samples` is set.
inline AttackRow evaluate_attack(const AttackConfig& cfg, std::span<const double> p_clean,
                                 std::span<const double> distances, std::span<const double> p_adv,
                                 std::span<const std::uint8_t> success, std::span<const double> norms,
                                 double e_normal, std::span<const double> thresholds = {},
                                 bool all_samples = false) {
  if (p_adv.size() != success.size() || distances.size() != success.size() || norms.size() != success.size())
    throw ArgumentError("evaluate_attack: per-sample arrays differ in length");
  AttackRow row;
  row.id = cfg.label();
  row.config = cfg;
  row.n_attacked = success.size();
  row.all_samples = all_samples;
  row.n_success = filter_successful(success).size();
  row.error_rate = row.n_attacked ? double(row.n_success) / double(row.n_attacked) : 0.0;
  std::vector<std::size_t> keep;
  if (all_samples) {
    keep.resize(success.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
  } else {
    keep = filter_successful(success);
  }
  std::vector<double> d_ok, p_ok;
  for (std::size_t i : keep) {
    d_ok.push_back(distances[i]);
    p_ok.push_back(p_adv[i]);
    row.mean_norm += norms[i] / double(keep.size());
  }
  row.distance_hist = histogram(d_ok, kHistogramBins);
  row.p_value_hist = histogram(p_ok, kHistogramBins, 0.0, 1.0);
  row.detection_rates = flag_rates(p_ok, thresholds);
  if (!keep.empty()) {
    row.roc = roc_curve(p_clean, p_ok);
    row.auc = row.roc.auc;
    const auto risk = robust_risk(row.roc, e_normal);
    row.robust_risk_upper = std::min(1.0, risk.value);
    row.risk_threshold = risk.threshold;
  }
  return row;
}

namespace detail {

inline nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json to_json(const Histogram& h) { return {{"edges", h.edges}, {"counts", h.counts}}; }

}  // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& a : r.rows) {
    nlohmann::json roc = nlohmann::json::array();
    for (const auto& p : a.roc.points) roc.push_back({detail::number_or_null(p.threshold), p.fpr, p.tpr});
    rows.push_back({{"attack_id", a.id},
                    {"type", to_string(a.config.kind)},
                    {"parameters", attack_parameters(a.config)},
                    {"config", to_json(a.config)},
                    {"n_attacked", a.n_attacked},
                    {"n_success", a.n_success},
                    {"detection_set", a.all_samples ? "all" : "successful"},
                    {"detection_rates", a.detection_rates},
                    {"error_rate", a.error_rate},
                    {"mean_perturbation_norm", a.mean_norm},
                    {"auc", detail::number_or_null(a.auc)},
                    {"robust_risk_upper", detail::number_or_null(a.robust_risk_upper)},
                    {"robust_risk_threshold", detail::number_or_null(a.risk_threshold)},
                    {"roc", roc},
                    {"histograms", {{"distance", detail::to_json(a.distance_hist)},
                                    {"p_value", detail::to_json(a.p_value_hist)}}}});
  }
  return {{"dataset", r.dataset},
          {"E_normal", r.e_normal},
          {"n_clean", r.n_clean},
          {"thresholds", r.thresholds},
          {"clean_flag_rates", r.clean_flag_rates},
          {"calibration",
           {{"holdout_n", r.holdout_n},
            {"ks_uniform", detail::number_or_null(r.holdout_ks)},
            {"flag_rates", r.holdout_flag_rates}}},
          {"clean_histograms",
           {{"distance", detail::to_json(r.clean_distance_hist)}, {"p_value", detail::to_json(r.clean_p_value_hist)}}},
          {"attacks", rows}};
}

inline std::string report_csv(const EvalReport& r) {
  auto num = [](double v) {
    if (!std::isfinite(v)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  std::string out = "type,error_rate,parameters,auc,robust_risk_upper\n";
  out += "normal," + num(r.e_normal) + ",,,\n";
  for (const auto& a : r.rows)
    out += a.id + "," + num(a.error_rate) + ",\"" + attack_parameters(a.config) + "\"," + num(a.auc) + "," +
           num(a.robust_risk_upper) + "\n";
  return out;
}

inline void write_report(const EvalReport& r, const std::filesystem::path& json_path,
                         const std::filesystem::path& csv_path) {
  for (const auto& p : {json_path, csv_path})
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream(json_path, std::ios::trunc) << to_json(r).dump(2) << '\n';
  std::ofstream(csv_path, std::ios::trunc) << report_csv(r);
}

}  // namespace cvdetect
