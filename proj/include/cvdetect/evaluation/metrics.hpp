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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "cvdetect/core/error.hpp"

namespace cvdetect {

/// Fraction of rows where `pred` differs from `truth`.
inline double error_rate(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw ArgumentError("error_rate: prediction/label count mismatch");
  if (pred.empty()) throw ArgumentError("error_rate: empty input");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != truth[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

/// Indices whose success flag is set, ascending.
inline std::vector<std::size_t> filter_successful(std::span<const std::uint8_t> success) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < success.size(); ++i)
    if (success[i]) idx.push_back(i);
  return idx;
}

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// Empirical ROC; adversarial samples are the positive class and are flagged when p <= threshold.
struct RocCurve {
  std::vector<RocPoint> points;  ///< ascending threshold; starts at (0,0), ends at (1,1)
  double auc = 0;
};

namespace detail {

inline std::vector<double> sorted_checked(std::span<const double> v, const char* what) {
  if (v.empty()) throw ArgumentError(std::string("roc: empty ") + what + " p-values");
  std::vector<double> s(v.begin(), v.end());
  for (double x : s)
    if (std::isnan(x)) throw NumericError(std::string("roc: NaN in ") + what + " p-values");
  std::sort(s.begin(), s.end());
  return s;
}

inline double fraction_le(const std::vector<double>& sorted, double t) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

}  // namespace detail

inline RocCurve roc_curve(std::span<const double> p_clean, std::span<const double> p_adv) {
  const auto c = detail::sorted_checked(p_clean, "clean");
  const auto a = detail::sorted_checked(p_adv, "adversarial");
  std::vector<double> ts{0.0, 1.0};
  ts.insert(ts.end(), c.begin(), c.end());
  ts.insert(ts.end(), a.begin(), a.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  RocCurve roc;
  // Values below zero would flag samples before t = 0; anchor the curve at the origin regardless.
  if (ts.front() < 0.0 || detail::fraction_le(c, ts.front()) > 0 || detail::fraction_le(a, ts.front()) > 0)
    roc.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (double t : ts) roc.points.push_back({t, detail::fraction_le(c, t), detail::fraction_le(a, t)});
  if (roc.points.back().fpr < 1.0 || roc.points.back().tpr < 1.0)
    roc.points.push_back({std::numeric_limits<double>::infinity(), 1.0, 1.0});

  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& p = roc.points[i - 1];
    const auto& q = roc.points[i];
    roc.auc += (q.fpr - p.fpr) * (q.tpr + p.tpr) * 0.5;
  }
  return roc;
}

/// Mann-Whitney statistic P(p_adv < p_clean) + 0.5 P(tie), by direct pairwise comparison.
inline double auc_oracle(std::span<const double> p_clean, std::span<const double> p_adv) {
  if (p_clean.empty() || p_adv.empty()) throw ArgumentError("auc_oracle: empty input");
  double wins = 0;
  for (double a : p_adv)
    for (double c : p_clean) wins += a < c ? 1.0 : (a == c ? 0.5 : 0.0);
  return wins / (static_cast<double>(p_clean.size()) * static_cast<double>(p_adv.size()));
}

struct RobustRisk {
  double value;      ///< min_t FPR_t + FNR_t + E_normal
  double threshold;  ///< argmin, smallest on ties
};

inline RobustRisk robust_risk(const RocCurve& curve, double e_normal) {
  if (curve.points.empty()) throw ArgumentError("robust_risk_upper: empty ROC curve");
  RobustRisk best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& p : curve.points) {
    const double v = p.fpr + (1.0 - p.tpr) + e_normal;
    if (v < best.value) best = {v, p.threshold};
  }
  return best;
}

inline double robust_risk_upper(const RocCurve& curve, double e_normal) { return robust_risk(curve, e_normal).value; }

/// Fraction of values <= t for each threshold.
inline std::vector<double> flag_rates(std::span<const double> p, std::span<const double> thresholds) {
  std::vector<double> out;
  for (double t : thresholds) {
    std::size_t k = 0;
    for (double v : p) k += v <= t;
    out.push_back(p.empty() ? 0.0 : double(k) / double(p.size()));
  }
  return out;
}

/// Kolmogorov-Smirnov distance between the empirical distribution of `p` and Uniform(0,1).
inline double ks_uniform(std::span<const double> p) {
  if (p.empty()) throw ArgumentError("ks_uniform: empty input");
  std::vector<double> s(p.begin(), p.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double u = std::clamp(s[i], 0.0, 1.0);
    d = std::max({d, double(i + 1) / n - u, u - double(i) / n});
  }
  return d;
}

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 ascending edges
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [lo, hi]; bins are right-closed (a, b] except the first, which is closed on both sides.
/// Values outside [lo, hi] are not counted.
inline Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins == 0) throw ArgumentError("histogram: bins must be >= 1");
  if (!(hi > lo)) throw ArgumentError("histogram: empty range");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * double(b) / double(bins));
  for (double v : values) {
    if (std::isnan(v) || v < lo || v > hi) continue;
    const auto pos = static_cast<std::size_t>(std::lower_bound(h.edges.begin(), h.edges.end(), v) - h.edges.begin());
    h.counts[std::min(pos == 0 ? 0 : pos - 1, bins - 1)]++;
  }
  return h;
}

/// Range defaults to [min, max] of the values, or [0, 1] when that is degenerate.
inline Histogram histogram(std::span<const double> values, std::size_t bins) {
  double lo = 0, hi = 1;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    if (*mx > *mn) lo = *mn, hi = *mx;
  }
  return histogram(values, bins, lo, hi);
}

/// CSV with header bin_left,bin_right,count. Empty input writes only the header.
inline void histogram_export(std::span<const double> values, std::size_t bins, const std::filesystem::path& path,
                             std::optional<std::pair<double, double>> range = std::nullopt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << "bin_left,bin_right,count\n";
  if (values.empty()) return;
  const auto h = range ? histogram(values, bins, range->first, range->second) : histogram(values, bins);
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.counts[b] << '\n';
}

inline void roc_export(const RocCurve& roc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << "threshold,fpr,tpr\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : roc.points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace cvdetect
