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

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "cvdetect/core/json_fields.hpp"

namespace cvdetect {

enum class AttackKind { kRandom, kFgsm, kRfgsm, kPgd, kCw, kDeepfool, kWhiteboxPgd };
enum class Norm { kL2, kLinf };
enum class TargetPolicy { kUntargeted, kRandomOther };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::kRandom: return "random";
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kRfgsm: return "rfgsm";
    case AttackKind::kPgd: return "pgd";
    case AttackKind::kCw: return "cw";
    case AttackKind::kDeepfool: return "deepfool";
    case AttackKind::kWhiteboxPgd: return "whitebox_pgd";
  }
  return "?";
}
inline const char* to_string(Norm n) { return n == Norm::kL2 ? "l2" : "linf"; }
inline const char* to_string(TargetPolicy p) {
  return p == TargetPolicy::kUntargeted ? "untargeted" : "random_other_class";
}

inline std::optional<AttackKind> parse_attack_kind(const std::string& s) {
  for (auto k : {AttackKind::kRandom, AttackKind::kFgsm, AttackKind::kRfgsm, AttackKind::kPgd, AttackKind::kCw,
                 AttackKind::kDeepfool, AttackKind::kWhiteboxPgd})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct CwParams {
  double c_init = 1e-2;
  int binary_search_steps = 5;
  int max_iter = 1000;
  double lr = 0.01;
  double confidence = 0.0;
  bool abort_early = true;
};

struct DeepFoolParams {
  double overshoot = 0.02;
  int max_iter = 50;
};

/// Iteration count used when `n` is omitted: floor(2 eps / alpha) + 2.
inline int default_pgd_iterations(double eps, double alpha) {
  return static_cast<int>(std::floor(2.0 * eps / alpha + 1e-9)) + 2;
}

struct AttackConfig {
  std::string id;
  AttackKind kind = AttackKind::kFgsm;
  Norm norm = Norm::kLinf;
  double eps = 0.1;       ///< eps_atk
  double eps_rand = 0.0;  ///< random-start radius (rfgsm)
  double alpha = 0.01;    ///< PGD step size
  std::optional<int> iterations;
  double sigma = 0.0;  ///< detector-loss weight (whitebox_pgd)
  CwParams cw;
  DeepFoolParams df;
  TargetPolicy target_policy = TargetPolicy::kUntargeted;
  std::uint64_t seed = 0;
  std::optional<std::size_t> samples;  ///< attack only the first `samples` evaluation images

  int resolved_iterations() const { return iterations ? *iterations : default_pgd_iterations(eps, alpha); }

  bool targeted() const { return target_policy == TargetPolicy::kRandomOther; }

  /// Norm used to report perturbation sizes.
  Norm metric_norm() const { return kind == AttackKind::kCw || kind == AttackKind::kDeepfool ? Norm::kL2 : norm; }

  std::string label() const { return id.empty() ? std::string(to_string(kind)) : id; }

  /// Throws ValidationError with a pointer relative to `base`.
  void validate(const std::string& base = "") const {
    using json::require;
    require(std::isfinite(eps) && eps >= 0, base + "/eps_atk", "must be a finite value >= 0");
    require(std::isfinite(eps_rand) && eps_rand >= 0, base + "/eps_rand", "must be a finite value >= 0");
    if (kind == AttackKind::kRfgsm) require(eps_rand <= eps, base + "/eps_rand", "must not exceed eps_atk");
    if (kind == AttackKind::kPgd || kind == AttackKind::kWhiteboxPgd) {
      require(std::isfinite(alpha) && alpha > 0, base + "/alpha", "must be > 0");
      require(!iterations || *iterations >= 1, base + "/n", "must be >= 1");
    }
    require(sigma >= 0 && sigma <= 1, base + "/sigma", "must lie in [0,1]");
    if (kind == AttackKind::kWhiteboxPgd)
      require(target_policy == TargetPolicy::kRandomOther, base + "/target_policy",
              "whitebox_pgd is a targeted attack; use random_other_class");
    if (kind == AttackKind::kRandom || kind == AttackKind::kFgsm || kind == AttackKind::kRfgsm ||
        kind == AttackKind::kDeepfool)
      require(target_policy == TargetPolicy::kUntargeted, base + "/target_policy",
              std::string(to_string(kind)) + " is untargeted");
    if (kind == AttackKind::kRandom)
      require(norm == Norm::kLinf, base + "/norm", "uniform noise is defined in the linf ball");
    require(cw.c_init > 0, base + "/cw_params/c_init", "must be > 0");
    require(cw.binary_search_steps >= 1, base + "/cw_params/binary_search_steps", "must be >= 1");
    require(cw.max_iter >= 1, base + "/cw_params/max_iter", "must be >= 1");
    require(cw.lr > 0, base + "/cw_params/lr", "must be > 0");
    require(cw.confidence >= 0, base + "/cw_params/confidence", "must be >= 0");
    require(df.overshoot >= 0, base + "/df_params/overshoot", "must be >= 0");
    require(df.max_iter >= 1, base + "/df_params/max_iter", "must be >= 1");
  }
};

inline nlohmann::json to_json(const AttackConfig& c) {
  nlohmann::json j = {
      {"id", c.id},
      {"kind", to_string(c.kind)},
      {"norm", to_string(c.norm)},
      {"eps_atk", c.eps},
      {"eps_rand", c.eps_rand},
      {"alpha", c.alpha},
      {"n", c.iterations ? nlohmann::json(*c.iterations) : nlohmann::json(nullptr)},
      {"sigma", c.sigma},
      {"cw_params",
       {{"c_init", c.cw.c_init},
        {"binary_search_steps", c.cw.binary_search_steps},
        {"max_iter", c.cw.max_iter},
        {"lr", c.cw.lr},
        {"confidence", c.cw.confidence},
        {"abort_early", c.cw.abort_early}}},
      {"df_params", {{"overshoot", c.df.overshoot}, {"max_iter", c.df.max_iter}}},
      {"target_policy", to_string(c.target_policy)},
      {"seed", c.seed}};
  if (c.samples) j["samples"] = *c.samples;
  return j;
}

/// Parse and validate one attack entry; `pointer` locates it inside the enclosing document.
inline AttackConfig attack_from_json(const nlohmann::json& j, const std::string& pointer = "") {
  json::Fields f(j, pointer);
  f.only({"id", "kind", "norm", "eps_atk", "eps_rand", "alpha", "n", "sigma", "cw_params", "df_params",
          "target_policy", "seed", "samples"});
  AttackConfig c;
  c.id = f.optional<std::string>("id", "");
  const auto kind = parse_attack_kind(f.required<std::string>("kind"));
  json::require(kind.has_value(), f.at("kind"),
                "unknown attack kind (expected random|fgsm|rfgsm|pgd|cw|deepfool|whitebox_pgd)");
  c.kind = *kind;
  const auto norm = f.optional<std::string>("norm", "linf");
  json::require(norm == "l2" || norm == "linf", f.at("norm"), "expected l2 or linf");
  c.norm = norm == "l2" ? Norm::kL2 : Norm::kLinf;
  c.eps = f.optional<double>("eps_atk", c.eps);
  c.eps_rand = f.optional<double>("eps_rand", c.eps_rand);
  c.alpha = f.optional<double>("alpha", c.alpha);
  c.iterations = f.maybe<int>("n");
  c.sigma = f.optional<double>("sigma", c.sigma);
  if (f.has("cw_params")) {
    auto g = f.object("cw_params");
    g.only({"c_init", "binary_search_steps", "max_iter", "lr", "confidence", "abort_early"});
    c.cw.c_init = g.optional<double>("c_init", c.cw.c_init);
    c.cw.binary_search_steps = g.optional<int>("binary_search_steps", c.cw.binary_search_steps);
    c.cw.max_iter = g.optional<int>("max_iter", c.cw.max_iter);
    c.cw.lr = g.optional<double>("lr", c.cw.lr);
    c.cw.confidence = g.optional<double>("confidence", c.cw.confidence);
    c.cw.abort_early = g.optional<bool>("abort_early", c.cw.abort_early);
  }
  if (f.has("df_params")) {
    auto g = f.object("df_params");
    g.only({"overshoot", "max_iter"});
    c.df.overshoot = g.optional<double>("overshoot", c.df.overshoot);
    c.df.max_iter = g.optional<int>("max_iter", c.df.max_iter);
  }
  const auto policy =
      f.optional<std::string>("target_policy", c.kind == AttackKind::kWhiteboxPgd ? "random_other_class" : "untargeted");
  json::require(policy == "untargeted" || policy == "random_other_class", f.at("target_policy"),
                "expected untargeted or random_other_class");
  c.target_policy = policy == "untargeted" ? TargetPolicy::kUntargeted : TargetPolicy::kRandomOther;
  c.seed = f.optional<std::uint64_t>("seed", 0);
  c.samples = f.maybe<std::size_t>("samples");
  json::require(!c.samples || *c.samples > 0, f.at("samples"), "must be >= 1");
  c.validate(pointer);
  return c;
}

}  // namespace cvdetect
