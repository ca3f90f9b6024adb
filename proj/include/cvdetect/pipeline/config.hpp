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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cvdetect/attacks/config.hpp"
#include "cvdetect/core/json_fields.hpp"
#include "cvdetect/models/cvae.hpp"
#include "cvdetect/models/train_config.hpp"

namespace cvdetect {

/// Environment variable naming the directory that holds `mnist/` and `cifar10/`.
inline constexpr const char* kDataRootEnv = "CVDETECT_DATA_ROOT";

enum class SweepParameter { kSigma, kEpsilon };

inline const char* to_string(SweepParameter p) { return p == SweepParameter::kSigma ? "sigma" : "epsilon"; }

struct SweepConfig {
  std::string attack;  ///< id of the base attack in RunConfig::attacks
  SweepParameter parameter = SweepParameter::kSigma;
  std::vector<double> values;
};

struct RunConfig {
  std::string dataset = "mnist";
  std::optional<std::string> data_dir;  ///< overrides $CVDETECT_DATA_ROOT/<dataset>
  std::string out_dir = "runs/default";
  std::optional<std::size_t> train_limit;
  std::optional<std::size_t> test_limit;

  std::string classifier_profile = "cnn4";
  TrainConfig classifier_train{.epochs = 3};
  CvaeArch cvae_arch;
  TrainConfig cvae_train{.epochs = 5};

  std::size_t holdout = 1000;  ///< clean training images kept out of the reference for calibration
  std::size_t eval_samples = 1000;
  std::vector<double> thresholds{0.01, 0.05, 0.1};
  int latent_samples = 0;

  std::vector<AttackConfig> attacks;
  std::vector<SweepConfig> sweeps;
  std::uint64_t seed = 0;
  bool deterministic = true;

  const AttackConfig& attack(const std::string& id) const {
    for (const auto& a : attacks)
      if (a.label() == id) return a;
    throw ArgumentError("no attack with id '" + id + "' in the run config");
  }

  /// Seed for a named pipeline stage.
  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(seed, stage); }
};

namespace detail {

inline TrainConfig train_from_json(const json::Fields& f, TrainConfig t) {
  f.only({"epochs", "batch_size", "learning_rate", "optimizer"});
  t.epochs = f.optional<int>("epochs", t.epochs);
  t.batch_size = f.optional<std::size_t>("batch_size", t.batch_size);
  t.learning_rate = f.optional<double>("learning_rate", t.learning_rate);
  t.optimizer = f.optional<std::string>("optimizer", t.optimizer);
  json::require(t.epochs >= 1, f.at("epochs"), "must be >= 1");
  json::require(t.batch_size >= 2, f.at("batch_size"), "must be >= 2");
  json::require(t.learning_rate > 0, f.at("learning_rate"), "must be > 0");
  json::require(t.optimizer == "adam" || t.optimizer == "sgd", f.at("optimizer"), "expected adam or sgd");
  return t;
}

inline nlohmann::json train_to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"optimizer", t.optimizer}};
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  json::Fields f(j, "");
  f.only({"dataset", "paths", "data", "classifier", "cvae", "reference", "evaluation", "attacks", "sweeps", "seed",
          "deterministic", "description"});
  RunConfig c;
  c.dataset = f.required<std::string>("dataset");
  json::require(c.dataset == "mnist" || c.dataset == "cifar10", f.at("dataset"), "expected mnist or cifar10");
  c.cvae_arch.channels = c.dataset == "mnist" ? 1 : 3;
  if (f.has("paths")) {
    auto p = f.object("paths");
    p.only({"data", "out"});
    c.data_dir = p.maybe<std::string>("data");
    c.out_dir = p.optional<std::string>("out", c.out_dir);
  }
  if (f.has("data")) {
    auto d = f.object("data");
    d.only({"train_limit", "test_limit"});
    c.train_limit = d.maybe<std::size_t>("train_limit");
    c.test_limit = d.maybe<std::size_t>("test_limit");
  }
  if (f.has("classifier")) {
    auto cl = f.object("classifier");
    cl.only({"profile", "train"});
    c.classifier_profile = cl.optional<std::string>("profile", c.classifier_profile);
    json::require(c.classifier_profile == "cnn4" || c.classifier_profile == "resnet18" ||
                      c.classifier_profile == "resnet18-narrow",
                  cl.at("profile"), "expected cnn4, resnet18 or resnet18-narrow");
    if (cl.has("train")) c.classifier_train = detail::train_from_json(cl.object("train"), c.classifier_train);
  }
  if (f.has("cvae")) {
    auto cv = f.object("cvae");
    cv.only({"z_dim", "widths", "train"});
    c.cvae_arch.z_dim = cv.optional<std::size_t>("z_dim", c.cvae_arch.z_dim);
    json::require(c.cvae_arch.z_dim >= 1, cv.at("z_dim"), "must be >= 1");
    if (cv.has("widths")) {
      const auto w = cv.required<std::vector<std::size_t>>("widths");
      json::require(w.size() == 3 && w[0] && w[1] && w[2], cv.at("widths"), "expected three positive widths");
      c.cvae_arch.widths = {w[0], w[1], w[2]};
    }
    if (cv.has("train")) c.cvae_train = detail::train_from_json(cv.object("train"), c.cvae_train);
  }
  if (f.has("reference")) {
    auto r = f.object("reference");
    r.only({"holdout"});
    c.holdout = r.optional<std::size_t>("holdout", c.holdout);
  }
  if (f.has("evaluation")) {
    auto e = f.object("evaluation");
    e.only({"samples", "thresholds", "latent_samples"});
    c.eval_samples = e.optional<std::size_t>("samples", c.eval_samples);
    json::require(c.eval_samples >= 1, e.at("samples"), "must be >= 1");
    c.thresholds = e.optional<std::vector<double>>("thresholds", c.thresholds);
    for (std::size_t i = 0; i < c.thresholds.size(); ++i)
      json::require(c.thresholds[i] >= 0 && c.thresholds[i] <= 1, e.at("thresholds") + "/" + std::to_string(i),
                    "threshold must lie in [0,1]");
    c.latent_samples = e.optional<int>("latent_samples", 0);
    json::require(c.latent_samples >= 0, e.at("latent_samples"), "must be >= 0");
  }
  if (f.has("attacks")) {
    const auto& arr = f.raw("attacks");
    json::require(arr.is_array(), f.at("attacks"), "expected an array");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ptr = "/attacks/" + std::to_string(i);
      c.attacks.push_back(attack_from_json(arr[i], ptr));
      json::require(ids.insert(c.attacks.back().label()).second, ptr + "/id", "duplicate attack id");
      json::require(c.attacks.back().label() != "clean", ptr + "/id", "'clean' is reserved");
    }
  }
  if (f.has("sweeps")) {
    const auto& arr = f.raw("sweeps");
    json::require(arr.is_array(), f.at("sweeps"), "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      json::Fields s(arr[i], "/sweeps/" + std::to_string(i));
      s.only({"attack", "parameter", "values"});
      SweepConfig sw;
      sw.attack = s.required<std::string>("attack");
      const bool known = std::any_of(c.attacks.begin(), c.attacks.end(), [&](const auto& a) { return a.label() == sw.attack; });
      json::require(known, s.at("attack"), "refers to an attack that is not defined in /attacks");
      const auto param = s.required<std::string>("parameter");
      json::require(param == "sigma" || param == "epsilon", s.at("parameter"), "expected sigma or epsilon");
      sw.parameter = param == "sigma" ? SweepParameter::kSigma : SweepParameter::kEpsilon;
      sw.values = s.required<std::vector<double>>("values");
      json::require(!sw.values.empty(), s.at("values"), "must not be empty");
      for (std::size_t k = 0; k < sw.values.size(); ++k) {
        const double v = sw.values[k];
        const bool ok = sw.parameter == SweepParameter::kSigma ? v >= 0 && v <= 1 : v >= 0 && std::isfinite(v);
        json::require(ok, s.at("values") + "/" + std::to_string(k),
                      sw.parameter == SweepParameter::kSigma ? "sigma must lie in [0,1]" : "epsilon must be >= 0");
      }
      c.sweeps.push_back(std::move(sw));
    }
  }
  c.seed = f.optional<std::uint64_t>("seed", 0);
  c.deterministic = f.optional<bool>("deterministic", true);
  return c;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json attacks = nlohmann::json::array(), sweeps = nlohmann::json::array();
  for (const auto& a : c.attacks) attacks.push_back(to_json(a));
  for (const auto& s : c.sweeps)
    sweeps.push_back({{"attack", s.attack}, {"parameter", to_string(s.parameter)}, {"values", s.values}});
  nlohmann::json j = {
      {"dataset", c.dataset},
      {"paths", {{"out", c.out_dir}}},
      {"classifier", {{"profile", c.classifier_profile}, {"train", detail::train_to_json(c.classifier_train)}}},
      {"cvae",
       {{"z_dim", c.cvae_arch.z_dim},
        {"widths", c.cvae_arch.widths},
        {"train", detail::train_to_json(c.cvae_train)}}},
      {"reference", {{"holdout", c.holdout}}},
      {"evaluation",
       {{"samples", c.eval_samples}, {"thresholds", c.thresholds}, {"latent_samples", c.latent_samples}}},
      {"attacks", attacks},
      {"sweeps", sweeps},
      {"seed", c.seed},
      {"deterministic", c.deterministic}};
  if (c.data_dir) j["paths"]["data"] = *c.data_dir;
  nlohmann::json data = nlohmann::json::object();
  if (c.train_limit) data["train_limit"] = *c.train_limit;
  if (c.test_limit) data["test_limit"] = *c.test_limit;
  if (!data.empty()) j["data"] = data;
  return j;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("", path.string() + " is not valid JSON: " + e.what());
  }
}

inline RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json_file(path)); }

/// Directory holding the dataset files: explicit config path, else $CVDETECT_DATA_ROOT/<dataset>.
inline std::filesystem::path resolve_data_dir(const RunConfig& c) {
  if (c.data_dir) return *c.data_dir;
  const char* root = std::getenv(kDataRootEnv);
  if (!root || !*root)
    throw DependencyError(std::string("no data location: set ") + kDataRootEnv + " to the directory containing '" +
                              c.dataset + "/'",
                          "tools/fetch_mnist.sh");
  return std::filesystem::path(root) / c.dataset;
}

}  // namespace cvdetect
