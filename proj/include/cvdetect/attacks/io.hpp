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

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>

#include "cvdetect/attacks/attacks.hpp"
#include "cvdetect/io/tensor_file.hpp"

namespace cvdetect {

/// Attack output together with the labels and config it was produced from.
struct AttackArtifact {
  AttackConfig config;
  AttackResult<float> result;
  std::vector<int> labels;
  std::vector<std::size_t> source_indices;  ///< rows of the evaluation set that were attacked
};

inline void save_attack(const std::filesystem::path& path, const AttackArtifact& a) {
  const auto& r = a.result;
  nlohmann::json h = {{"kind", "attack"},
                      {"config", to_json(a.config)},
                      {"labels", a.labels},
                      {"source_indices", a.source_indices},
                      {"success", r.success},
                      {"norms", r.norms},
                      {"predictions", r.predictions},
                      {"targets", r.targets}};
  io::save_tensors<float>(path, h, {&r.x_adv});
}

inline AttackArtifact load_attack(const std::filesystem::path& path) {
  auto file = io::load_tensors<float>(path);
  const auto& h = file.header;
  if (h.value("kind", "") != "attack" || file.tensors.size() != 1)
    throw CheckpointError(path.string() + ": not an attack artifact");
  AttackArtifact a;
  a.config = attack_from_json(h.at("config"), "/config");
  a.labels = h.at("labels").get<std::vector<int>>();
  a.source_indices = h.at("source_indices").get<std::vector<std::size_t>>();
  a.result.x_adv = std::move(file.tensors[0]);
  a.result.success = h.at("success").get<std::vector<std::uint8_t>>();
  a.result.norms = h.at("norms").get<std::vector<double>>();
  a.result.predictions = h.at("predictions").get<std::vector<int>>();
  a.result.targets = h.at("targets").get<std::vector<int>>();
  const std::size_t n = a.result.x_adv.batch();
  if (a.labels.size() != n || a.result.success.size() != n || a.result.norms.size() != n ||
      a.result.predictions.size() != n || a.source_indices.size() != n ||
      !(a.result.targets.empty() || a.result.targets.size() == n))
    throw CheckpointError(path.string() + ": per-sample arrays disagree with the stored batch size");
  return a;
}

/// CSV columns: sample_id, y_true, y_pred, target, success, perturbation_norm.
inline void write_attack_csv(const std::filesystem::path& path, const AttackArtifact& a) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << "sample_id,y_true,y_pred,target,success,perturbation_norm\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  const auto& r = a.result;
  for (std::size_t i = 0; i < r.size(); ++i) {
    out << a.source_indices[i] << ',' << a.labels[i] << ',' << r.predictions[i] << ',';
    if (!r.targets.empty()) out << r.targets[i];
    out << ',' << int(r.success[i]) << ',' << r.norms[i] << '\n';
  }
}

}  // namespace cvdetect
