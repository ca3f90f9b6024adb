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
#include <string>
#include <vector>

#include "json.hpp"

#include "cvdetect/data/dataset.hpp"
#include "cvdetect/detector/recon.hpp"
#include "cvdetect/io/tensor_file.hpp"

namespace cvdetect {

/// Smallest reference size accepted for detection; below it p-values are too coarse for ROC analysis.
inline constexpr std::size_t kMinReferenceSize = 100;

/// Sorted clean-training reconstruction distances: the empirical null distribution.
struct ReconReference {
  std::vector<double> distances;  ///< ascending, finite, >= 0
  std::string dataset_tag;
  std::string classifier_id;
  std::string cvae_id;

  std::size_t size() const noexcept { return distances.size(); }

  void validate() const {
    for (std::size_t i = 0; i < distances.size(); ++i) {
      if (!std::isfinite(distances[i]) || distances[i] < 0)
        throw NumericError("reference distance " + std::to_string(i) + " is not a finite non-negative value");
      if (i > 0 && distances[i] < distances[i - 1]) throw ConsistencyError("reference distances are not sorted");
    }
  }
};

/// Reference from a trained CVAE and clean labeled data, conditioning on the ground-truth labels.
template <typename T>
ReconReference build_reference(const CVAEModel<T>& cvae, const LabeledDataset& train, std::string classifier_id = "") {
  if (!cvae.dataset_tag.empty() && !train.tag.empty() && cvae.dataset_tag != train.tag)
    throw ConsistencyError("CVAE was trained on '" + cvae.dataset_tag + "' but the reference data is '" + train.tag +
                           "'");
  ReconReference ref;
  ref.distances = recon_distances(cvae, train.images.template cast<T>(), train.labels);
  std::sort(ref.distances.begin(), ref.distances.end());
  ref.dataset_tag = train.tag;
  ref.classifier_id = std::move(classifier_id);
  ref.cvae_id = cvae.arch_id();
  ref.validate();
  return ref;
}

/// Permutation-test p-value: (#{reference >= d} + 1) / (N + 1). Large distances give small p.
inline double p_value(double d, const ReconReference& ref) {
  if (std::isnan(d)) throw NumericError("reconstruction distance is NaN");
  if (ref.distances.empty()) throw ArgumentError("empty reference distribution");
  const auto first_ge = std::lower_bound(ref.distances.begin(), ref.distances.end(), d);
  const auto n_ge = static_cast<double>(ref.distances.end() - first_ge);
  return (n_ge + 1.0) / (static_cast<double>(ref.size()) + 1.0);
}

inline std::vector<double> p_values(std::span<const double> d, const ReconReference& ref) {
  std::vector<double> out;
  out.reserve(d.size());
  for (double v : d) out.push_back(p_value(v, ref));
  return out;
}

inline void save_reference(const ReconReference& ref, const std::filesystem::path& path) {
  const nlohmann::json h = {{"kind", "reference"},
                            {"N", ref.size()},
                            {"dataset", ref.dataset_tag},
                            {"classifier_id", ref.classifier_id},
                            {"cvae_id", ref.cvae_id}};
  Tensor<double> t({ref.size()}, ref.distances);
  io::save_tensors<double>(path, h, {&t});
}

inline ReconReference load_reference(const std::filesystem::path& path) {
  auto file = io::load_tensors<double>(path);
  if (file.header.value("kind", "") != "reference" || file.tensors.size() != 1)
    throw CheckpointError(path.string() + ": not a reference file");
  ReconReference ref;
  ref.distances = std::move(file.tensors[0].storage());
  ref.dataset_tag = file.header.value("dataset", "");
  ref.classifier_id = file.header.value("classifier_id", "");
  ref.cvae_id = file.header.value("cvae_id", "");
  if (file.header.value("N", std::size_t{0}) != ref.size())
    throw CheckpointError(path.string() + ": N in header does not match stored array");
  ref.validate();
  return ref;
}

}  // namespace cvdetect
