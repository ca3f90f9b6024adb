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
#include <vector>

#include "cvdetect/detector/reference.hpp"
#include "cvdetect/models/classifier.hpp"

namespace cvdetect {

struct DetectionResult {
  double recon_distance = 0;
  double p_value = 1;
  int predicted_class = 0;
  bool flagged = false;
};

/// Reconstruction settings for detection. `latent_samples` == 0 selects the deterministic mean path.
struct DetectOptions {
  int latent_samples = 0;
  std::uint64_t seed = 0;
};

/// Classify, reconstruct under the predicted class, score against `ref`, flag when p <= t.
template <typename T>
std::vector<DetectionResult> detect(const ClassifierModel<T>& cls, const CVAEModel<T>& cvae, const ReconReference& ref,
                                    const Tensor<T>& x, double t, const DetectOptions& opts = {}) {
  if (!(t >= 0.0 && t <= 1.0)) throw ArgumentError("detection threshold must lie in [0,1]");
  if (ref.size() == 0) throw StateError("no reference distribution; build one before detecting");
  if (ref.size() < kMinReferenceSize)
    throw StateError("reference holds " + std::to_string(ref.size()) + " distances, at least " +
                     std::to_string(kMinReferenceSize) + " are required");
  const auto pred = classifier_predict(cls, x);
  std::vector<double> d;
  if (opts.latent_samples > 0) {
    Rng rng(derive_seed(opts.seed, "detect-latent"));
    d = recon_distances_sampled(cvae, x, pred, opts.latent_samples, rng);
  } else {
    d = recon_distances(cvae, x, pred);
  }
  std::vector<DetectionResult> out(x.batch());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].recon_distance = d[i];
    out[i].p_value = p_value(d[i], ref);
    out[i].predicted_class = pred[i];
    out[i].flagged = out[i].p_value <= t;
  }
  return out;
}

/// CSV columns: sample_id, y_pred, recon_distance, p_value, flagged.
inline void write_detections_csv(const std::filesystem::path& path, const std::vector<DetectionResult>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << "sample_id,y_pred,recon_distance,p_value,flagged\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out << i << ',' << rows[i].predicted_class << ',' << rows[i].recon_distance << ',' << rows[i].p_value << ','
        << (rows[i].flagged ? 1 : 0) << '\n';
}

}  // namespace cvdetect
