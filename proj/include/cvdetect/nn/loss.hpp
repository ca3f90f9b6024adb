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
#include <span>
#include <vector>

#include "cvdetect/core/tensor.hpp"

namespace cvdetect::nn {

template <typename T>
struct LossAndGrad {
  double loss = 0;
  Tensor<T> grad;  ///< d loss / d input
};

enum class Reduction { kMean, kSum };

/// Softmax cross-entropy on (n,k) logits. With kSum each sample's gradient is its own loss gradient.
template <typename T>
LossAndGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                                     Reduction red = Reduction::kMean) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ArgumentError("cross entropy: label count mismatch");
  LossAndGrad<T> out{0, Tensor<T>({n, k})};
  const double scale = red == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.ptr() + i * k;
    double mx = z[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, double(z[j]));
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(double(z[j]) - mx);
    const double lse = mx + std::log(sum);
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= k) throw ArgumentError("cross entropy: label out of range");
    out.loss += (lse - z[y]) * scale;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(double(z[j]) - lse);
      out.grad[i * k + j] = static_cast<T>((p - (j == y ? 1.0 : 0.0)) * scale);
    }
  }
  return out;
}

/// Binary cross-entropy between targets in [0,1] and sigmoid(logits), summed over each sample's
/// elements and averaged over the batch. Evaluated in the stable softplus form.
template <typename T>
LossAndGrad<T> bce_with_logits(const Tensor<T>& logits, const Tensor<T>& target) {
  if (logits.shape() != target.shape()) throw ArgumentError("bce: shape mismatch");
  const std::size_t n = logits.dim(0);
  LossAndGrad<T> out{0, Tensor<T>(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double l = logits[i], x = target[i];
    const double softplus = std::max(l, 0.0) + std::log1p(std::exp(-std::abs(l)));
    out.loss += (softplus - x * l) * inv_n;
    const double sig = 1.0 / (1.0 + std::exp(-l));
    out.grad[i] = static_cast<T>((sig - x) * inv_n);
  }
  return out;
}

/// Per-sample sum over pixels of BCE(target, prediction) with prediction already in [0,1].
/// Uses the convention 0 * log 0 = 0.
template <typename T>
std::vector<double> bce_per_sample(const Tensor<T>& prediction, const Tensor<T>& target) {
  if (prediction.shape() != target.shape()) throw ArgumentError("bce: shape mismatch");
  const std::size_t n = prediction.batch(), k = prediction.sample_size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double p = prediction[i * k + j], x = target[i * k + j];
      if (x > 0) out[i] -= x * std::log(p);
      if (x < 1) out[i] -= (1 - x) * std::log1p(-p);
    }
  return out;
}

/// KL(N(mu, exp(logvar)) || N(0, 1)) summed over latent dims, one value per sample.
template <typename T>
std::vector<double> kl_standard_normal(const Tensor<T>& mu, const Tensor<T>& logvar) {
  if (mu.shape() != logvar.shape()) throw ArgumentError("kl: shape mismatch");
  const std::size_t n = mu.dim(0), d = mu.dim(1);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double m = mu[i * d + j], lv = logvar[i * d + j];
      out[i] += 0.5 * (std::exp(lv) + m * m - 1.0 - lv);
    }
  return out;
}

}  // namespace cvdetect::nn
