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

#include <map>
#include <span>
#include <vector>

#include "cvdetect/models/cvae.hpp"

namespace cvdetect {

/// Sum over pixels of (x - x_rcn)^2 for each sample.
template <typename T>
std::vector<double> squared_distances(const Tensor<T>& x, const Tensor<T>& x_rcn) {
  if (x.shape() != x_rcn.shape()) throw ArgumentError("reconstruction shape mismatch");
  const std::size_t n = x.batch(), k = x.sample_size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double r = double(x[i * k + j]) - double(x_rcn[i * k + j]);
      d[i] += r * r;
    }
  return d;
}

namespace detail {

/// Sample indices grouped by condition, ascending within each group.
inline std::map<int, std::vector<std::size_t>> group_by_condition(std::span<const int> conds) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < conds.size(); ++i) groups[conds[i]].push_back(i);
  return groups;
}

}  // namespace detail

/// Reconstruction distance of every sample through the mean latent path, conditioned on `cond`.
template <typename T>
std::vector<double> recon_distance(const CVAEModel<T>& cvae, const Tensor<T>& x, int cond) {
  return squared_distances(x, cvae_reconstruct(cvae, x, cond));
}

/// Reconstruction distance with a per-sample condition.
template <typename T>
std::vector<double> recon_distances(const CVAEModel<T>& cvae, const Tensor<T>& x, std::span<const int> conds) {
  if (conds.size() != x.batch()) throw ArgumentError("one condition per sample required");
  std::vector<double> out(x.batch());
  for (const auto& [cond, idx] : detail::group_by_condition(conds)) {
    const auto d = recon_distance(cvae, x.gather(idx), cond);
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = d[k];
  }
  return out;
}

/// Mean over `samples` latent draws z ~ N(mu, sigma^2) of the reconstruction distance.
template <typename T>
std::vector<double> recon_distances_sampled(const CVAEModel<T>& cvae, const Tensor<T>& x, std::span<const int> conds,
                                            int samples, Rng& rng) {
  if (samples <= 0) throw ArgumentError("latent sample count must be positive");
  if (conds.size() != x.batch()) throw ArgumentError("one condition per sample required");
  std::vector<double> out(x.batch(), 0.0);
  for (const auto& [cond, idx] : detail::group_by_condition(conds)) {
    const auto xs = x.gather(idx);
    const auto enc = cvae_encode(cvae, xs, cond);
    for (int s = 0; s < samples; ++s) {
      const auto d = squared_distances(xs, cvae_decode(cvae, reparameterize(enc.mu, enc.logvar, rng), cond));
      for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] += d[k] / samples;
    }
  }
  return out;
}

/// Per-sample distances and the gradient of their sum w.r.t. x.
template <typename T>
struct ReconGrad {
  std::vector<double> distances;
  Tensor<T> grad;
};

template <typename T>
ReconGrad<T> recon_distance_input_grad(const CVAEModel<T>& cvae, const Tensor<T>& x, std::span<const int> conds) {
  if (conds.size() != x.batch()) throw ArgumentError("one condition per sample required");
  ReconGrad<T> out{std::vector<double>(x.batch()), Tensor<T>(x.shape())};
  const std::size_t k = x.sample_size();
  for (const auto& [cond, idx] : detail::group_by_condition(conds)) {
    const auto xs = x.gather(idx);
    const auto enc = cvae_encode(cvae, xs, cond);
    const auto rcn = cvae_decode(cvae, enc.mu, cond);
    const auto d = squared_distances(xs, rcn);
    // d = sum (x - r(x))^2  =>  grad = 2(x - r) - J_r^T 2(x - r)
    Tensor<T> resid2(xs.shape());
    for (std::size_t i = 0; i < xs.size(); ++i) resid2[i] = T{2} * (xs[i] - rcn[i]);
    Tensor<T> g_out = resid2;
    g_out *= T{-1};
    const auto g_mu = cvae_decoder_vjp(cvae, enc.mu, cond, g_out);
    Tensor<T> g_lv(g_mu.shape());
    auto gx = cvae_encoder_vjp(cvae, xs, cond, g_mu, g_lv);
    gx += resid2;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.distances[idx[j]] = d[j];
      std::copy_n(gx.ptr() + j * k, k, out.grad.ptr() + idx[j] * k);
    }
  }
  return out;
}

}  // namespace cvdetect
