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
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cvdetect/core/error.hpp"
#include "cvdetect/core/rng.hpp"
#include "cvdetect/core/tensor.hpp"

namespace cvdetect {

inline constexpr int kNumClasses = 10;
inline constexpr std::size_t kCanonicalSize = 32;

/// Images with one integer class id per image.
struct LabeledDataset {
  ImageBatch images;
  std::vector<int> labels;
  std::string tag;  ///< "mnist" or "cifar10"

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }

  LabeledDataset subset(std::span<const std::size_t> idx) const {
    LabeledDataset out{images.gather(idx), {}, tag};
    out.labels.reserve(idx.size());
    for (auto i : idx) out.labels.push_back(labels[i]);
    return out;
  }

  LabeledDataset head(std::size_t n) const {
    n = std::min(n, size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return subset(idx);
  }

  /// Indices of samples whose label is `cls`, in dataset order.
  std::vector<std::size_t> indices_of(int cls) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) out.push_back(i);
    return out;
  }
};

/// Throws unless labels are in 0..9, counts agree and pixels are in [0,1].
inline void validate(const LabeledDataset& d) {
  check_image_batch(d.images);
  if (d.images.batch() != d.labels.size())
    throw ConsistencyError("dataset has " + std::to_string(d.images.batch()) + " images but " +
                           std::to_string(d.labels.size()) + " labels");
  for (std::size_t i = 0; i < d.labels.size(); ++i)
    if (d.labels[i] < 0 || d.labels[i] >= kNumClasses)
      throw DataError("label " + std::to_string(d.labels[i]) + " at index " + std::to_string(i) + " outside 0..9");
}

/// Seeded partition of 0..n-1 into (kept, held_out) index lists, each ascending, with `n_hold` held out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_indices(std::size_t n, std::size_t n_hold,
                                                                                     std::uint64_t seed) {
  if (n_hold == 0 || n_hold >= n) throw ArgumentError("holdout split of " + std::to_string(n) + " samples is empty");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng.engine());

  std::vector<std::size_t> hold(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> keep(perm.begin() + static_cast<std::ptrdiff_t>(n_hold), perm.end());
  std::sort(hold.begin(), hold.end());
  std::sort(keep.begin(), keep.end());
  return {keep, hold};
}

/// Seeded partition into (kept, held_out) with round(n * fraction) held out.
inline std::pair<LabeledDataset, LabeledDataset> split_holdout(const LabeledDataset& d, double fraction,
                                                               std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("holdout fraction must lie in (0,1)");
  const auto n_hold = static_cast<std::size_t>(std::llround(static_cast<double>(d.size()) * fraction));
  const auto [keep, hold] = holdout_indices(d.size(), n_hold, seed);
  return {d.subset(keep), d.subset(hold)};
}

}  // namespace cvdetect
