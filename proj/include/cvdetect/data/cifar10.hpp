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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cvdetect/data/dataset.hpp"
#include "cvdetect/data/idx.hpp"

namespace cvdetect {

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

/// Append the records in `b` (label byte + R,G,B planes) to `d`.
inline void decode_cifar10_records(const std::vector<std::uint8_t>& b, LabeledDataset& d, const std::string& name) {
  if (b.size() % kCifarRecord != 0)
    throw FormatError(name + ": length " + std::to_string(b.size()) + " is not a multiple of 3073 (trailing record at byte offset " +
                      std::to_string(b.size() - b.size() % kCifarRecord) + ")");
  const std::size_t n = b.size() / kCifarRecord;
  const std::size_t base = d.labels.size();
  std::vector<float> pixels = std::move(d.images.storage());
  pixels.resize((base + n) * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* rec = b.data() + i * kCifarRecord;
    if (rec[0] >= kNumClasses)
      throw DataError(name + ": label byte " + std::to_string(rec[0]) + " at byte offset " +
                      std::to_string(i * kCifarRecord));
    d.labels.push_back(rec[0]);
    float* dst = pixels.data() + (base + i) * kCifarPixels;
    for (std::size_t k = 0; k < kCifarPixels; ++k) dst[k] = rec[1 + k] / 255.0f;
  }
  d.images = ImageBatch({base + n, 3, 32, 32}, std::move(pixels));
}

inline LabeledDataset load_cifar10(const std::vector<std::filesystem::path>& batch_paths) {
  LabeledDataset d{ImageBatch({0, 3, 32, 32}), {}, "cifar10"};
  for (const auto& p : batch_paths) decode_cifar10_records(detail::read_bytes(p), d, p.filename().string());
  return d;
}

inline std::vector<std::uint8_t> encode_cifar10(const LabeledDataset& d) {
  std::vector<std::uint8_t> b;
  b.reserve(d.size() * kCifarRecord);
  for (std::size_t i = 0; i < d.size(); ++i) {
    b.push_back(static_cast<std::uint8_t>(d.labels[i]));
    for (float v : d.images.sample(i)) b.push_back(detail::to_byte(v));
  }
  return b;
}

/// "train" -> data_batch_1..5.bin, "test" -> test_batch.bin.
inline LabeledDataset load_cifar10_split(const std::filesystem::path& dir, const std::string& split) {
  std::vector<std::filesystem::path> paths;
  if (split == "train") {
    for (int i = 1; i <= 5; ++i) paths.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  } else if (split == "test") {
    paths.push_back(dir / "test_batch.bin");
  } else {
    throw ArgumentError("unknown CIFAR-10 split '" + split + "'");
  }
  return load_cifar10(paths);
}

}  // namespace cvdetect
