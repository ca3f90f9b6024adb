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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cvdetect/core/error.hpp"
#include "cvdetect/data/dataset.hpp"

namespace cvdetect {

namespace detail {

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::string& what) {
  if (off + 4 > b.size())
    throw FormatError(what + ": truncated header at byte offset " + std::to_string(off));
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

inline std::string hex32(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

inline void write_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Decode IDX image bytes into (n,1,32,32) pixels; smaller images are centred with zero padding.
inline ImageBatch decode_idx_images(const std::vector<std::uint8_t>& b, const std::string& name = "images") {
  const auto magic = detail::read_be32(b, 0, name);
  if (magic != kIdxImageMagic)
    throw FormatError(name + ": bad IDX image magic " + detail::hex32(magic) + " at byte offset 0");
  const std::size_t n = detail::read_be32(b, 4, name);
  const std::size_t rows = detail::read_be32(b, 8, name);
  const std::size_t cols = detail::read_be32(b, 12, name);
  if (rows > kCanonicalSize || cols > kCanonicalSize)
    throw FormatError(name + ": image size " + std::to_string(rows) + "x" + std::to_string(cols) + " exceeds 32x32");
  const std::size_t need = 16 + n * rows * cols;
  if (b.size() < need)
    throw FormatError(name + ": truncated pixel data at byte offset " + std::to_string(b.size()) + " (expected " +
                      std::to_string(need) + " bytes)");

  const std::size_t top = (kCanonicalSize - rows) / 2;
  const std::size_t left = (kCanonicalSize - cols) / 2;
  ImageBatch out({n, 1, kCanonicalSize, kCanonicalSize});
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t* src = b.data() + 16 + i * rows * cols;
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out.at(i, 0, top + r, left + c) = src[r * cols + c] / 255.0f;
  }
  return out;
}

inline std::vector<int> decode_idx_labels(const std::vector<std::uint8_t>& b, const std::string& name = "labels") {
  const auto magic = detail::read_be32(b, 0, name);
  if (magic != kIdxLabelMagic)
    throw FormatError(name + ": bad IDX label magic " + detail::hex32(magic) + " at byte offset 0");
  const std::size_t n = detail::read_be32(b, 4, name);
  if (b.size() < 8 + n)
    throw FormatError(name + ": truncated label data at byte offset " + std::to_string(b.size()) + " (expected " +
                      std::to_string(8 + n) + " bytes)");
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = b[8 + i];
    if (labels[i] >= kNumClasses)
      throw DataError(name + ": label " + std::to_string(labels[i]) + " at byte offset " + std::to_string(8 + i));
  }
  return labels;
}

/// Encode images back to IDX bytes, cropping the centred rows x cols window.
inline std::vector<std::uint8_t> encode_idx_images(const ImageBatch& x, std::size_t rows = 28, std::size_t cols = 28) {
  std::vector<std::uint8_t> b;
  detail::write_be32(b, kIdxImageMagic);
  detail::write_be32(b, static_cast<std::uint32_t>(x.batch()));
  detail::write_be32(b, static_cast<std::uint32_t>(rows));
  detail::write_be32(b, static_cast<std::uint32_t>(cols));
  const std::size_t top = (x.dim(2) - rows) / 2, left = (x.dim(3) - cols) / 2;
  for (std::size_t i = 0; i < x.batch(); ++i)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) b.push_back(detail::to_byte(x.at(i, 0, top + r, left + c)));
  return b;
}

inline std::vector<std::uint8_t> encode_idx_labels(const std::vector<int>& labels) {
  std::vector<std::uint8_t> b;
  detail::write_be32(b, kIdxLabelMagic);
  detail::write_be32(b, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) b.push_back(static_cast<std::uint8_t>(l));
  return b;
}

/// Load an MNIST image/label file pair.
inline LabeledDataset load_mnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  LabeledDataset d;
  d.images = decode_idx_images(detail::read_bytes(images_path), images_path.filename().string());
  d.labels = decode_idx_labels(detail::read_bytes(labels_path), labels_path.filename().string());
  d.tag = "mnist";
  if (d.images.batch() != d.labels.size())
    throw ConsistencyError("MNIST image count " + std::to_string(d.images.batch()) + " != label count " +
                           std::to_string(d.labels.size()));
  return d;
}

/// Load the canonical split ("train" or "test") from a directory holding the four IDX files.
inline LabeledDataset load_mnist_split(const std::filesystem::path& dir, const std::string& split) {
  const std::string prefix = split == "train" ? "train" : split == "test" ? "t10k" : "";
  if (prefix.empty()) throw ArgumentError("unknown MNIST split '" + split + "'");
  return load_mnist(dir / (prefix + "-images-idx3-ubyte"), dir / (prefix + "-labels-idx1-ubyte"));
}

}  // namespace cvdetect
