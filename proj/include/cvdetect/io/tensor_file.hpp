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
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "cvdetect/core/error.hpp"
#include "cvdetect/core/rng.hpp"
#include "cvdetect/core/tensor.hpp"

namespace cvdetect::io {

// Tensor container layout (little-endian host order):
//   magic "CVDTNSR\0" | u32 version | u32 scalar bytes | u64 header length | header JSON
//   u64 tensor count | per tensor: u32 rank, u64 dims[rank], raw scalars
//   u64 FNV-1a checksum of every preceding byte
// A pretty-printed copy of the header JSON is written next to it as <path>.json.

inline constexpr char kMagic[8] = {'C', 'V', 'D', 'T', 'N', 'S', 'R', '\0'};
inline constexpr std::uint32_t kVersion = 1;

namespace detail {

inline std::uint64_t fnv1a(const std::uint8_t* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename V>
void put(std::vector<std::uint8_t>& b, V v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  b.insert(b.end(), p, p + sizeof(V));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& b, std::string name) : b_(b), name_(std::move(name)) {}
  template <typename V>
  V get() {
    V v;
    need(sizeof(V));
    std::memcpy(&v, b_.data() + off_, sizeof(V));
    off_ += sizeof(V);
    return v;
  }
  void read(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, b_.data() + off_, n);
    off_ += n;
  }
  std::size_t offset() const { return off_; }

 private:
  void need(std::size_t n) const {
    if (off_ + n > b_.size())
      throw CheckpointError(name_ + ": truncated at byte offset " + std::to_string(off_));
  }
  const std::vector<std::uint8_t>& b_;
  std::string name_;
  std::size_t off_ = 0;
};

}  // namespace detail

template <typename T>
struct TensorFile {
  nlohmann::json header;
  std::vector<Tensor<T>> tensors;
};

template <typename T>
std::vector<std::uint8_t> encode_tensors(const nlohmann::json& header, const std::vector<const Tensor<T>*>& tensors) {
  static_assert(std::is_floating_point_v<T>);
  std::vector<std::uint8_t> b(std::begin(kMagic), std::end(kMagic));
  detail::put<std::uint32_t>(b, kVersion);
  detail::put<std::uint32_t>(b, sizeof(T));
  const std::string h = header.dump();
  detail::put<std::uint64_t>(b, h.size());
  b.insert(b.end(), h.begin(), h.end());
  detail::put<std::uint64_t>(b, tensors.size());
  for (const auto* t : tensors) {
    detail::put<std::uint32_t>(b, static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) detail::put<std::uint64_t>(b, d);
    const auto* p = reinterpret_cast<const std::uint8_t*>(t->ptr());
    b.insert(b.end(), p, p + t->size() * sizeof(T));
  }
  detail::put<std::uint64_t>(b, detail::fnv1a(b.data(), b.size()));
  return b;
}

template <typename T>
TensorFile<T> decode_tensors(const std::vector<std::uint8_t>& b, const std::string& name = "tensor file") {
  if (b.size() < sizeof(kMagic) + 8 || std::memcmp(b.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(name + ": not a tensor container (bad magic at byte offset 0)");
  const std::uint64_t stored = [&] {
    std::uint64_t v;
    std::memcpy(&v, b.data() + b.size() - 8, 8);
    return v;
  }();
  if (stored != detail::fnv1a(b.data(), b.size() - 8))
    throw CheckpointError(name + ": checksum mismatch (file truncated or corrupted)");
  detail::Reader r(b, name);
  std::vector<std::uint8_t> magic(sizeof(kMagic));
  r.read(magic.data(), magic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw CheckpointError(name + ": unsupported version " + std::to_string(version));
  const auto scalar = r.get<std::uint32_t>();
  if (scalar != sizeof(T))
    throw CheckpointError(name + ": stored scalar size " + std::to_string(scalar) + " does not match " +
                          std::to_string(sizeof(T)));
  const auto hlen = r.get<std::uint64_t>();
  std::string h(hlen, '\0');
  r.read(h.data(), hlen);
  TensorFile<T> out;
  try {
    out.header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(name + ": unreadable header: " + e.what());
  }
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw CheckpointError(name + ": implausible tensor rank at byte offset " + std::to_string(r.offset()));
    Shape s(rank);
    for (auto& d : s) d = r.get<std::uint64_t>();
    Tensor<T> t(s);
    r.read(t.ptr(), t.size() * sizeof(T));
    out.tensors.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void save_tensors(const std::filesystem::path& path, const nlohmann::json& header,
                  const std::vector<const Tensor<T>*>& tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = encode_tensors(header, tensors);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << header.dump(2) << '\n';
}

template <typename T>
TensorFile<T> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  auto file = decode_tensors<T>(bytes, path.filename().string());
  const auto side_path = path.string() + ".json";
  if (std::filesystem::exists(side_path)) {
    std::ifstream side(side_path);
    nlohmann::json sidecar;
    try {
      sidecar = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(side_path + ": unreadable sidecar: " + e.what());
    }
    if (sidecar != file.header) throw CheckpointError(side_path + ": sidecar does not match embedded header");
  }
  return file;
}

}  // namespace cvdetect::io
