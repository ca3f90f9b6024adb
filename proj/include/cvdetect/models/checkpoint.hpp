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
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"

#include "cvdetect/io/tensor_file.hpp"
#include "cvdetect/models/classifier.hpp"
#include "cvdetect/models/cvae.hpp"

namespace cvdetect {

namespace detail {

template <typename T>
constexpr const char* scalar_name() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

template <typename T>
void restore(const std::vector<Tensor<T>*>& dst, std::vector<Tensor<T>>& src, const std::string& what) {
  if (dst.size() != src.size())
    throw CheckpointError(what + ": expected " + std::to_string(dst.size()) + " tensors, found " +
                          std::to_string(src.size()));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->shape() != src[i].shape())
      throw CheckpointError(what + ": tensor " + std::to_string(i) + " has shape " + shape_str(src[i].shape()) +
                            ", architecture expects " + shape_str(dst[i]->shape()));
    *dst[i] = std::move(src[i]);
  }
}

inline void check_header(const nlohmann::json& h, const std::string& kind, const std::string& expected_dataset,
                         const std::string& what) {
  if (h.value("kind", "") != kind)
    throw CheckpointError(what + ": is a '" + h.value("kind", "?") + "' checkpoint, expected '" + kind + "'");
  if (!expected_dataset.empty() && h.value("dataset", "") != expected_dataset)
    throw CheckpointError(what + ": trained on '" + h.value("dataset", "?") + "', refusing to use it for '" +
                          expected_dataset + "'");
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ClassifierModel<T>& m, const std::filesystem::path& path, const std::string& run_id = "") {
  nlohmann::json h = {{"kind", "classifier"},     {"architecture", m.arch_id()}, {"profile", m.profile},
                      {"channels", m.channels},   {"dataset", m.dataset_tag},    {"seed", m.seed},
                      {"run_id", run_id},         {"scalar", detail::scalar_name<T>()}};
  auto tensors = m.net.params();
  auto bufs = m.net.buffers();
  tensors.insert(tensors.end(), bufs.begin(), bufs.end());
  io::save_tensors<T>(path, h, tensors);
}

/// Rebuild a classifier from a checkpoint. A non-empty `expected_dataset` rejects mismatched tags.
template <typename T = float>
ClassifierModel<T> load_classifier(const std::filesystem::path& path, const std::string& expected_dataset = "") {
  auto file = io::load_tensors<T>(path);
  const nlohmann::json& h = file.header;
  detail::check_header(h, "classifier", expected_dataset, path.string());
  ClassifierModel<T> m;
  try {
    m = make_classifier<T>(h.at("profile").get<std::string>(), h.at("channels").get<std::size_t>(), 0);
    m.seed = h.at("seed").get<std::uint64_t>();
    m.dataset_tag = h.at("dataset").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": incomplete header: " + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (h.value("architecture", "") != m.arch_id())
    throw CheckpointError(path.string() + ": architecture id mismatch");
  auto dst = m.net.params();
  auto bufs = m.net.buffers();
  dst.insert(dst.end(), bufs.begin(), bufs.end());
  detail::restore(dst, file.tensors, path.string());
  return m;
}

template <typename T>
void save_checkpoint(const CVAEModel<T>& m, const std::filesystem::path& path, const std::string& run_id = "") {
  const auto& a = m.arch;
  nlohmann::json h = {{"kind", "cvae"},
                      {"architecture", a.id()},
                      {"channels", a.channels},
                      {"image_size", a.image_size},
                      {"z_dim", a.z_dim},
                      {"widths", a.widths},
                      {"num_classes", m.nets.size()},
                      {"dataset", m.dataset_tag},
                      {"seed", m.seed},
                      {"run_id", run_id},
                      {"scalar", detail::scalar_name<T>()}};
  std::vector<const Tensor<T>*> tensors;
  for (const auto& net : m.nets) {
    auto p = net.params();
    auto b = net.buffers();
    tensors.insert(tensors.end(), p.begin(), p.end());
    tensors.insert(tensors.end(), b.begin(), b.end());
  }
  io::save_tensors<T>(path, h, tensors);
}

template <typename T = float>
CVAEModel<T> load_cvae(const std::filesystem::path& path, const std::string& expected_dataset = "") {
  auto file = io::load_tensors<T>(path);
  const nlohmann::json& h = file.header;
  detail::check_header(h, "cvae", expected_dataset, path.string());
  CVAEModel<T> m;
  try {
    CvaeArch a;
    a.channels = h.at("channels").get<std::size_t>();
    a.image_size = h.at("image_size").get<std::size_t>();
    a.z_dim = h.at("z_dim").get<std::size_t>();
    a.widths = h.at("widths").get<std::array<std::size_t, 3>>();
    m = make_cvae<T>(a, h.at("seed").get<std::uint64_t>(), h.at("num_classes").get<int>());
    m.dataset_tag = h.at("dataset").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": incomplete header: " + e.what());
  } catch (const ArgumentError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  if (h.value("architecture", "") != m.arch.id()) throw CheckpointError(path.string() + ": architecture id mismatch");
  std::vector<Tensor<T>*> dst;
  for (auto& net : m.nets) {
    auto p = net.params();
    auto b = net.buffers();
    dst.insert(dst.end(), p.begin(), p.end());
    dst.insert(dst.end(), b.begin(), b.end());
  }
  detail::restore(dst, file.tensors, path.string());
  return m;
}

}  // namespace cvdetect
