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

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "cvdetect/core/error.hpp"

namespace cvdetect {

inline constexpr const char* kLibraryVersion = "0.1.0";

/// Hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("cannot read " + path.string(), "the stage that produces it");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), std::size_t(in.gcount()));
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char b[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

/// Provenance record of a run directory: which stage wrote which artifact, with content hashes.
class RunManifest {
 public:
  static constexpr const char* kFileName = "manifest.json";

  explicit RunManifest(std::filesystem::path run_dir) : dir_(std::move(run_dir)) {
    const auto p = dir_ / kFileName;
    if (std::filesystem::exists(p)) {
      std::ifstream in(p);
      try {
        doc_ = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw ConsistencyError(p.string() + " is corrupt: " + e.what());
      }
    }
    if (!doc_.is_object()) doc_ = nlohmann::json::object();
    if (!doc_.contains("stages")) doc_["stages"] = nlohmann::json::object();
    doc_["library_version"] = kLibraryVersion;
  }

  const std::filesystem::path& dir() const { return dir_; }
  const nlohmann::json& document() const { return doc_; }

  void set_run_info(const nlohmann::json& config, std::uint64_t seed, bool deterministic) {
    doc_["config"] = config;
    doc_["seed"] = seed;
    doc_["deterministic"] = deterministic;
  }

  /// Record a finished stage and the artifacts (paths relative to the run directory) it wrote.
  void record(const std::string& stage, const std::vector<std::string>& outputs, double seconds,
              const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& rel : outputs) out[rel] = sha256_file(dir_ / rel);
    nlohmann::json entry = {{"outputs", out}, {"seconds", seconds}};
    for (const auto& [k, v] : extra.items()) entry[k] = v;
    doc_["stages"][stage] = entry;
    save();
  }

  /// Throws DependencyError unless `rel` was written by `stage` and is unchanged since.
  void require(const std::string& rel, const std::string& stage) const {
    const auto path = dir_ / rel;
    const auto& stages = doc_.at("stages");
    if (!stages.contains(stage) || !stages[stage].at("outputs").contains(rel) || !std::filesystem::exists(path))
      throw DependencyError(rel + " is missing from run directory " + dir_.string(), "cvdetect " + stage);
    if (sha256_file(path) != stages[stage]["outputs"][rel].get<std::string>())
      throw DependencyError(rel + " was modified after `" + stage + "` wrote it", "cvdetect " + stage);
  }

  bool has_stage(const std::string& stage) const { return doc_.at("stages").contains(stage); }

  void save() const {
    std::filesystem::create_directories(dir_);
    std::ofstream(dir_ / kFileName, std::ios::trunc) << doc_.dump(2) << '\n';
  }

 private:
  std::filesystem::path dir_;
  nlohmann::json doc_;
};

}  // namespace cvdetect
