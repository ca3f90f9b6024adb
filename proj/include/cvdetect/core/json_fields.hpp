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
#include <initializer_list>
#include <optional>
#include <string>

#include "json.hpp"

#include "cvdetect/core/error.hpp"

namespace cvdetect::json {

using nlohmann::json;

/// Typed reader over one JSON object that reports failures as ValidationError with a JSON pointer.
class Fields {
 public:
  Fields(const json& obj, std::string pointer) : obj_(obj), ptr_(std::move(pointer)) {
    if (!obj_.is_object()) throw ValidationError(ptr_.empty() ? "/" : ptr_, "expected an object");
  }

  const std::string& pointer() const { return ptr_; }
  std::string at(const std::string& key) const { return ptr_ + "/" + key; }
  bool has(const std::string& key) const { return obj_.contains(key) && !obj_.at(key).is_null(); }

  template <typename V>
  V required(const std::string& key) const {
    if (!has(key)) throw ValidationError(at(key), "required field is missing");
    return convert<V>(key);
  }

  template <typename V>
  V optional(const std::string& key, V fallback) const {
    return has(key) ? convert<V>(key) : fallback;
  }

  template <typename V>
  std::optional<V> maybe(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return convert<V>(key);
  }

  Fields object(const std::string& key) const { return Fields(obj_.at(key), at(key)); }
  const json& raw(const std::string& key) const { return obj_.at(key); }

  /// Reject keys outside `allowed`.
  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [k, v] : obj_.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }))
        throw ValidationError(at(k), "unknown field");
    }
  }

 private:
  template <typename V>
  V convert(const std::string& key) const {
    const json& v = obj_.at(key);
    if constexpr (std::is_same_v<V, bool>) {
      if (!v.is_boolean()) throw ValidationError(at(key), "expected a boolean");
    } else if constexpr (std::is_integral_v<V>) {
      if (!v.is_number_integer()) throw ValidationError(at(key), "expected an integer");
      if constexpr (std::is_unsigned_v<V>)
        if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
          throw ValidationError(at(key), "expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<V>) {
      if (!v.is_number()) throw ValidationError(at(key), "expected a number");
    } else if constexpr (std::is_same_v<V, std::string>) {
      if (!v.is_string()) throw ValidationError(at(key), "expected a string");
    }
    try {
      return v.get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(at(key), e.what());
    }
  }

  const json& obj_;
  std::string ptr_;
};

/// Validation helper: throw at `pointer` unless `ok`.
inline void require(bool ok, const std::string& pointer, const std::string& what) {
  if (!ok) throw ValidationError(pointer, what);
}

}  // namespace cvdetect::json
