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

#include <stdexcept>
#include <string>

namespace cvdetect {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data (bad magic, truncated record, bad length).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid data whose values are out of range (e.g. label byte > 9).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must agree do not (counts, dataset tags, model ids).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training diverged. Carries the epoch at which it happened.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked before its prerequisites exist.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Config document violates the schema. `pointer()` is a JSON pointer.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& pointer, const std::string& what)
      : Error(pointer + ": " + what), pointer_(pointer) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

/// A pipeline stage's input artifact is missing or stale.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& what, std::string prerequisite)
      : Error(what + " (run `" + prerequisite + "` first)"), prerequisite_(std::move(prerequisite)) {}
  const std::string& prerequisite() const noexcept { return prerequisite_; }

 private:
  std::string prerequisite_;
};

}  // namespace cvdetect
