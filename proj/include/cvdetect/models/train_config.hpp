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
#include <functional>
#include <string>

#include "cvdetect/core/error.hpp"

namespace cvdetect {

/// Optimisation settings shared by classifier and CVAE training.
struct TrainConfig {
  int epochs = 20;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  ///< "adam" or "sgd"
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs <= 0) throw ArgumentError("epochs must be positive");
    if (batch_size == 0) throw ArgumentError("batch size must be positive");
    if (!(learning_rate > 0)) throw ArgumentError("learning rate must be positive");
    if (optimizer != "adam" && optimizer != "sgd") throw ArgumentError("unknown optimizer '" + optimizer + "'");
  }
};

/// Receives one line per training epoch.
using TrainLog = std::function<void(const std::string&)>;

}  // namespace cvdetect
