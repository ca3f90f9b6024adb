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

#include "cvdetect/attacks/attacks.hpp"
#include "cvdetect/attacks/config.hpp"
#include "cvdetect/attacks/io.hpp"
#include "cvdetect/data/cifar10.hpp"
#include "cvdetect/data/dataset.hpp"
#include "cvdetect/data/idx.hpp"
#include "cvdetect/detector/detect.hpp"
#include "cvdetect/detector/recon.hpp"
#include "cvdetect/detector/reference.hpp"
#include "cvdetect/evaluation/metrics.hpp"
#include "cvdetect/evaluation/report.hpp"
#include "cvdetect/models/checkpoint.hpp"
#include "cvdetect/models/classifier.hpp"
#include "cvdetect/models/cvae.hpp"
#include "cvdetect/pipeline/commands.hpp"
