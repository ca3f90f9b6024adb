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

#include <cmath>
#include <string>
#include <vector>

#include "cvdetect/core/tensor.hpp"

namespace cvdetect::nn {

/// Adam with bias correction. Owns first/second moment state for a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Tensor<T>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    for (const auto* p : params_) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }

  void step(const std::vector<Tensor<T>>& grads) {
    if (grads.size() != params_.size()) throw ArgumentError("adam: gradient list does not match parameters");
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      const auto& g = grads[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = static_cast<T>(b1_ * m[i] + (1 - b1_) * g[i]);
        v[i] = static_cast<T>(b2_ * v[i] + (1 - b2_) * double(g[i]) * g[i]);
        p[i] -= static_cast<T>(lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
      }
    }
  }

  void set_lr(double lr) noexcept { lr_ = lr; }
  double lr() const noexcept { return lr_; }

 private:
  std::vector<Tensor<T>*> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
};

/// Plain SGD with optional momentum.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<Tensor<T>*> params, double lr, double momentum = 0.0)
      : params_(std::move(params)), lr_(lr), momentum_(momentum) {
    for (const auto* p : params_) vel_.emplace_back(p->shape());
  }

  void step(const std::vector<Tensor<T>>& grads) {
    if (grads.size() != params_.size()) throw ArgumentError("sgd: gradient list does not match parameters");
    for (std::size_t k = 0; k < params_.size(); ++k)
      for (std::size_t i = 0; i < params_[k]->size(); ++i) {
        vel_[k][i] = static_cast<T>(momentum_ * vel_[k][i] + grads[k][i]);
        (*params_[k])[i] -= static_cast<T>(lr_ * vel_[k][i]);
      }
  }

 private:
  std::vector<Tensor<T>*> params_;
  std::vector<Tensor<T>> vel_;
  double lr_, momentum_;
};

}  // namespace cvdetect::nn
