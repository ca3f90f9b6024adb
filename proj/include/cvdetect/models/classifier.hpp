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
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cvdetect/core/rng.hpp"
#include "cvdetect/core/tensor.hpp"
#include "cvdetect/data/dataset.hpp"
#include "cvdetect/models/train_config.hpp"
#include "cvdetect/nn/layers.hpp"
#include "cvdetect/nn/loss.hpp"
#include "cvdetect/nn/optim.hpp"

namespace cvdetect {

/// Target image classifier producing (n,10) logits.
template <typename T>
struct ClassifierModel {
  nn::Sequential<T> net;
  std::string profile;  ///< "cnn4", "resnet18", "resnet18-narrow" or "custom"
  std::size_t channels = 1;
  std::size_t num_classes = kNumClasses;
  std::string dataset_tag;
  std::uint64_t seed = 0;

  std::string arch_id() const { return "classifier/" + profile + "/c" + std::to_string(channels); }
};

namespace detail {

template <typename T>
void add_conv_bn(nn::Sequential<T>& s, std::size_t in, std::size_t out, std::size_t k, std::size_t stride,
                 std::size_t pad, bool relu) {
  s.add(nn::Conv2d<T>(in, out, k, stride, pad));
  s.add(nn::BatchNorm2d<T>(out));
  if (relu) s.add(nn::ReLU<T>{});
}

template <typename T>
nn::Layer<T> basic_block(std::size_t in, std::size_t out, std::size_t stride) {
  std::vector<nn::Layer<T>> main{{nn::Conv2d<T>(in, out, 3, stride, 1)}, {nn::BatchNorm2d<T>(out)}, {nn::ReLU<T>{}},
                                 {nn::Conv2d<T>(out, out, 3, 1, 1)}, {nn::BatchNorm2d<T>(out)}};
  std::vector<nn::Layer<T>> shortcut;
  if (stride != 1 || in != out) shortcut = {{nn::Conv2d<T>(in, out, 1, stride, 0)}, {nn::BatchNorm2d<T>(out)}};
  return {nn::Residual<T>(std::move(main), std::move(shortcut))};
}

template <typename T>
nn::Sequential<T> resnet18(std::size_t channels, std::size_t base, std::size_t classes) {
  nn::Sequential<T> s;
  add_conv_bn(s, channels, base, 3, 1, 1, true);
  std::size_t in = base;
  for (std::size_t stage = 0; stage < 4; ++stage) {
    const std::size_t out = base << stage;
    s.add(basic_block<T>(in, out, stage == 0 ? 1 : 2).op);
    s.add(basic_block<T>(out, out, 1).op);
    in = out;
  }
  s.add(nn::GlobalAvgPool<T>{});
  s.add(nn::Linear<T>(in, classes));
  return s;
}

template <typename T>
nn::Sequential<T> cnn4(std::size_t channels, std::size_t classes) {
  nn::Sequential<T> s;
  s.add(nn::Conv2d<T>(channels, 32, 3, 1, 1)).add(nn::ReLU<T>{});
  s.add(nn::Conv2d<T>(32, 64, 3, 2, 1)).add(nn::ReLU<T>{});
  s.add(nn::Conv2d<T>(64, 64, 3, 2, 1)).add(nn::ReLU<T>{});
  s.add(nn::Reshape<T>({64 * 8 * 8}));
  s.add(nn::Linear<T>(64 * 8 * 8, 128)).add(nn::ReLU<T>{});
  s.add(nn::Linear<T>(128, classes));
  return s;
}

}  // namespace detail

/// Build an initialised classifier for 32x32 inputs with `channels` colour planes.
template <typename T>
ClassifierModel<T> make_classifier(const std::string& profile, std::size_t channels, std::uint64_t seed) {
  ClassifierModel<T> m;
  m.profile = profile;
  m.channels = channels;
  m.seed = seed;
  if (profile == "cnn4")
    m.net = detail::cnn4<T>(channels, kNumClasses);
  else if (profile == "resnet18")
    m.net = detail::resnet18<T>(channels, 64, kNumClasses);
  else if (profile == "resnet18-narrow")
    m.net = detail::resnet18<T>(channels, 16, kNumClasses);
  else
    throw ArgumentError("unknown classifier profile '" + profile + "'");
  Rng rng(derive_seed(seed, "classifier-init"));
  m.net.init(rng);
  return m;
}

inline constexpr std::size_t kInferenceChunk = 256;

/// Logits (n, num_classes) in eval mode.
template <typename T>
Tensor<T> classifier_forward(const ClassifierModel<T>& model, const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != model.channels)
    throw ArgumentError("classifier expects (n," + std::to_string(model.channels) + ",h,w) input, got " +
                        shape_str(x.shape()));
  if (x.batch() <= kInferenceChunk) return model.net.forward(x, nn::Mode::kEval);
  std::vector<Tensor<T>> parts;
  for (std::size_t b = 0; b < x.batch(); b += kInferenceChunk)
    parts.push_back(model.net.forward(x.slice(b, std::min(x.batch(), b + kInferenceChunk)), nn::Mode::kEval));
  return concat<T>(parts);
}

/// Row-wise argmax; ties go to the smaller class index.
template <typename T>
std::vector<int> argmax_rows(const Tensor<T>& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.ptr() + i * k;
    out[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return out;
}

template <typename T>
std::vector<int> classifier_predict(const ClassifierModel<T>& model, const Tensor<T>& x) {
  return argmax_rows(classifier_forward(model, x));
}

/// Cross-entropy of `labels` at `x` (summed over the batch) and its gradient w.r.t. `x`.
template <typename T>
nn::LossAndGrad<T> classifier_loss_input_grad(const ClassifierModel<T>& model, const Tensor<T>& x,
                                              std::span<const int> labels) {
  nn::Tape<T> tape;
  const auto logits = model.net.forward(x, nn::Mode::kEval, &tape);
  auto ce = nn::softmax_cross_entropy(logits, labels, nn::Reduction::kSum);
  return {ce.loss, model.net.backward(ce.grad, tape)};
}

/// Gradient of sum_i weights(i,:) . logits(x_i) w.r.t. x.
template <typename T>
Tensor<T> classifier_logit_input_grad(const ClassifierModel<T>& model, const Tensor<T>& x,
                                      const Tensor<T>& logit_weights) {
  nn::Tape<T> tape;
  model.net.forward(x, nn::Mode::kEval, &tape);
  return model.net.backward(logit_weights, tape);
}

namespace detail {

template <typename T>
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::vector<Tensor<T>*> params) : impl_(make(cfg, std::move(params))) {}
  void step(const std::vector<Tensor<T>>& grads) {
    std::visit([&](auto& o) { o.step(grads); }, impl_);
  }

 private:
  using Impl = std::variant<nn::Adam<T>, nn::Sgd<T>>;
  static Impl make(const TrainConfig& cfg, std::vector<Tensor<T>*> params) {
    if (cfg.optimizer == "adam") return nn::Adam<T>(std::move(params), cfg.learning_rate);
    return nn::Sgd<T>(std::move(params), cfg.learning_rate, 0.9);
  }
  Impl impl_;
};

}  // namespace detail

/// Train `model` in place on `data`; returns the mean training loss of each epoch.
template <typename T>
std::vector<double> fit_classifier(ClassifierModel<T>& model, const LabeledDataset& data, const TrainConfig& cfg,
                                   const TrainLog& log = {}) {
  cfg.validate();
  if (data.size() == 0) throw ArgumentError("empty training set");
  const Tensor<T> images = data.images.template cast<T>();
  detail::Optimizer<T> opt(cfg, model.net.params());
  Rng rng(derive_seed(cfg.seed, "classifier-shuffle"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + b, e - b);
      const auto xb = images.gather(idx);
      std::vector<int> yb;
      for (auto i : idx) yb.push_back(data.labels[i]);
      nn::Tape<T> tape;
      const auto logits = model.net.forward(xb, nn::Mode::kTrain, &tape);
      const auto ce = nn::softmax_cross_entropy(logits, yb);
      if (!std::isfinite(ce.loss)) throw TrainingError("classifier loss is not finite", epoch);
      auto grads = model.net.zero_grads();
      model.net.backward(ce.grad, tape, &grads);
      opt.step(grads);
      model.net.commit(tape);
      total += ce.loss * static_cast<double>(idx.size());
      seen += idx.size();
    }
    history.push_back(total / static_cast<double>(seen));
    if (log) {
      std::ostringstream os;
      os << "classifier epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << history.back();
      log(os.str());
    }
  }
  return history;
}

template <typename T = float>
ClassifierModel<T> train_classifier(const LabeledDataset& data, const TrainConfig& cfg,
                                    const std::string& profile = "cnn4", const TrainLog& log = {}) {
  auto model = make_classifier<T>(profile, data.channels(), cfg.seed);
  model.dataset_tag = data.tag;
  fit_classifier(model, data, cfg, log);
  return model;
}

}  // namespace cvdetect
