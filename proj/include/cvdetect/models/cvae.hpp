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
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cvdetect/core/rng.hpp"
#include "cvdetect/core/tensor.hpp"
#include "cvdetect/data/dataset.hpp"
#include "cvdetect/models/classifier.hpp"
#include "cvdetect/models/train_config.hpp"
#include "cvdetect/nn/layers.hpp"
#include "cvdetect/nn/loss.hpp"

namespace cvdetect {

/// Layer sizes of one class's encoder/decoder pair. Three stride-2 4x4 convolutions take an
/// image_size x image_size input down to image_size/8; the linear heads are sized from that.
struct CvaeArch {
  std::size_t channels = 1;
  std::size_t image_size = 32;
  std::size_t z_dim = 128;
  std::array<std::size_t, 3> widths{32, 64, 128};

  std::size_t bottleneck() const { return image_size / 8; }
  std::size_t flatten_width() const { return widths[2] * bottleneck() * bottleneck(); }

  std::string id() const {
    std::ostringstream os;
    os << "cvae/c" << channels << "/s" << image_size << "/z" << z_dim << "/w" << widths[0] << "-" << widths[1] << "-"
       << widths[2];
    return os.str();
  }

  void validate() const {
    if (image_size % 8 != 0 || image_size == 0) throw ArgumentError("CVAE image size must be a positive multiple of 8");
    if (channels == 0 || z_dim == 0 || widths[0] == 0 || widths[1] == 0 || widths[2] == 0)
      throw ArgumentError("CVAE sizes must be positive");
  }

  friend bool operator==(const CvaeArch&, const CvaeArch&) = default;
};

/// Encoder trunk, mean/log-variance heads and decoder (emitting logits) for one condition.
template <typename T>
struct CvaeClassNet {
  nn::Sequential<T> encoder, mu_head, logvar_head, decoder;

  explicit CvaeClassNet(const CvaeArch& a) {
    const auto [w1, w2, w3] = a.widths;
    encoder.add(nn::Conv2d<T>(a.channels, w1, 4, 2, 1)).add(nn::BatchNorm2d<T>(w1)).add(nn::ReLU<T>{});
    encoder.add(nn::Conv2d<T>(w1, w2, 4, 2, 1)).add(nn::BatchNorm2d<T>(w2)).add(nn::ReLU<T>{});
    encoder.add(nn::Conv2d<T>(w2, w3, 4, 2, 1)).add(nn::BatchNorm2d<T>(w3));
    encoder.add(nn::Reshape<T>({a.flatten_width()}));
    mu_head.add(nn::Linear<T>(a.flatten_width(), a.z_dim));
    logvar_head.add(nn::Linear<T>(a.flatten_width(), a.z_dim));
    decoder.add(nn::Linear<T>(a.z_dim, a.flatten_width()));
    decoder.add(nn::Reshape<T>({w3, a.bottleneck(), a.bottleneck()}));
    decoder.add(nn::ConvTranspose2d<T>(w3, w2, 4, 2, 1)).add(nn::BatchNorm2d<T>(w2)).add(nn::ReLU<T>{});
    decoder.add(nn::ConvTranspose2d<T>(w2, w1, 4, 2, 1)).add(nn::BatchNorm2d<T>(w1)).add(nn::ReLU<T>{});
    decoder.add(nn::ConvTranspose2d<T>(w1, a.channels, 4, 2, 1));
  }

  void init(Rng& rng) {
    encoder.init(rng);
    mu_head.init(rng);
    logvar_head.init(rng);
    decoder.init(rng);
  }

  std::vector<Tensor<T>*> params() {
    std::vector<Tensor<T>*> out;
    for (auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
      auto p = s->params();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  std::vector<const Tensor<T>*> params() const {
    std::vector<const Tensor<T>*> out;
    for (const auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
      auto p = s->params();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  std::vector<Tensor<T>*> buffers() {
    std::vector<Tensor<T>*> out;
    for (auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
      auto p = s->buffers();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
  std::vector<const Tensor<T>*> buffers() const {
    std::vector<const Tensor<T>*> out;
    for (const auto* s : {&encoder, &mu_head, &logvar_head, &decoder}) {
      auto p = s->buffers();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }
};

/// Conditional VAE with an independent encoder/decoder parameter set per class.
template <typename T>
struct CVAEModel {
  CvaeArch arch;
  std::vector<CvaeClassNet<T>> nets;  ///< indexed by condition
  std::string dataset_tag;
  std::uint64_t seed = 0;

  std::size_t z_dim() const noexcept { return arch.z_dim; }
  std::string arch_id() const { return arch.id(); }

  const CvaeClassNet<T>& net(int cond) const {
    if (cond < 0 || static_cast<std::size_t>(cond) >= nets.size())
      throw ArgumentError("unknown CVAE condition " + std::to_string(cond));
    return nets[static_cast<std::size_t>(cond)];
  }
  CvaeClassNet<T>& net(int cond) {
    return const_cast<CvaeClassNet<T>&>(static_cast<const CVAEModel&>(*this).net(cond));
  }
};

template <typename T>
CVAEModel<T> make_cvae(const CvaeArch& arch, std::uint64_t seed, int num_classes = kNumClasses) {
  arch.validate();
  CVAEModel<T> m{arch, {}, {}, seed};
  for (int c = 0; c < num_classes; ++c) {
    m.nets.emplace_back(arch);
    Rng rng(derive_seed(seed, "cvae-init-" + std::to_string(c)));
    m.nets.back().init(rng);
  }
  return m;
}

template <typename T>
struct Encoding {
  Tensor<T> mu, logvar;  ///< each (n, z_dim)
};

namespace detail {

template <typename T>
void check_cvae_input(const CVAEModel<T>& m, const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(1) != m.arch.channels || x.dim(2) != m.arch.image_size || x.dim(3) != m.arch.image_size)
    throw ArgumentError("CVAE expects (n," + std::to_string(m.arch.channels) + "," + std::to_string(m.arch.image_size) +
                        "," + std::to_string(m.arch.image_size) + ") input, got " + shape_str(x.shape()));
}

template <typename T>
void sigmoid_inplace(Tensor<T>& t) {
  for (auto& v : t.storage()) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

}  // namespace detail

/// (mu, log sigma^2) of Q(z | x, cond), eval mode.
template <typename T>
Encoding<T> cvae_encode(const CVAEModel<T>& model, const Tensor<T>& x, int cond) {
  const auto& net = model.net(cond);
  detail::check_cvae_input(model, x);
  if (x.batch() == 0) return {Tensor<T>({0, model.arch.z_dim}), Tensor<T>({0, model.arch.z_dim})};
  std::vector<Tensor<T>> mus, lvs;
  for (std::size_t b = 0; b < x.batch(); b += kInferenceChunk) {
    const auto h = net.encoder.forward(x.slice(b, std::min(x.batch(), b + kInferenceChunk)), nn::Mode::kEval);
    mus.push_back(net.mu_head.forward(h, nn::Mode::kEval));
    lvs.push_back(net.logvar_head.forward(h, nn::Mode::kEval));
  }
  return {concat<T>(mus), concat<T>(lvs)};
}

/// z = mu + exp(logvar / 2) * eta for a given standard-normal draw eta.
template <typename T>
Tensor<T> reparameterize(const Tensor<T>& mu, const Tensor<T>& logvar, const Tensor<T>& eta) {
  if (mu.shape() != logvar.shape() || mu.shape() != eta.shape()) throw ArgumentError("reparameterize: shape mismatch");
  Tensor<T> z(mu.shape());
  for (std::size_t i = 0; i < z.size(); ++i)
    z[i] = static_cast<T>(mu[i] + std::exp(0.5 * static_cast<double>(logvar[i])) * eta[i]);
  return z;
}

template <typename T>
Tensor<T> standard_normal(const Shape& shape, Rng& rng) {
  Tensor<T> eta(shape);
  for (auto& v : eta.storage()) v = static_cast<T>(rng.normal());
  return eta;
}

template <typename T>
Tensor<T> reparameterize(const Tensor<T>& mu, const Tensor<T>& logvar, Rng& rng) {
  return reparameterize(mu, logvar, standard_normal<T>(mu.shape(), rng));
}

/// Decoder logits (pre-sigmoid), eval mode.
template <typename T>
Tensor<T> cvae_decode_logits(const CVAEModel<T>& model, const Tensor<T>& z, int cond) {
  const auto& net = model.net(cond);
  if (z.rank() != 2 || z.dim(1) != model.arch.z_dim)
    throw ArgumentError("CVAE decoder expects (n," + std::to_string(model.arch.z_dim) + ") latents, got " +
                        shape_str(z.shape()));
  std::vector<Tensor<T>> parts;
  for (std::size_t b = 0; b < z.batch(); b += kInferenceChunk)
    parts.push_back(net.decoder.forward(z.slice(b, std::min(z.batch(), b + kInferenceChunk)), nn::Mode::kEval));
  if (parts.empty()) return Tensor<T>({0, model.arch.channels, model.arch.image_size, model.arch.image_size});
  return concat<T>(parts);
}

/// Reconstructed images in [0,1].
template <typename T>
Tensor<T> cvae_decode(const CVAEModel<T>& model, const Tensor<T>& z, int cond) {
  auto y = cvae_decode_logits(model, z, cond);
  detail::sigmoid_inplace(y);
  return y;
}

/// decode(mu(x, cond), cond): the deterministic mean-path reconstruction.
template <typename T>
Tensor<T> cvae_reconstruct(const CVAEModel<T>& model, const Tensor<T>& x, int cond) {
  return cvae_decode(model, cvae_encode(model, x, cond).mu, cond);
}

/// Vector-Jacobian product of the encoder: d/dx [ sum g_mu . mu(x) + sum g_logvar . logvar(x) ].
template <typename T>
Tensor<T> cvae_encoder_vjp(const CVAEModel<T>& model, const Tensor<T>& x, int cond, const Tensor<T>& g_mu,
                           const Tensor<T>& g_logvar) {
  const auto& net = model.net(cond);
  detail::check_cvae_input(model, x);
  nn::Tape<T> te, tm, tl;
  const auto h = net.encoder.forward(x, nn::Mode::kEval, &te);
  net.mu_head.forward(h, nn::Mode::kEval, &tm);
  net.logvar_head.forward(h, nn::Mode::kEval, &tl);
  auto gh = net.mu_head.backward(g_mu, tm);
  gh += net.logvar_head.backward(g_logvar, tl);
  return net.encoder.backward(gh, te);
}

/// Vector-Jacobian product of the decoder output (post-sigmoid): d/dz sum g_out . decode(z).
template <typename T>
Tensor<T> cvae_decoder_vjp(const CVAEModel<T>& model, const Tensor<T>& z, int cond, const Tensor<T>& g_out) {
  const auto& net = model.net(cond);
  nn::Tape<T> td;
  auto y = net.decoder.forward(z, nn::Mode::kEval, &td);
  detail::sigmoid_inplace(y);
  Tensor<T> g = g_out;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (T{1} - y[i]);
  return net.decoder.backward(g, td);
}

/// Batch-averaged CVAE objective: BCE summed over pixels plus KL summed over latent dims.
struct CvaeLoss {
  double total = 0, bce = 0, kl = 0;
};

template <typename T>
CvaeLoss cvae_loss(const CVAEModel<T>& model, const Tensor<T>& x, int cond, Rng& rng,
                   nn::Mode mode = nn::Mode::kEval) {
  const auto& net = model.net(cond);
  detail::check_cvae_input(model, x);
  const auto h = net.encoder.forward(x, mode);
  const auto mu = net.mu_head.forward(h, mode);
  const auto lv = net.logvar_head.forward(h, mode);
  const auto z = reparameterize(mu, lv, rng);
  const auto logits = net.decoder.forward(z, mode);
  const auto bce = nn::bce_with_logits(logits, x).loss;
  const auto kls = nn::kl_standard_normal(mu, lv);
  const double kl = std::accumulate(kls.begin(), kls.end(), 0.0) / static_cast<double>(x.batch());
  CvaeLoss out{bce + kl, bce, kl};
  if (!std::isfinite(out.total)) throw NumericError("CVAE loss is not finite");
  return out;
}

/// Gradients of one class's parameters, in CvaeClassNet::params() order.
template <typename T>
struct CvaeGrads {
  std::vector<Tensor<T>> encoder, mu_head, logvar_head, decoder;

  explicit CvaeGrads(const CvaeClassNet<T>& net)
      : encoder(net.encoder.zero_grads()), mu_head(net.mu_head.zero_grads()),
        logvar_head(net.logvar_head.zero_grads()), decoder(net.decoder.zero_grads()) {}

  std::vector<Tensor<T>> flat() && {
    std::vector<Tensor<T>> out;
    for (auto* v : {&encoder, &mu_head, &logvar_head, &decoder})
      for (auto& t : *v) out.push_back(std::move(t));
    return out;
  }
};

/// One train-mode forward/backward on a batch of class-`cond` images with noise `eta`.
/// Accumulates into `grads`, folds batch-norm statistics into the running estimates and
/// returns the batch loss. Only θ(cond) is touched.
template <typename T>
CvaeLoss cvae_forward_backward(CVAEModel<T>& model, int cond, const Tensor<T>& x, const Tensor<T>& eta,
                               CvaeGrads<T>& grads) {
  auto& net = model.net(cond);
  const std::size_t n = x.batch();
  const double inv_n = 1.0 / static_cast<double>(n);
  nn::Tape<T> te, tm, tl, td;
  const auto h = net.encoder.forward(x, nn::Mode::kTrain, &te);
  const auto mu = net.mu_head.forward(h, nn::Mode::kTrain, &tm);
  const auto lv = net.logvar_head.forward(h, nn::Mode::kTrain, &tl);
  const auto z = reparameterize(mu, lv, eta);
  const auto logits = net.decoder.forward(z, nn::Mode::kTrain, &td);
  const auto bce = nn::bce_with_logits(logits, x);
  const auto kls = nn::kl_standard_normal(mu, lv);
  CvaeLoss loss{0, bce.loss, std::accumulate(kls.begin(), kls.end(), 0.0) * inv_n};
  loss.total = loss.bce + loss.kl;

  const auto gz = net.decoder.backward(bce.grad, td, &grads.decoder);
  Tensor<T> gmu(mu.shape()), glv(lv.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double sd = std::exp(0.5 * static_cast<double>(lv[i]));
    gmu[i] = static_cast<T>(gz[i] + mu[i] * inv_n);
    glv[i] = static_cast<T>(gz[i] * eta[i] * 0.5 * sd + 0.5 * (sd * sd - 1.0) * inv_n);
  }
  auto gh = net.mu_head.backward(gmu, tm, &grads.mu_head);
  gh += net.logvar_head.backward(glv, tl, &grads.logvar_head);
  net.encoder.backward(gh, te, &grads.encoder);

  net.encoder.commit(te);
  net.decoder.commit(td);
  return loss;
}

/// Train θ(cond) on `images` (all of class `cond`). Returns the mean loss per epoch.
template <typename T>
std::vector<double> fit_cvae_class(CVAEModel<T>& model, int cond, const Tensor<T>& images, const TrainConfig& cfg,
                                   const TrainLog& log = {}) {
  cfg.validate();
  if (images.batch() == 0) throw ArgumentError("no training images for CVAE class " + std::to_string(cond));
  auto& net = model.net(cond);
  detail::Optimizer<T> opt(cfg, net.params());
  Rng rng(derive_seed(cfg.seed, "cvae-train-" + std::to_string(cond)));
  std::vector<std::size_t> order(images.batch());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(order.size(), b + cfg.batch_size);
      // batch norm needs two samples; drop a trailing singleton batch
      if (e - b < 2 && b > 0) break;
      std::span<const std::size_t> idx(order.data() + b, e - b);
      const auto xb = images.gather(idx);
      const auto eta = standard_normal<T>({xb.batch(), model.arch.z_dim}, rng);
      CvaeGrads<T> grads(net);
      const auto loss = cvae_forward_backward(model, cond, xb, eta, grads);
      if (!std::isfinite(loss.total))
        throw TrainingError("CVAE loss for class " + std::to_string(cond) + " is not finite", epoch);
      opt.step(std::move(grads).flat());
      total += loss.total * static_cast<double>(idx.size());
    }
    history.push_back(total / static_cast<double>(order.size()));
    if (log) {
      std::ostringstream os;
      os << "cvae class " << cond << " epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << history.back();
      log(os.str());
    }
  }
  return history;
}

/// Train every class's encoder/decoder on the clean images of that class.
template <typename T = float>
CVAEModel<T> train_cvae(const LabeledDataset& data, const TrainConfig& cfg, CvaeArch arch = {},
                        const TrainLog& log = {}) {
  cfg.validate();
  arch.channels = data.channels();
  auto model = make_cvae<T>(arch, cfg.seed);
  model.dataset_tag = data.tag;
  const auto images = data.images.template cast<T>();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto idx = data.indices_of(c);
    if (idx.empty()) continue;
    fit_cvae_class(model, c, images.gather(idx), cfg, log);
  }
  return model;
}

}  // namespace cvdetect
