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
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "cvdetect/core/rng.hpp"
#include "cvdetect/core/tensor.hpp"
#include "cvdetect/nn/im2col.hpp"

namespace cvdetect::nn {

enum class Mode { kTrain, kEval };

// Every layer exposes the same surface:
//   forward(x, mode, cache*)       pure; fills `cache` when non-null
//   backward(gy, cache, grads*)    returns dL/dx; when `grads` is non-null it points at this
//                                  layer's slice of the gradient list and is accumulated into
//   params() / buffers()           learnable tensors and non-learnable state, in a fixed order

namespace detail {

template <typename T>
void uniform_fill(Tensor<T>& t, double bound, Rng& rng) {
  for (auto& v : t.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Samples per im2col block, keeping the column matrix near 2k columns so the GEMM stays cache resident.
inline std::size_t chunk_samples(std::size_t out_pixels) {
  return std::max<std::size_t>(1, 2048 / std::max<std::size_t>(1, out_pixels));
}

}  // namespace detail

template <typename T>
class Conv2d {
 public:
  struct Cache {
    Tensor<T> input;
  };

  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad)
      : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
        weight_({out_ch, in_ch, kernel, kernel}), bias_({out_ch}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * k_ * k_));
    detail::uniform_fill(weight_, bound, rng);
    detail::uniform_fill(bias_, bound, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    if (x.rank() != 4 || x.dim(1) != in_)
      throw ArgumentError("conv2d expects (n," + std::to_string(in_) + ",h,w), got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0);
    const auto g = ConvGeometry::forward(in_, x.dim(2), x.dim(3), k_, s_, p_);
    const std::size_t chunk = detail::chunk_samples(g.out_pixels()), in_size = in_ * x.dim(2) * x.dim(3);
    const std::size_t out_size = out_ * g.out_pixels();
    Tensor<T> y({n, out_, g.out_h, g.out_w});
    std::vector<T> cols(g.col_rows() * chunk * g.out_pixels()), ycm(out_ * chunk * g.out_pixels());
    for (std::size_t b = 0; b < n; b += chunk) {
      const std::size_t m = std::min(chunk, n - b), cn = m * g.out_pixels();
      im2col(x.ptr() + b * in_size, m, g, cols.data());
      MatrixMap<T>(ycm.data(), out_, cn).noalias() =
          weight_.matrix(out_, g.col_rows()) * ConstMatrixMap<T>(cols.data(), g.col_rows(), cn);
      from_channel_major(ycm.data(), m, out_, g.out_pixels(), y.ptr() + b * out_size);
    }
    add_bias(y);
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const {
    const auto& x = cache.input;
    const std::size_t n = x.dim(0);
    const auto g = ConvGeometry::forward(in_, x.dim(2), x.dim(3), k_, s_, p_);
    const std::size_t chunk = detail::chunk_samples(g.out_pixels()), in_size = in_ * x.dim(2) * x.dim(3);
    const std::size_t out_size = out_ * g.out_pixels();
    std::vector<T> cols(g.col_rows() * chunk * g.out_pixels()), gcm(out_ * chunk * g.out_pixels());
    Tensor<T> gx(x.shape());
    for (std::size_t b = 0; b < n; b += chunk) {
      const std::size_t m = std::min(chunk, n - b), cn = m * g.out_pixels();
      to_channel_major(gy.ptr() + b * out_size, m, out_, g.out_pixels(), gcm.data());
      const ConstMatrixMap<T> G(gcm.data(), out_, cn);
      if (grads) {
        im2col(x.ptr() + b * in_size, m, g, cols.data());
        grads[0].matrix(out_, g.col_rows()).noalias() += G * ConstMatrixMap<T>(cols.data(), g.col_rows(), cn).transpose();
        grads[1].matrix(out_, 1).noalias() += G.rowwise().sum();
      }
      MatrixMap<T>(cols.data(), g.col_rows(), cn).noalias() = weight_.matrix(out_, g.col_rows()).transpose() * G;
      col2im(cols.data(), m, g, gx.ptr() + b * in_size);
    }
    return gx;
  }

  std::vector<Tensor<T>*> params() { return {&weight_, &bias_}; }
  std::vector<const Tensor<T>*> params() const { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> buffers() { return {}; }
  std::vector<const Tensor<T>*> buffers() const { return {}; }

 private:
  void add_bias(Tensor<T>& y) const {
    const std::size_t n = y.dim(0), s = y.dim(2) * y.dim(3);
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t c = 0; c < out_; ++c) {
        T* p = y.ptr() + (ni * out_ + c) * s;
        for (std::size_t i = 0; i < s; ++i) p[i] += bias_[c];
      }
  }

  std::size_t in_, out_, k_, s_, p_;
  Tensor<T> weight_, bias_;
};

/// Transposed convolution; weight layout (in, out, k, k).
template <typename T>
class ConvTranspose2d {
 public:
  struct Cache {
    Tensor<T> input;
  };

  ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride, std::size_t pad)
      : in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
        weight_({in_ch, out_ch, kernel, kernel}), bias_({out_ch}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(out_ * k_ * k_));
    detail::uniform_fill(weight_, bound, rng);
    detail::uniform_fill(bias_, bound, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    if (x.rank() != 4 || x.dim(1) != in_)
      throw ArgumentError("conv_transpose2d expects (n," + std::to_string(in_) + ",h,w), got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0);
    const auto g = geometry(x);
    const std::size_t chunk = detail::chunk_samples(g.out_pixels()), in_size = in_ * g.out_pixels();
    const std::size_t s = g.height * g.width, out_size = out_ * s;
    Tensor<T> y({n, out_, g.height, g.width});
    std::vector<T> xcm(in_ * chunk * g.out_pixels()), cols(g.col_rows() * chunk * g.out_pixels());
    for (std::size_t b = 0; b < n; b += chunk) {
      const std::size_t m = std::min(chunk, n - b), cn = m * g.out_pixels();
      to_channel_major(x.ptr() + b * in_size, m, in_, g.out_pixels(), xcm.data());
      MatrixMap<T>(cols.data(), g.col_rows(), cn).noalias() =
          weight_.matrix(in_, g.col_rows()).transpose() * ConstMatrixMap<T>(xcm.data(), in_, cn);
      col2im(cols.data(), m, g, y.ptr() + b * out_size);
    }
    for (std::size_t ni = 0; ni < n; ++ni)
      for (std::size_t c = 0; c < out_; ++c) {
        T* p = y.ptr() + (ni * out_ + c) * s;
        for (std::size_t i = 0; i < s; ++i) p[i] += bias_[c];
      }
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const {
    const auto& x = cache.input;
    const std::size_t n = x.dim(0);
    const auto g = geometry(x);
    const std::size_t chunk = detail::chunk_samples(g.out_pixels()), in_size = in_ * g.out_pixels();
    const std::size_t s = g.height * g.width, out_size = out_ * s;
    std::vector<T> xcm(in_ * chunk * g.out_pixels()), gcols(g.col_rows() * chunk * g.out_pixels());
    Tensor<T> gx(x.shape());
    for (std::size_t b = 0; b < n; b += chunk) {
      const std::size_t m = std::min(chunk, n - b), cn = m * g.out_pixels();
      im2col(gy.ptr() + b * out_size, m, g, gcols.data());
      const ConstMatrixMap<T> GC(gcols.data(), g.col_rows(), cn);
      if (grads) {
        to_channel_major(x.ptr() + b * in_size, m, in_, g.out_pixels(), xcm.data());
        grads[0].matrix(in_, g.col_rows()).noalias() += ConstMatrixMap<T>(xcm.data(), in_, cn) * GC.transpose();
      }
      MatrixMap<T>(xcm.data(), in_, cn).noalias() = weight_.matrix(in_, g.col_rows()) * GC;
      from_channel_major(xcm.data(), m, in_, g.out_pixels(), gx.ptr() + b * in_size);
    }
    if (grads) {
      for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t c = 0; c < out_; ++c) {
          const T* p = gy.ptr() + (ni * out_ + c) * s;
          T acc{0};
          for (std::size_t i = 0; i < s; ++i) acc += p[i];
          grads[1][c] += acc;
        }
    }
    return gx;
  }

  std::vector<Tensor<T>*> params() { return {&weight_, &bias_}; }
  std::vector<const Tensor<T>*> params() const { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> buffers() { return {}; }
  std::vector<const Tensor<T>*> buffers() const { return {}; }

 private:
  // The output is the input of the adjoint convolution whose output is `x`.
  ConvGeometry geometry(const Tensor<T>& x) const {
    const std::size_t oh = (x.dim(2) - 1) * s_ + k_ - 2 * p_;
    const std::size_t ow = (x.dim(3) - 1) * s_ + k_ - 2 * p_;
    return {out_, oh, ow, k_, s_, p_, x.dim(2), x.dim(3)};
  }

  std::size_t in_, out_, k_, s_, p_;
  Tensor<T> weight_, bias_;
};

/// Per-channel batch normalization over (n, h, w). Accepts rank-2 (n, c) input too.
template <typename T>
class BatchNorm2d {
 public:
  struct Cache {
    Mode mode = Mode::kEval;
    Tensor<T> xhat;
    std::vector<T> inv_std, batch_mean, batch_var;  // batch_var is unbiased
  };

  explicit BatchNorm2d(std::size_t channels, double eps = 1e-5, double momentum = 0.1)
      : c_(channels), eps_(eps), momentum_(momentum), gamma_({channels}, T{1}), beta_({channels}),
        running_mean_({channels}), running_var_({channels}, T{1}) {}

  void init(Rng&) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const {
    if (x.rank() < 2 || x.dim(1) != c_)
      throw ArgumentError("batch_norm expects channel dim " + std::to_string(c_) + ", got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0), s = x.size() / (n * c_);
    Tensor<T> y(x.shape());
    std::vector<T> inv_std(c_), mean(c_), var_unbiased(c_);
    Tensor<T> xhat;
    if (mode == Mode::kTrain && cache) xhat = Tensor<T>(x.shape());
    const std::size_t m = n * s;
    for (std::size_t c = 0; c < c_; ++c) {
      T mu, var;
      if (mode == Mode::kTrain) {
        double acc = 0;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const T* p = x.ptr() + (ni * c_ + c) * s;
          for (std::size_t i = 0; i < s; ++i) acc += p[i];
        }
        mu = static_cast<T>(acc / static_cast<double>(m));
        double sq = 0;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const T* p = x.ptr() + (ni * c_ + c) * s;
          for (std::size_t i = 0; i < s; ++i) sq += double(p[i] - mu) * double(p[i] - mu);
        }
        var = static_cast<T>(sq / static_cast<double>(m));
        var_unbiased[c] = static_cast<T>(m > 1 ? sq / static_cast<double>(m - 1) : sq);
      } else {
        mu = running_mean_[c];
        var = running_var_[c];
      }
      mean[c] = mu;
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + eps_));
      for (std::size_t ni = 0; ni < n; ++ni) {
        const T* p = x.ptr() + (ni * c_ + c) * s;
        T* q = y.ptr() + (ni * c_ + c) * s;
        for (std::size_t i = 0; i < s; ++i) {
          const T h = (p[i] - mu) * inv_std[c];
          if (!xhat.empty()) xhat[(ni * c_ + c) * s + i] = h;
          q[i] = gamma_[c] * h + beta_[c];
        }
      }
    }
    if (cache) {
      cache->mode = mode;
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv_std);
      cache->batch_mean = std::move(mean);
      cache->batch_var = std::move(var_unbiased);
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const {
    const std::size_t n = gy.dim(0), s = gy.size() / (n * c_);
    const double m = static_cast<double>(n * s);
    Tensor<T> gx(gy.shape());
    for (std::size_t c = 0; c < c_; ++c) {
      double sum_g = 0, sum_gx = 0;
      for (std::size_t ni = 0; ni < n; ++ni) {
        const std::size_t off = (ni * c_ + c) * s;
        for (std::size_t i = 0; i < s; ++i) {
          sum_g += gy[off + i];
          if (cache.mode == Mode::kTrain) sum_gx += double(gy[off + i]) * cache.xhat[off + i];
        }
      }
      if (grads) {
        // eval-mode forwards do not cache xhat
        if (cache.mode == Mode::kEval) throw StateError("batch_norm parameter gradients require train mode");
        grads[0][c] += static_cast<T>(sum_gx);
        grads[1][c] += static_cast<T>(sum_g);
      }
      const T scale = gamma_[c] * cache.inv_std[c];
      for (std::size_t ni = 0; ni < n; ++ni) {
        const std::size_t off = (ni * c_ + c) * s;
        for (std::size_t i = 0; i < s; ++i) {
          if (cache.mode == Mode::kTrain)
            gx[off + i] = static_cast<T>(double(scale) / m *
                                         (m * gy[off + i] - sum_g - double(cache.xhat[off + i]) * sum_gx));
          else
            gx[off + i] = scale * gy[off + i];
        }
      }
    }
    return gx;
  }

  /// Fold the batch statistics of a train-mode forward into the running estimates.
  void commit(const Cache& cache) {
    if (cache.mode != Mode::kTrain) return;
    for (std::size_t c = 0; c < c_; ++c) {
      running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * cache.batch_mean[c]);
      running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * cache.batch_var[c]);
    }
  }

  std::vector<Tensor<T>*> params() { return {&gamma_, &beta_}; }
  std::vector<const Tensor<T>*> params() const { return {&gamma_, &beta_}; }
  std::vector<Tensor<T>*> buffers() { return {&running_mean_, &running_var_}; }
  std::vector<const Tensor<T>*> buffers() const { return {&running_mean_, &running_var_}; }

 private:
  std::size_t c_;
  double eps_, momentum_;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
};

/// y = x W^T + b on rank-2 input (n, in).
template <typename T>
class Linear {
 public:
  struct Cache {
    Tensor<T> input;
  };

  Linear(std::size_t in, std::size_t out) : in_(in), out_(out), weight_({out, in}), bias_({out}) {}

  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
    detail::uniform_fill(weight_, bound, rng);
    detail::uniform_fill(bias_, bound, rng);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    if (x.rank() != 2 || x.dim(1) != in_)
      throw ArgumentError("linear expects (n," + std::to_string(in_) + "), got " + shape_str(x.shape()));
    const std::size_t n = x.dim(0);
    Tensor<T> y({n, out_});
    auto Y = y.matrix(n, out_);
    Y.noalias() = x.matrix(n, in_) * weight_.matrix(out_, in_).transpose();
    Y.rowwise() += bias_.matrix(1, out_).row(0);
    if (cache) cache->input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const {
    const std::size_t n = gy.dim(0);
    const auto G = gy.matrix(n, out_);
    if (grads) {
      grads[0].matrix(out_, in_).noalias() += G.transpose() * cache.input.matrix(n, in_);
      grads[1].matrix(1, out_).noalias() += G.colwise().sum();
    }
    Tensor<T> gx({n, in_});
    gx.matrix(n, in_).noalias() = G * weight_.matrix(out_, in_);
    return gx;
  }

  std::vector<Tensor<T>*> params() { return {&weight_, &bias_}; }
  std::vector<const Tensor<T>*> params() const { return {&weight_, &bias_}; }
  std::vector<Tensor<T>*> buffers() { return {}; }
  std::vector<const Tensor<T>*> buffers() const { return {}; }

 private:
  std::size_t in_, out_;
  Tensor<T> weight_, bias_;
};

/// Parameter-free layers share this surface.
template <typename T>
struct Stateless {
  void init(Rng&) {}
  std::vector<Tensor<T>*> params() { return {}; }
  std::vector<const Tensor<T>*> params() const { return {}; }
  std::vector<Tensor<T>*> buffers() { return {}; }
  std::vector<const Tensor<T>*> buffers() const { return {}; }
};

template <typename T>
struct ReLU : Stateless<T> {
  struct Cache {
    Tensor<T> output;
  };
  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    Tensor<T> y = x;
    for (auto& v : y.storage()) v = v > T{0} ? v : T{0};
    if (cache) cache->output = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>*) const {
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!(cache.output[i] > T{0})) gx[i] = T{0};
    return gx;
  }
};

template <typename T>
struct Sigmoid : Stateless<T> {
  struct Cache {
    Tensor<T> output;
  };
  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    Tensor<T> y = x;
    for (auto& v : y.storage()) v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
    if (cache) cache->output = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>*) const {
    Tensor<T> gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= cache.output[i] * (T{1} - cache.output[i]);
    return gx;
  }
};

/// Reshape each sample to `sample_shape` (e.g. {2048} to flatten, {128,4,4} to unflatten).
template <typename T>
struct Reshape : Stateless<T> {
  struct Cache {
    Shape input_shape;
  };
  Shape sample_shape;

  explicit Reshape(Shape s) : sample_shape(std::move(s)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    Shape s{x.dim(0)};
    s.insert(s.end(), sample_shape.begin(), sample_shape.end());
    if (cache) cache->input_shape = x.shape();
    return x.reshaped(std::move(s));
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>*) const {
    return gy.reshaped(cache.input_shape);
  }
};

/// (n,c,h,w) -> (n,c) by spatial mean.
template <typename T>
struct GlobalAvgPool : Stateless<T> {
  struct Cache {
    Shape input_shape;
  };
  Tensor<T> forward(const Tensor<T>& x, Mode, Cache* cache) const {
    const std::size_t n = x.dim(0), c = x.dim(1), s = x.dim(2) * x.dim(3);
    Tensor<T> y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
      T acc{0};
      for (std::size_t k = 0; k < s; ++k) acc += x[i * s + k];
      y[i] = acc / static_cast<T>(s);
    }
    if (cache) cache->input_shape = x.shape();
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>*) const {
    Tensor<T> gx(cache.input_shape);
    const std::size_t s = cache.input_shape[2] * cache.input_shape[3];
    for (std::size_t i = 0; i < gy.size(); ++i)
      for (std::size_t k = 0; k < s; ++k) gx[i * s + k] = gy[i] / static_cast<T>(s);
    return gx;
  }
};

template <typename T>
struct Layer;
template <typename T>
struct LayerCache;

/// relu(main(x) + shortcut(x)); an empty shortcut is the identity.
template <typename T>
class Residual {
 public:
  struct Cache {
    std::vector<LayerCache<T>> main, shortcut;
    Tensor<T> output;
  };

  Residual(std::vector<Layer<T>> main, std::vector<Layer<T>> shortcut)
      : main_(std::move(main)), shortcut_(std::move(shortcut)) {}

  void init(Rng& rng);
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const;
  Tensor<T> backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const;
  void commit(const Cache& cache);
  std::vector<Tensor<T>*> params();
  std::vector<const Tensor<T>*> params() const;
  std::vector<Tensor<T>*> buffers();
  std::vector<const Tensor<T>*> buffers() const;

 private:
  std::vector<Layer<T>> main_, shortcut_;
};

template <typename T>
struct Layer {
  std::variant<Conv2d<T>, ConvTranspose2d<T>, BatchNorm2d<T>, Linear<T>, ReLU<T>, Sigmoid<T>, Reshape<T>,
               GlobalAvgPool<T>, Residual<T>>
      op;
};

template <typename T>
struct LayerCache {
  std::variant<typename Conv2d<T>::Cache, typename ConvTranspose2d<T>::Cache, typename BatchNorm2d<T>::Cache,
               typename Linear<T>::Cache, typename ReLU<T>::Cache, typename Sigmoid<T>::Cache,
               typename Reshape<T>::Cache, typename GlobalAvgPool<T>::Cache, typename Residual<T>::Cache>
      state;
};

template <typename T>
using Tape = std::vector<LayerCache<T>>;

template <typename T>
std::size_t param_count(const Layer<T>& l) {
  return std::visit([](const auto& op) { return op.params().size(); }, l.op);
}

/// Run `layers` in order. `tape`, when non-null, receives one cache per layer.
template <typename T>
Tensor<T> forward_layers(const std::vector<Layer<T>>& layers, Tensor<T> x, Mode mode, Tape<T>* tape) {
  if (tape) {
    tape->clear();
    tape->reserve(layers.size());
  }
  for (const auto& l : layers) {
    x = std::visit(
        [&](const auto& op) {
          using Op = std::decay_t<decltype(op)>;
          if (!tape) return op.forward(x, mode, nullptr);
          typename Op::Cache c;
          auto y = op.forward(x, mode, &c);
          tape->push_back(LayerCache<T>{std::move(c)});
          return y;
        },
        l.op);
  }
  return x;
}

/// Backpropagate through `layers`. `grads`, when non-null, is the flat gradient list in params() order.
template <typename T>
Tensor<T> backward_layers(const std::vector<Layer<T>>& layers, Tensor<T> gy, const Tape<T>& tape, Tensor<T>* grads) {
  if (tape.size() != layers.size()) throw StateError("tape does not match layer stack");
  std::vector<std::size_t> offsets(layers.size() + 1, 0);
  for (std::size_t i = 0; i < layers.size(); ++i) offsets[i + 1] = offsets[i] + param_count(layers[i]);
  for (std::size_t i = layers.size(); i-- > 0;) {
    gy = std::visit(
        [&](const auto& op) {
          using Op = std::decay_t<decltype(op)>;
          const auto& c = std::get<typename Op::Cache>(tape[i].state);
          return op.backward(gy, c, grads ? grads + offsets[i] : nullptr);
        },
        layers[i].op);
  }
  return gy;
}

template <typename T>
void commit_layers(std::vector<Layer<T>>& layers, const Tape<T>& tape) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::visit(
        [&](auto& op) {
          using Op = std::decay_t<decltype(op)>;
          if constexpr (requires(Op& o, const typename Op::Cache& c) { o.commit(c); })
            op.commit(std::get<typename Op::Cache>(tape[i].state));
        },
        layers[i].op);
  }
}

template <typename T, typename Layers>
auto collect_params(Layers& layers) {
  using Ptr = std::conditional_t<std::is_const_v<Layers>, const Tensor<T>*, Tensor<T>*>;
  std::vector<Ptr> out;
  for (auto& l : layers) {
    auto ps = std::visit([](auto& op) { return op.params(); }, l.op);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

template <typename T, typename Layers>
auto collect_buffers(Layers& layers) {
  using Ptr = std::conditional_t<std::is_const_v<Layers>, const Tensor<T>*, Tensor<T>*>;
  std::vector<Ptr> out;
  for (auto& l : layers) {
    auto ps = std::visit([](auto& op) { return op.buffers(); }, l.op);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

template <typename T>
void init_layers(std::vector<Layer<T>>& layers, Rng& rng) {
  for (auto& l : layers) std::visit([&](auto& op) { op.init(rng); }, l.op);
}

template <typename T>
void Residual<T>::init(Rng& rng) {
  init_layers(main_, rng);
  init_layers(shortcut_, rng);
}

template <typename T>
Tensor<T> Residual<T>::forward(const Tensor<T>& x, Mode mode, Cache* cache) const {
  Tensor<T> y = forward_layers(main_, x, mode, cache ? &cache->main : nullptr);
  y += shortcut_.empty() ? x : forward_layers(shortcut_, x, mode, cache ? &cache->shortcut : nullptr);
  for (auto& v : y.storage()) v = v > T{0} ? v : T{0};
  if (cache) cache->output = y;
  return y;
}

template <typename T>
Tensor<T> Residual<T>::backward(const Tensor<T>& gy, const Cache& cache, Tensor<T>* grads) const {
  Tensor<T> g = gy;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(cache.output[i] > T{0})) g[i] = T{0};
  std::size_t main_params = 0;
  for (const auto& l : main_) main_params += param_count(l);
  Tensor<T> gx = backward_layers(main_, g, cache.main, grads);
  if (shortcut_.empty())
    gx += g;
  else
    gx += backward_layers(shortcut_, g, cache.shortcut, grads ? grads + main_params : nullptr);
  return gx;
}

template <typename T>
void Residual<T>::commit(const Cache& cache) {
  commit_layers(main_, cache.main);
  if (!shortcut_.empty()) commit_layers(shortcut_, cache.shortcut);
}

template <typename T>
std::vector<Tensor<T>*> Residual<T>::params() {
  auto a = collect_params<T>(main_);
  auto b = collect_params<T>(shortcut_);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
template <typename T>
std::vector<const Tensor<T>*> Residual<T>::params() const {
  auto a = collect_params<T>(main_);
  auto b = collect_params<T>(shortcut_);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
template <typename T>
std::vector<Tensor<T>*> Residual<T>::buffers() {
  auto a = collect_buffers<T>(main_);
  auto b = collect_buffers<T>(shortcut_);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}
template <typename T>
std::vector<const Tensor<T>*> Residual<T>::buffers() const {
  auto a = collect_buffers<T>(main_);
  auto b = collect_buffers<T>(shortcut_);
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// An ordered stack of layers with a flat parameter list.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<Layer<T>> layers) : layers_(std::move(layers)) {}

  template <typename Op>
  Sequential& add(Op op) {
    layers_.push_back(Layer<T>{std::move(op)});
    return *this;
  }

  void init(Rng& rng) { init_layers(layers_, rng); }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Tape<T>* tape = nullptr) const {
    return forward_layers(layers_, x, mode, tape);
  }
  Tensor<T> backward(const Tensor<T>& gy, const Tape<T>& tape, std::vector<Tensor<T>>* grads = nullptr) const {
    return backward_layers(layers_, gy, tape, grads ? grads->data() : nullptr);
  }
  void commit(const Tape<T>& tape) { commit_layers(layers_, tape); }

  std::vector<Tensor<T>*> params() { return collect_params<T>(layers_); }
  std::vector<const Tensor<T>*> params() const { return collect_params<T>(layers_); }
  std::vector<Tensor<T>*> buffers() { return collect_buffers<T>(layers_); }
  std::vector<const Tensor<T>*> buffers() const { return collect_buffers<T>(layers_); }

  /// Zero tensors shaped like params().
  std::vector<Tensor<T>> zero_grads() const {
    std::vector<Tensor<T>> g;
    for (const auto* p : params()) g.emplace_back(p->shape());
    return g;
  }

  const std::vector<Layer<T>>& layers() const noexcept { return layers_; }

 private:
  std::vector<Layer<T>> layers_;
};

}  // namespace cvdetect::nn
