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

#include <cstddef>

#include "cvdetect/core/tensor.hpp"

namespace cvdetect::nn {

/// Geometry of a strided square-kernel convolution from (c,h,w) to (out_h,out_w).
struct ConvGeometry {
  std::size_t channels, height, width;
  std::size_t kernel, stride, pad;
  std::size_t out_h, out_w;

  static ConvGeometry forward(std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t s,
                              std::size_t p) {
    if (h + 2 * p < k || w + 2 * p < k) throw ArgumentError("convolution kernel larger than padded input");
    return {c, h, w, k, s, p, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1};
  }

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t out_pixels() const { return out_h * out_w; }
};

/// Unfold (n,c,h,w) into a (c*k*k) x (n*out_h*out_w) column matrix.
template <typename T>
void im2col(const T* x, std::size_t n, const ConvGeometry& g, T* cols) {
  const std::size_t ncols = n * g.out_pixels();
  for (std::size_t ci = 0; ci < g.channels; ++ci)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T* row = cols + ((ci * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t ni = 0; ni < n; ++ni) {
          const T* plane = x + (ni * g.channels + ci) * g.height * g.width;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
            T* dst = row + (ni * g.out_h + oy) * g.out_w;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
              std::fill(dst, dst + g.out_w, T{0});
              continue;
            }
            const T* src = plane + static_cast<std::size_t>(iy) * g.width;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
              dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T{0} : src[ix];
            }
          }
        }
      }
}

/// Adjoint of im2col: accumulate columns back into (n,c,h,w). `x` must be zeroed by the caller.
template <typename T>
void col2im(const T* cols, std::size_t n, const ConvGeometry& g, T* x) {
  const std::size_t ncols = n * g.out_pixels();
  for (std::size_t ci = 0; ci < g.channels; ++ci)
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        const T* row = cols + ((ci * g.kernel + ki) * g.kernel + kj) * ncols;
        for (std::size_t ni = 0; ni < n; ++ni) {
          T* plane = x + (ni * g.channels + ci) * g.height * g.width;
          for (std::size_t oy = 0; oy < g.out_h; ++oy) {
            const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
            const T* src = row + (ni * g.out_h + oy) * g.out_w;
            T* dst = plane + static_cast<std::size_t>(iy) * g.width;
            for (std::size_t ox = 0; ox < g.out_w; ++ox) {
              const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) - static_cast<std::ptrdiff_t>(g.pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) dst[ix] += src[ox];
            }
          }
        }
      }
}

/// (n, c, s) -> (c, n*s).
template <typename T>
void to_channel_major(const T* x, std::size_t n, std::size_t c, std::size_t s, T* out) {
  for (std::size_t ni = 0; ni < n; ++ni)
    for (std::size_t ci = 0; ci < c; ++ci) std::copy_n(x + (ni * c + ci) * s, s, out + (ci * n + ni) * s);
}

/// (c, n*s) -> (n, c, s).
template <typename T>
void from_channel_major(const T* x, std::size_t n, std::size_t c, std::size_t s, T* out) {
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ni = 0; ni < n; ++ni) std::copy_n(x + (ci * n + ni) * s, s, out + (ni * c + ci) * s);
}

}  // namespace cvdetect::nn
