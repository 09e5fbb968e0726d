// Copyright 2026 The respdl Authors.
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

#include <algorithm>
#include <cmath>

#include "respdl/errors.hpp"
#include "respdl/nn/blas.hpp"
#include "respdl/nn/layers.hpp"

namespace respdl::nn {

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                  std::size_t kernel_w, Rng& rng)
    : in_c_(in_channels),
      out_c_(out_channels),
      kh_(kernel_h),
      kw_(kernel_w),
      weight_("weight", Tensor<T>({out_channels, in_channels, kernel_h, kernel_w})),
      bias_("bias", Tensor<T>({out_channels})) {
  const double fan_in = static_cast<double>(in_c_ * kh_ * kw_);
  const double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : weight_.value.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
std::string Conv2d<T>::kind() const {
  return "Conv" + std::to_string(kh_) + "x" + std::to_string(kw_);
}

template <typename T>
void Conv2d<T>::set_name(const std::string& name) {
  this->name_ = name;
  weight_.name = name + ".weight";
  bias_.name = name + ".bias";
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& input) const {
  if (input.size() != 4) {
    throw ShapeError("Conv2d: expected B x C x H x W input, got " + shape_string(input));
  }
  if (input[1] != in_c_) {
    throw ShapeError("Conv2d: expected " + std::to_string(in_c_) + " input channels, got " +
                     shape_string(input));
  }
  return {input[0], out_c_, input[2], input[3]};
}

template <typename T>
void Conv2d<T>::im2col(const T* x, std::size_t h, std::size_t w, T* col) const {
  const long pt = static_cast<long>((kh_ - 1) / 2);
  const long pl = static_cast<long>((kw_ - 1) / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  for (std::size_t c = 0; c < in_c_; ++c) {
    const T* plane = x + c * h * w;
    for (std::size_t a = 0; a < kh_; ++a) {
      for (std::size_t b = 0; b < kw_; ++b) {
        T* dst = col + ((c * kh_ + a) * kw_ + b) * h * w;
        const long dy = static_cast<long>(a) - pt;
        const long dx = static_cast<long>(b) - pl;
        const long x0 = std::max(0L, -dx);
        const long x1 = std::min(lw, lw - dx);
        for (long y = 0; y < lh; ++y) {
          T* row = dst + y * lw;
          const long sy = y + dy;
          if (sy < 0 || sy >= lh || x0 >= x1) {
            std::fill(row, row + lw, T{0});
            continue;
          }
          std::fill(row, row + x0, T{0});
          std::copy(plane + sy * lw + x0 + dx, plane + sy * lw + x1 + dx, row + x0);
          std::fill(row + x1, row + lw, T{0});
        }
      }
    }
  }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, std::size_t h, std::size_t w, T* x) const {
  const long pt = static_cast<long>((kh_ - 1) / 2);
  const long pl = static_cast<long>((kw_ - 1) / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  std::fill(x, x + in_c_ * h * w, T{0});
  for (std::size_t c = 0; c < in_c_; ++c) {
    T* plane = x + c * h * w;
    for (std::size_t a = 0; a < kh_; ++a) {
      for (std::size_t b = 0; b < kw_; ++b) {
        const T* src = col + ((c * kh_ + a) * kw_ + b) * h * w;
        const long dy = static_cast<long>(a) - pt;
        const long dx = static_cast<long>(b) - pl;
        const long x0 = std::max(0L, -dx);
        const long x1 = std::min(lw, lw - dx);
        for (long y = 0; y < lh; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= lh) continue;
          const T* row = src + y * lw;
          T* out = plane + sy * lw + dx;
          for (long xx = x0; xx < x1; ++xx) out[xx] += row[xx];
        }
      }
    }
  }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape()));
  input_ = x;
  const std::size_t b = x.dim(0), h = x.dim(2), w = x.dim(3), hw = h * w;
  const std::size_t k = in_c_ * kh_ * kw_;
  std::vector<T> col(k * hw);
  for (std::size_t i = 0; i < b; ++i) {
    T* out = y.data() + i * out_c_ * hw;
    for (std::size_t o = 0; o < out_c_; ++o) std::fill(out + o * hw, out + (o + 1) * hw, bias_.value[o]);
    const T* src = x.data() + i * in_c_ * hw;
    const T* rhs = src;
    if (kh_ * kw_ != 1) {
      im2col(src, h, w, col.data());
      rhs = col.data();
    }
    gemm(false, false, static_cast<int>(out_c_), static_cast<int>(hw), static_cast<int>(k),
         T{1}, weight_.value.data(), static_cast<int>(k), rhs, static_cast<int>(hw), T{1}, out,
         static_cast<int>(hw));
  }
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = input_.dim(0), h = input_.dim(2), w = input_.dim(3), hw = h * w;
  const std::size_t k = in_c_ * kh_ * kw_;
  Tensor<T> dx(input_.shape());
  std::vector<T> col(k * hw);
  std::vector<T> dcol(k * hw);
  for (std::size_t i = 0; i < b; ++i) {
    const T* g = grad_out.data() + i * out_c_ * hw;
    for (std::size_t o = 0; o < out_c_; ++o) {
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += g[o * hw + j];
      bias_.grad[o] += static_cast<T>(acc);
    }
    const T* src = input_.data() + i * in_c_ * hw;
    const T* rhs = src;
    if (kh_ * kw_ != 1) {
      im2col(src, h, w, col.data());
      rhs = col.data();
    }
    // dW += dY * col^T
    gemm(false, true, static_cast<int>(out_c_), static_cast<int>(k), static_cast<int>(hw), T{1},
         g, static_cast<int>(hw), rhs, static_cast<int>(hw), T{1}, weight_.grad.data(),
         static_cast<int>(k));
    // dcol = W^T * dY
    T* dst = dx.data() + i * in_c_ * hw;
    T* dcol_out = kh_ * kw_ != 1 ? dcol.data() : dst;
    gemm(true, false, static_cast<int>(k), static_cast<int>(hw), static_cast<int>(out_c_), T{1},
         weight_.value.data(), static_cast<int>(k), g, static_cast<int>(hw), T{0}, dcol_out,
         static_cast<int>(hw));
    if (kh_ * kw_ != 1) col2im(dcol.data(), h, w, dst);
  }
  return dx;
}

template class Conv2d<float>;
template class Conv2d<double>;

}  // namespace respdl::nn
