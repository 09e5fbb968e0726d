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
namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

template <typename T>
BiGru<T>::BiGru(std::size_t input_size, std::size_t hidden_size, Rng& rng)
    : input_(input_size), hidden_(hidden_size) {
  const std::size_t g = 3 * hidden_size;
  const double limit = std::sqrt(6.0 / static_cast<double>(input_size + hidden_size));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& d : dirs_) {
    d.w_ih = Parameter<T>("w_ih", Tensor<T>({g, input_size}));
    d.w_hh = Parameter<T>("w_hh", Tensor<T>({g, hidden_size}));
    d.b_ih = Parameter<T>("b_ih", Tensor<T>({g}));
    d.b_hh = Parameter<T>("b_hh", Tensor<T>({g}));
    for (auto& v : d.w_ih.value.values()) v = static_cast<T>(dist(rng));
    for (std::size_t gate = 0; gate < 3; ++gate) {
      const auto q = orthogonal_matrix<T>(hidden_size, rng);
      std::copy(q.begin(), q.end(), d.w_hh.value.data() + gate * hidden_size * hidden_size);
    }
  }
}

template <typename T>
void BiGru<T>::set_name(const std::string& name) {
  this->name_ = name;
  const char* tags[2] = {"fwd", "bwd"};
  for (int i = 0; i < 2; ++i) {
    const std::string p = name + "." + tags[i];
    dirs_[i].w_ih.name = p + ".w_ih";
    dirs_[i].w_hh.name = p + ".w_hh";
    dirs_[i].b_ih.name = p + ".b_ih";
    dirs_[i].b_hh.name = p + ".b_hh";
  }
}

template <typename T>
std::vector<Parameter<T>*> BiGru<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& d : dirs_) {
    out.push_back(&d.w_ih);
    out.push_back(&d.w_hh);
    out.push_back(&d.b_ih);
    out.push_back(&d.b_hh);
  }
  return out;
}

template <typename T>
void BiGru<T>::tie_directions() {
  dirs_[1].w_ih.value = dirs_[0].w_ih.value;
  dirs_[1].w_hh.value = dirs_[0].w_hh.value;
  dirs_[1].b_ih.value = dirs_[0].b_ih.value;
  dirs_[1].b_hh.value = dirs_[0].b_hh.value;
}

template <typename T>
Shape BiGru<T>::output_shape(const Shape& input) const {
  if (input.size() != 3) {
    throw ShapeError("BiGRU: expected B x T x D input, got " + shape_string(input));
  }
  if (input[2] != input_) {
    throw ShapeError("BiGRU: expected " + std::to_string(input_) + " features, got " +
                     shape_string(input));
  }
  return {input[0], 2 * input[1], hidden_};
}

template <typename T>
void BiGru<T>::run_direction(Direction& dir, bool reverse, const Tensor<T>& x, Tensor<T>& out,
                             std::size_t frame_offset) {
  const std::size_t b = x.dim(0), t_len = x.dim(1), d = x.dim(2), h = hidden_, g = 3 * h;
  std::vector<T> xw(b * t_len * g);
  for (std::size_t r = 0; r < b * t_len; ++r) {
    std::copy(dir.b_ih.value.data(), dir.b_ih.value.data() + g, xw.data() + r * g);
  }
  gemm(false, true, static_cast<int>(b * t_len), static_cast<int>(g), static_cast<int>(d), T{1},
       x.data(), static_cast<int>(d), dir.w_ih.value.data(), static_cast<int>(d), T{1}, xw.data(),
       static_cast<int>(g));

  const std::size_t cache = t_len * b * h;
  dir.r.assign(cache, T{0});
  dir.z.assign(cache, T{0});
  dir.n.assign(cache, T{0});
  dir.hn.assign(cache, T{0});
  dir.h_prev.assign(cache, T{0});
  std::vector<T> state(b * h, T{0});
  std::vector<T> hw(b * g);
  const std::size_t out_frames = out.dim(1);

  for (std::size_t s = 0; s < t_len; ++s) {
    const std::size_t t = reverse ? t_len - 1 - s : s;
    for (std::size_t i = 0; i < b; ++i) {
      std::copy(dir.b_hh.value.data(), dir.b_hh.value.data() + g, hw.data() + i * g);
    }
    gemm(false, true, static_cast<int>(b), static_cast<int>(g), static_cast<int>(h), T{1},
         state.data(), static_cast<int>(h), dir.w_hh.value.data(), static_cast<int>(h), T{1},
         hw.data(), static_cast<int>(g));
    const std::size_t base = s * b * h;
    std::copy(state.begin(), state.end(), dir.h_prev.begin() + static_cast<long>(base));
    for (std::size_t i = 0; i < b; ++i) {
      const T* xr = xw.data() + (i * t_len + t) * g;
      const T* hr = hw.data() + i * g;
      T* out_row = out.data() + (i * out_frames + frame_offset + t) * h;
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t c = base + i * h + j;
        const double r = sigmoid(static_cast<double>(xr[j]) + hr[j]);
        const double z = sigmoid(static_cast<double>(xr[h + j]) + hr[h + j]);
        const double hn = hr[2 * h + j];
        const double n = std::tanh(static_cast<double>(xr[2 * h + j]) + r * hn);
        const double hp = state[i * h + j];
        const double hnew = (1.0 - z) * n + z * hp;
        dir.r[c] = static_cast<T>(r);
        dir.z[c] = static_cast<T>(z);
        dir.n[c] = static_cast<T>(n);
        dir.hn[c] = static_cast<T>(hn);
        state[i * h + j] = static_cast<T>(hnew);
        out_row[j] = static_cast<T>(hnew);
      }
    }
  }
}

template <typename T>
Tensor<T> BiGru<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> out(output_shape(x.shape()));
  input_cache_ = x;
  run_direction(dirs_[0], false, x, out, 0);
  run_direction(dirs_[1], true, x, out, x.dim(1));
  return out;
}

template <typename T>
void BiGru<T>::backprop_direction(Direction& dir, bool reverse, const Tensor<T>& grad_out,
                                  std::size_t frame_offset, Tensor<T>& grad_in) {
  const Tensor<T>& x = input_cache_;
  const std::size_t b = x.dim(0), t_len = x.dim(1), d = x.dim(2), h = hidden_, g = 3 * h;
  const std::size_t out_frames = grad_out.dim(1);
  std::vector<T> dxw(b * t_len * g, T{0});
  std::vector<T> dh(b * h, T{0});
  std::vector<T> dh_next(b * h);
  std::vector<T> dhw(b * g);

  for (std::size_t s = t_len; s-- > 0;) {
    const std::size_t t = reverse ? t_len - 1 - s : s;
    const std::size_t base = s * b * h;
    for (std::size_t i = 0; i < b; ++i) {
      const T* go = grad_out.data() + (i * out_frames + frame_offset + t) * h;
      T* dxr = dxw.data() + (i * t_len + t) * g;
      T* dhr = dhw.data() + i * g;
      for (std::size_t j = 0; j < h; ++j) {
        const std::size_t c = base + i * h + j;
        const double dht = static_cast<double>(dh[i * h + j]) + go[j];
        const double r = dir.r[c], z = dir.z[c], n = dir.n[c], hn = dir.hn[c];
        const double hp = dir.h_prev[c];
        const double dn = dht * (1.0 - z);
        const double dz = dht * (hp - n);
        const double dan = dn * (1.0 - n * n);
        const double dr = dan * hn;
        const double dar = dr * r * (1.0 - r);
        const double daz = dz * z * (1.0 - z);
        dxr[j] = static_cast<T>(dar);
        dxr[h + j] = static_cast<T>(daz);
        dxr[2 * h + j] = static_cast<T>(dan);
        dhr[j] = static_cast<T>(dar);
        dhr[h + j] = static_cast<T>(daz);
        dhr[2 * h + j] = static_cast<T>(dan * r);
        dh_next[i * h + j] = static_cast<T>(dht * z);
      }
    }
    const T* hprev = dir.h_prev.data() + base;
    gemm(true, false, static_cast<int>(g), static_cast<int>(h), static_cast<int>(b), T{1},
         dhw.data(), static_cast<int>(g), hprev, static_cast<int>(h), T{1},
         dir.w_hh.grad.data(), static_cast<int>(h));
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t k = 0; k < g; ++k) dir.b_hh.grad[k] += dhw[i * g + k];
    }
    gemm(false, false, static_cast<int>(b), static_cast<int>(h), static_cast<int>(g), T{1},
         dhw.data(), static_cast<int>(g), dir.w_hh.value.data(), static_cast<int>(h), T{1},
         dh_next.data(), static_cast<int>(h));
    dh.swap(dh_next);
  }

  gemm(true, false, static_cast<int>(g), static_cast<int>(d), static_cast<int>(b * t_len), T{1},
       dxw.data(), static_cast<int>(g), x.data(), static_cast<int>(d), T{1},
       dir.w_ih.grad.data(), static_cast<int>(d));
  for (std::size_t r = 0; r < b * t_len; ++r) {
    for (std::size_t k = 0; k < g; ++k) dir.b_ih.grad[k] += dxw[r * g + k];
  }
  gemm(false, false, static_cast<int>(b * t_len), static_cast<int>(d), static_cast<int>(g), T{1},
       dxw.data(), static_cast<int>(g), dir.w_ih.value.data(), static_cast<int>(d), T{1},
       grad_in.data(), static_cast<int>(d));
}

template <typename T>
Tensor<T> BiGru<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(input_cache_.shape());
  backprop_direction(dirs_[0], false, grad_out, 0, dx);
  backprop_direction(dirs_[1], true, grad_out, input_cache_.dim(1), dx);
  return dx;
}

template class BiGru<float>;
template class BiGru<double>;

}  // namespace respdl::nn
