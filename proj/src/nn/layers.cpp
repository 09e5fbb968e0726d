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

#include "respdl/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "respdl/errors.hpp"
#include "respdl/log.hpp"
#include "respdl/nn/blas.hpp"

namespace respdl::nn {
namespace {

template <typename T>
void xavier_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

void require_rank(const Shape& s, std::size_t rank, const char* who) {
  if (s.size() != rank) {
    throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) +
                     " input, got " + shape_string(s));
  }
}

}  // namespace

// ---- Dense ----------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, Rng& rng)
    : in_(in),
      out_(out),
      weight_("weight", Tensor<T>({out, in})),
      bias_("bias", Tensor<T>({out})) {
  xavier_uniform(weight_.value, in, out, rng);
}

template <typename T>
void Dense<T>::set_name(const std::string& name) {
  this->name_ = name;
  weight_.name = name + ".weight";
  bias_.name = name + ".bias";
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  require_rank(input, 2, "Dense");
  if (input[1] != in_) {
    throw ShapeError("Dense: expected " + std::to_string(in_) + " features, got " +
                     shape_string(input));
  }
  return {input[0], out_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_shape = output_shape(x.shape());
  const int b = static_cast<int>(x.dim(0));
  input_ = x;
  Tensor<T> y(out_shape);
  for (int i = 0; i < b; ++i) {
    std::copy(bias_.value.data(), bias_.value.data() + out_, y.data() + i * out_);
  }
  gemm(false, true, b, static_cast<int>(out_), static_cast<int>(in_), T{1}, x.data(),
       static_cast<int>(in_), weight_.value.data(), static_cast<int>(in_), T{1}, y.data(),
       static_cast<int>(out_));
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& grad_out) {
  const int b = static_cast<int>(input_.dim(0));
  const int in = static_cast<int>(in_);
  const int out = static_cast<int>(out_);
  gemm(true, false, out, in, b, T{1}, grad_out.data(), out, input_.data(), in, T{1},
       weight_.grad.data(), in);
  for (int i = 0; i < b; ++i) {
    for (int o = 0; o < out; ++o) bias_.grad[o] += grad_out[i * out_ + o];
  }
  Tensor<T> dx(input_.shape());
  gemm(false, false, b, in, out, T{1}, grad_out.data(), out, weight_.value.data(), in, T{0},
       dx.data(), in);
  return dx;
}

// ---- BatchNorm2d -------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_("gamma", Tensor<T>({channels}, T{1}), false),
      beta_("beta", Tensor<T>({channels}, T{0}), false),
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {}

template <typename T>
void BatchNorm2d<T>::set_name(const std::string& name) {
  this->name_ = name;
  gamma_.name = name + ".gamma";
  beta_.name = name + ".beta";
}

template <typename T>
std::vector<NamedTensor<T>> BatchNorm2d<T>::buffers() {
  return {{this->name_ + ".running_mean", &running_mean_},
          {this->name_ + ".running_var", &running_var_}};
}

template <typename T>
Shape BatchNorm2d<T>::output_shape(const Shape& input) const {
  require_rank(input, 4, "BatchNorm2d");
  if (input[1] != channels_) {
    throw ShapeError("BatchNorm2d: expected " + std::to_string(channels_) +
                     " channels, got " + shape_string(input));
  }
  return input;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Mode mode) {
  output_shape(x.shape());
  const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t m = b * hw;
  last_mode_ = mode;
  xhat_ = Tensor<T>(x.shape());
  inv_std_.assign(c, 0.0);
  Tensor<T> y(x.shape());

  // Restored weights carry running stats without a training step here.
  auto initial_stats = [&] {
    for (std::size_t i = 0; i < c; ++i) {
      if (running_mean_[i] != T{0} || running_var_[i] != T{1}) return false;
    }
    return true;
  };
  if (mode == Mode::kInfer && !trained_ && !warned_ && initial_stats()) {
    log::warning("batch-norm '" + this->name_ +
                 "' used for inference before any training step; using initial running "
                 "statistics");
    warned_ = true;
  }
  if (mode == Mode::kTrain && m < 2) {
    throw ShapeError("BatchNorm2d: training needs at least 2 values per channel");
  }

  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::kTrain) {
      for (std::size_t i = 0; i < b; ++i) {
        const T* p = x.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) mean += p[j];
      }
      mean /= static_cast<double>(m);
      for (std::size_t i = 0; i < b; ++i) {
        const T* p = x.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = p[j] - mean;
          var += d * d;
        }
      }
      var /= static_cast<double>(m);
      const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
      running_mean_[ch] = static_cast<T>(momentum_ * running_mean_[ch] + (1.0 - momentum_) * mean);
      running_var_[ch] =
          static_cast<T>(momentum_ * running_var_[ch] + (1.0 - momentum_) * unbiased);
    } else {
      mean = running_mean_[ch];
      var = std::max<double>(running_var_[ch], 0.0);
    }
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    inv_std_[ch] = inv_std;
    const double g = gamma_.value[ch], bt = beta_.value[ch];
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const double xh = (x[off + j] - mean) * inv_std;
        xhat_[off + j] = static_cast<T>(xh);
        y[off + j] = static_cast<T>(g * xh + bt);
      }
    }
  }
  if (mode == Mode::kTrain) trained_ = true;
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = xhat_.dim(0), c = xhat_.dim(1), hw = xhat_.dim(2) * xhat_.dim(3);
  const double m = static_cast<double>(b * hw);
  Tensor<T> dx(xhat_.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        sum_dy += grad_out[off + j];
        sum_dy_xhat += static_cast<double>(grad_out[off + j]) * xhat_[off + j];
      }
    }
    gamma_.grad[ch] += static_cast<T>(sum_dy_xhat);
    beta_.grad[ch] += static_cast<T>(sum_dy);
    const double scale = gamma_.value[ch] * inv_std_[ch];
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t off = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        if (last_mode_ == Mode::kTrain) {
          dx[off + j] = static_cast<T>(
              scale * (grad_out[off + j] - sum_dy / m - xhat_[off + j] * sum_dy_xhat / m));
        } else {
          dx[off + j] = static_cast<T>(scale * grad_out[off + j]);
        }
      }
    }
  }
  return dx;
}

// ---- ReLU -------------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Mode) {
  output_ = x;
  for (auto& v : output_.values()) v = v > T{0} ? v : T{0};
  return output_;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(output_[i] > T{0})) dx[i] = T{0};
  }
  return dx;
}

// ---- AvgPool2d ------------------------------------------------------------

template <typename T>
AvgPool2d<T>::AvgPool2d(std::size_t kernel_h, std::size_t kernel_w)
    : kh_(kernel_h), kw_(kernel_w) {
  if (kh_ == 0 || kw_ == 0) throw ParameterError("pool kernel must be positive");
}

template <typename T>
std::string AvgPool2d<T>::kind() const {
  return "AvgPool" + std::to_string(kh_) + "x" + std::to_string(kw_);
}

template <typename T>
Shape AvgPool2d<T>::output_shape(const Shape& input) const {
  require_rank(input, 4, "AvgPool2d");
  if (input[2] % kh_ != 0 || input[3] % kw_ != 0) {
    throw ShapeError("AvgPool2d: input " + shape_string(input) + " not divisible by kernel " +
                     std::to_string(kh_) + "x" + std::to_string(kw_));
  }
  return {input[0], input[1], input[2] / kh_, input[3] / kw_};
}

template <typename T>
Tensor<T> AvgPool2d<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape()));
  in_shape_ = x.shape();
  const std::size_t planes = x.dim(0) * x.dim(1);
  const std::size_t h = x.dim(2), w = x.dim(3), oh = h / kh_, ow = w / kw_;
  const double inv = 1.0 / static_cast<double>(kh_ * kw_);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * oh * ow;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t a = 0; a < kh_; ++a) {
          for (std::size_t bb = 0; bb < kw_; ++bb) acc += src[(i * kh_ + a) * w + j * kw_ + bb];
        }
        dst[i * ow + j] = static_cast<T>(acc * inv);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> AvgPool2d<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(in_shape_);
  const std::size_t planes = in_shape_[0] * in_shape_[1];
  const std::size_t h = in_shape_[2], w = in_shape_[3], oh = h / kh_, ow = w / kw_;
  const T inv = static_cast<T>(1.0 / static_cast<double>(kh_ * kw_));
  for (std::size_t p = 0; p < planes; ++p) {
    const T* g = grad_out.data() + p * oh * ow;
    T* dst = dx.data() + p * h * w;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = g[(i / kh_) * ow + j / kw_] * inv;
    }
  }
  return dx;
}

// ---- GlobalAvgPool -----------------------------------------------------------

template <typename T>
Shape GlobalAvgPool<T>::output_shape(const Shape& input) const {
  require_rank(input, 4, "GlobalAvgPool");
  return {input[0], input[1]};
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape()));
  in_shape_ = x.shape();
  const std::size_t planes = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
  for (std::size_t p = 0; p < planes; ++p) {
    double acc = 0.0;
    for (std::size_t j = 0; j < hw; ++j) acc += x[p * hw + j];
    y[p] = static_cast<T>(acc / static_cast<double>(hw));
  }
  return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(in_shape_);
  const std::size_t planes = in_shape_[0] * in_shape_[1], hw = in_shape_[2] * in_shape_[3];
  for (std::size_t p = 0; p < planes; ++p) {
    const T g = static_cast<T>(grad_out[p] / static_cast<double>(hw));
    std::fill(dx.data() + p * hw, dx.data() + (p + 1) * hw, g);
  }
  return dx;
}

// ---- Dropout -----------------------------------------------------------------

template <typename T>
Dropout<T>::Dropout(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("dropout rate must be in [0, 1)");
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::kInfer || rate_ == 0.0) {
    mask_ = Tensor<T>();
    return x;
  }
  if (!frozen_ || mask_.shape() != x.shape()) {
    mask_ = Tensor<T>(x.shape());
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask_.values()) m = u(rng_) >= rate_ ? keep_scale : T{0};
  }
  Tensor<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask_[i];
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& grad_out) {
  if (mask_.empty()) return grad_out;
  Tensor<T> dx = grad_out;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

// ---- Softmax -------------------------------------------------------------------

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax");
  Tensor<T> p(logits.shape());
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  for (std::size_t i = 0; i < b; ++i) {
    const T* z = logits.data() + i * n;
    T* out = p.data() + i * n;
    const double mx = *std::max_element(z, z + n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(static_cast<double>(z[j]) - mx);
    for (std::size_t j = 0; j < n; ++j) {
      out[j] = static_cast<T>(std::exp(static_cast<double>(z[j]) - mx) / sum);
    }
  }
  return p;
}

template <typename T>
Tensor<T> Softmax<T>::forward(const Tensor<T>& x, Mode) {
  output_ = softmax_rows(x);
  return output_;
}

template <typename T>
Tensor<T> Softmax<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = output_.dim(0), n = output_.dim(1);
  Tensor<T> dx(output_.shape());
  for (std::size_t i = 0; i < b; ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += grad_out[i * n + j] * output_[i * n + j];
    for (std::size_t j = 0; j < n; ++j) {
      dx[i * n + j] = static_cast<T>(output_[i * n + j] * (grad_out[i * n + j] - dot));
    }
  }
  return dx;
}

// ---- ToSequence ----------------------------------------------------------------

template <typename T>
Shape ToSequence<T>::output_shape(const Shape& input) const {
  require_rank(input, 4, "ToSequence");
  if (input[2] != 1) {
    throw ShapeError("ToSequence: frequency axis must be collapsed to 1, got " +
                     shape_string(input));
  }
  return {input[0], input[3], input[1]};
}

template <typename T>
Tensor<T> ToSequence<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape()));
  in_shape_ = x.shape();
  const std::size_t b = x.dim(0), c = x.dim(1), t = x.dim(3);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t s = 0; s < t; ++s) y[(i * t + s) * c + ch] = x[(i * c + ch) * t + s];
    }
  }
  return y;
}

template <typename T>
Tensor<T> ToSequence<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(in_shape_);
  const std::size_t b = in_shape_[0], c = in_shape_[1], t = in_shape_[3];
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t s = 0; s < t; ++s) dx[(i * c + ch) * t + s] = grad_out[(i * t + s) * c + ch];
    }
  }
  return dx;
}

// ---- FeatureMean ---------------------------------------------------------------

template <typename T>
Shape FeatureMean<T>::output_shape(const Shape& input) const {
  require_rank(input, 3, "FeatureMean");
  return {input[0], input[1]};
}

template <typename T>
Tensor<T> FeatureMean<T>::forward(const Tensor<T>& x, Mode) {
  Tensor<T> y(output_shape(x.shape()));
  in_shape_ = x.shape();
  const std::size_t rows = x.dim(0) * x.dim(1), f = x.dim(2);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < f; ++j) acc += x[r * f + j];
    y[r] = static_cast<T>(acc / static_cast<double>(f));
  }
  return y;
}

template <typename T>
Tensor<T> FeatureMean<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> dx(in_shape_);
  const std::size_t rows = in_shape_[0] * in_shape_[1], f = in_shape_[2];
  for (std::size_t r = 0; r < rows; ++r) {
    const T g = static_cast<T>(grad_out[r] / static_cast<double>(f));
    std::fill(dx.data() + r * f, dx.data() + (r + 1) * f, g);
  }
  return dx;
}

// ---- Sequential ----------------------------------------------------------------

template <typename T>
void Sequential<T>::add(std::string child_name, std::unique_ptr<Layer<T>> layer) {
  layer->set_name(this->name_.empty() ? child_name : this->name_ + "." + child_name);
  layers_.emplace_back(std::move(child_name), std::move(layer));
}

template <typename T>
void Sequential<T>::set_name(const std::string& name) {
  this->name_ = name;
  for (auto& [child, layer] : layers_) layer->set_name(name.empty() ? child : name + "." + child);
}

template <typename T>
Shape Sequential<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& [child, layer] : layers_) {
    try {
      s = layer->output_shape(s);
    } catch (const ShapeError& e) {
      throw ShapeError(layer->name() + ": " + e.what());
    }
  }
  return s;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  Tensor<T> h = x;
  for (auto& [child, layer] : layers_) h = layer->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <typename T>
std::vector<Parameter<T>*> Sequential<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& [child, layer] : layers_) {
    auto p = layer->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Sequential<T>::buffers() {
  std::vector<NamedTensor<T>> out;
  for (auto& [child, layer] : layers_) {
    auto b = layer->buffers();
    out.insert(out.end(), b.begin(), b.end());
  }
  return out;
}

// ---- init helpers ----------------------------------------------------------------

template <typename T>
std::vector<T> orthogonal_matrix(std::size_t n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> q(n * n);
  for (auto& v : q) v = dist(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = q.data() + i * n;
    for (std::size_t j = 0; j < i; ++j) {
      const double* prev = q.data() + j * n;
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += row[k] * prev[k];
      for (std::size_t k = 0; k < n; ++k) row[k] -= dot * prev[k];
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += row[k] * row[k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < n; ++k) row[k] /= norm;
  }
  return {q.begin(), q.end()};
}

#define RESPDL_INSTANTIATE(T)                          \
  template class Dense<T>;                             \
  template class BatchNorm2d<T>;                       \
  template class ReLU<T>;                              \
  template class AvgPool2d<T>;                         \
  template class GlobalAvgPool<T>;                     \
  template class Dropout<T>;                           \
  template class Softmax<T>;                           \
  template class ToSequence<T>;                        \
  template class FeatureMean<T>;                       \
  template class Sequential<T>;                        \
  template Tensor<T> softmax_rows(const Tensor<T>&);   \
  template std::vector<T> orthogonal_matrix(std::size_t, Rng&);

RESPDL_INSTANTIATE(float)
RESPDL_INSTANTIATE(double)

#undef RESPDL_INSTANTIATE

}  // namespace respdl::nn
