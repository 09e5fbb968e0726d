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

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "respdl/nn/tensor.hpp"

namespace respdl::nn {

enum class Mode { kTrain, kInfer };

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool decay = true;  // included in the L2 penalty

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v, bool d = true)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()), decay(d) {}
  void zero_grad() { grad.fill(T{0}); }
};

// Non-trainable persistent state (batch-norm running statistics).
template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T>* tensor = nullptr;
};

using Rng = std::mt19937_64;

// Forward caches whatever backward needs; backward accumulates parameter
// gradients and returns the gradient with respect to the forward input.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  // Full shapes, batch dimension first.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual std::vector<Parameter<T>*> parameters() { return {}; }
  virtual std::vector<NamedTensor<T>> buffers() { return {}; }
  // Propagates a name prefix to parameters and buffers.
  virtual void set_name(const std::string& name) { name_ = name; }
  const std::string& name() const { return name_; }

 protected:
  std::string name_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  // Xavier-uniform weights, zero bias.
  Dense(std::size_t in, std::size_t out, Rng& rng);

  std::string kind() const override { return "Dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  void set_name(const std::string& name) override;

  Parameter<T>& weight() { return weight_; }  // (out, in)
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

// Stride 1, "same" padding; even kernels put the extra row/column of
// padding on the trailing side.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  // He-uniform weights, zero bias.
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
         std::size_t kernel_w, Rng& rng);

  std::string kind() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override { return {&weight_, &bias_}; }
  void set_name(const std::string& name) override;

  Parameter<T>& weight() { return weight_; }  // (out, in, kh, kw)
  Parameter<T>& bias() { return bias_; }

 private:
  void im2col(const T* x, std::size_t h, std::size_t w, T* col) const;
  void col2im(const T* col, std::size_t h, std::size_t w, T* x) const;

  std::size_t in_c_, out_c_, kh_, kw_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

// Per-channel batch normalization over (batch, height, width) of a
// B x C x H x W input. Running stats: r <- momentum * r + (1 - momentum) * batch.
template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, double eps = 1e-5, double momentum = 0.9);

  std::string kind() const override { return "BatchNorm2d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override { return {&gamma_, &beta_}; }
  std::vector<NamedTensor<T>> buffers() override;
  void set_name(const std::string& name) override;

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  const Tensor<T>& running_mean() const { return running_mean_; }
  const Tensor<T>& running_var() const { return running_var_; }

 private:
  std::size_t channels_;
  double eps_, momentum_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  bool trained_ = false;
  bool warned_ = false;
  // backward cache
  Tensor<T> xhat_;
  std::vector<double> inv_std_;
  Mode last_mode_ = Mode::kTrain;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  std::string kind() const override { return "ReLU"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Tensor<T> output_;
};

// Non-overlapping average pooling; H and W must be divisible by the kernel.
template <typename T>
class AvgPool2d final : public Layer<T> {
 public:
  AvgPool2d(std::size_t kernel_h, std::size_t kernel_w);

  std::string kind() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  std::size_t kh_, kw_;
  Shape in_shape_;
};

// B x C x H x W -> B x C
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  std::string kind() const override { return "GlobalAvgPool"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

// Inverted dropout: kept units scaled by 1 / (1 - rate) in training,
// identity at inference.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(double rate, std::uint64_t seed);

  std::string kind() const override { return "Dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

  double rate() const { return rate_; }
  // Reuse the previous mask on subsequent training passes (gradient checks).
  void freeze_mask(bool frozen) { frozen_ = frozen; }

 private:
  double rate_;
  Rng rng_;
  bool frozen_ = false;
  Tensor<T> mask_;
};

// Row-wise softmax over the last axis of a B x N input.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  std::string kind() const override { return "Softmax"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Tensor<T> output_;
};

// B x C x 1 x T -> B x T x C: turns a frequency-collapsed feature map into a
// frame sequence.
template <typename T>
class ToSequence final : public Layer<T> {
 public:
  std::string kind() const override { return "ToSequence"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

// B x T x F -> B x T, mean over the feature axis.
template <typename T>
class FeatureMean final : public Layer<T> {
 public:
  std::string kind() const override { return "FeatureMean"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;

 private:
  Shape in_shape_;
};

// Bidirectional GRU over a B x T x D sequence with H units per direction.
// Gates follow r, z, n ordering:
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
// Output is B x 2T x H: frames [0, T) are the forward states, frames
// [T, 2T) the backward-direction states in original time order.
template <typename T>
class BiGru final : public Layer<T> {
 public:
  // Xavier-uniform input weights, orthogonal recurrent blocks, zero biases.
  BiGru(std::size_t input_size, std::size_t hidden_size, Rng& rng);

  std::string kind() const override { return "BiGRU"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override;
  void set_name(const std::string& name) override;

  std::size_t hidden_size() const { return hidden_; }
  // Copy forward-direction weights into the backward direction.
  void tie_directions();

  struct Direction {
    Parameter<T> w_ih;  // (3H, D)
    Parameter<T> w_hh;  // (3H, H)
    Parameter<T> b_ih;  // (3H)
    Parameter<T> b_hh;  // (3H)
    // per-step caches, indexed by processing step
    std::vector<T> r, z, n, hn, h_prev;
  };
  Direction& direction(int d) { return dirs_[d]; }

 private:
  void run_direction(Direction& dir, bool reverse, const Tensor<T>& x, Tensor<T>& out,
                     std::size_t frame_offset);
  void backprop_direction(Direction& dir, bool reverse, const Tensor<T>& grad_out,
                          std::size_t frame_offset, Tensor<T>& grad_in);

  std::size_t input_, hidden_;
  Direction dirs_[2];
  Tensor<T> input_cache_;
};

// Owns an ordered list of layers; child names are "<prefix>.<child>".
template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L& emplace(std::string child_name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    add(std::move(child_name), std::move(layer));
    return ref;
  }
  void add(std::string child_name, std::unique_ptr<Layer<T>> layer);

  std::string kind() const override { return "Sequential"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<Parameter<T>*> parameters() override;
  std::vector<NamedTensor<T>> buffers() override;
  void set_name(const std::string& name) override;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_[i].second; }
  const std::string& child_name(std::size_t i) const { return layers_[i].first; }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

// Numerically stable row-wise softmax helpers shared by losses and models.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits);

// Orthogonal n x n matrix from a Gaussian draw (modified Gram-Schmidt).
template <typename T>
std::vector<T> orthogonal_matrix(std::size_t n, Rng& rng);

}  // namespace respdl::nn
