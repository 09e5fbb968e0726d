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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "respdl/nn/checkpoint.hpp"
#include "respdl/nn/layers.hpp"

namespace respdl::models {

using nn::Mode;
using nn::Shape;
using nn::Tensor;

enum class ModelKind { kCnnMoe, kCrnn, kEnsemble };

std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view name);

// Mixture of experts producing class logits
//   z = sum_j g_j * e_j,  e_j = relu(W_j x + b_j),  g = softmax(W_g x + b_g).
// The class distribution is softmax(z); that softmax is applied by the
// owning model (or moe_probs), never twice.
template <typename T>
class MoeLayer final : public nn::Layer<T> {
 public:
  MoeLayer(std::size_t input, std::size_t n_classes, std::size_t experts, nn::Rng& rng);

  std::string kind() const override { return "MoE"; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  std::vector<nn::Parameter<T>*> parameters() override;
  void set_name(const std::string& name) override;

  std::size_t experts() const { return experts_; }
  // Caches from the last forward: gate g (B x J), expert outputs (B x J x N).
  const Tensor<T>& gate() const { return gate_; }
  const Tensor<T>& expert_outputs() const { return expert_out_; }
  nn::Parameter<T>& expert_weight() { return expert_w_; }  // (J*N, input)
  nn::Parameter<T>& expert_bias() { return expert_b_; }    // (J*N)
  nn::Parameter<T>& gate_weight() { return gate_w_; }      // (J, input)
  nn::Parameter<T>& gate_bias() { return gate_b_; }        // (J)

 private:
  std::size_t input_, classes_, experts_;
  nn::Parameter<T> expert_w_, expert_b_, gate_w_, gate_b_;
  Tensor<T> input_cache_, gate_, expert_out_;
};

// softmax of the MoE logits.
template <typename T>
Tensor<T> moe_probs(MoeLayer<T>& layer, const Tensor<T>& features, Mode mode);

struct ModelOptions {
  int n_classes = 4;
  int patch_rows = 64;
  int patch_width = 128;
  int experts = 10;
  int gru_hidden = 512;
  // Divides every convolution/recurrent/dense width; 1 is the published
  // architecture. Larger values give reduced models for fast tests.
  int width_divisor = 1;
  std::uint64_t seed = 1;
};

struct TraceEntry {
  std::string stage;
  Shape shape;  // per sample; conv stages as (freq, time, channels)

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};
using ShapeTrace = std::vector<TraceEntry>;

template <typename T>
struct ModelOutput {
  Tensor<T> logits;
  Tensor<T> probs;  // rows on the simplex
};

// A patch classifier: B x rows x width patches -> B x N class logits.
template <typename T>
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual ModelKind kind() const = 0;
  virtual Tensor<T> logits(const Tensor<T>& patches, Mode mode) = 0;
  // Backpropagates d(loss)/d(logits) into parameter gradients.
  virtual void backward(const Tensor<T>& grad_logits) = 0;
  virtual std::vector<nn::Parameter<T>*> parameters() = 0;
  virtual std::vector<nn::NamedTensor<T>> buffers() = 0;
  virtual ShapeTrace shape_trace() const = 0;

  ModelOutput<T> forward(const Tensor<T>& patches, Mode mode);
  const ModelOptions& options() const { return opts_; }

 protected:
  explicit Classifier(ModelOptions opts) : opts_(opts) {}
  Tensor<T> as_image(const Tensor<T>& patches) const;

  ModelOptions opts_;
};

// CNN trunk of six Bn-Cv3x3-Relu-Bn[-Ap2x2]-Dr blocks ending in global
// average pooling, followed by the MoE head.
template <typename T>
class CnnMoe final : public Classifier<T> {
 public:
  explicit CnnMoe(ModelOptions opts);

  ModelKind kind() const override { return ModelKind::kCnnMoe; }
  Tensor<T> logits(const Tensor<T>& patches, Mode mode) override;
  void backward(const Tensor<T>& grad_logits) override;
  std::vector<nn::Parameter<T>*> parameters() override;
  std::vector<nn::NamedTensor<T>> buffers() override;
  ShapeTrace shape_trace() const override { return trace_; }

  nn::Sequential<T>& trunk() { return trunk_; }
  MoeLayer<T>& moe() { return *moe_; }

 private:
  nn::Sequential<T> trunk_;
  std::unique_ptr<MoeLayer<T>> moe_;
  ShapeTrace trace_;
};

// Four frequency-only Bn-Cv4x1-Relu-Bn-Ap-Dr blocks collapse the frequency
// axis, a bi-GRU runs over the frames, the feature axis is averaged, and
// three dense layers classify.
template <typename T>
class Crnn final : public Classifier<T> {
 public:
  explicit Crnn(ModelOptions opts);

  ModelKind kind() const override { return ModelKind::kCrnn; }
  Tensor<T> logits(const Tensor<T>& patches, Mode mode) override;
  void backward(const Tensor<T>& grad_logits) override;
  std::vector<nn::Parameter<T>*> parameters() override { return net_.parameters(); }
  std::vector<nn::NamedTensor<T>> buffers() override { return net_.buffers(); }
  ShapeTrace shape_trace() const override { return trace_; }

  nn::Sequential<T>& net() { return net_; }

 private:
  nn::Sequential<T> net_;
  ShapeTrace trace_;
};

// The published per-sample shape schedules for 64 x 128 patches.
ShapeTrace published_cnn_moe_trace(int n_classes);
ShapeTrace published_crnn_trace(int n_classes);

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(ModelKind kind, const ModelOptions& opts);

// Arithmetic mean of patch probability vectors.
std::vector<double> aggregate_patches(std::span<const std::vector<double>> patch_probs);
int argmax(std::span<const double> v);

struct EnsembleOutput {
  Tensor<double> fused;
  Tensor<double> cnn_moe;
  Tensor<double> crnn;
};

// (p_a + p_b) / 2 element-wise.
EnsembleOutput ensemble_fuse(const Tensor<double>& p_a, const Tensor<double>& p_b);
std::vector<double> ensemble_fuse(std::span<const double> p_a, std::span<const double> p_b);

// Parameters and buffers as checkpoint records (float32), plus Adam moments
// when given.
template <typename T>
nn::Checkpoint to_checkpoint(Classifier<T>& model, const std::string& task);
// Restores by name; every model tensor must be present with a matching shape.
template <typename T>
void load_weights(Classifier<T>& model, const nn::Checkpoint& ckpt);

}  // namespace respdl::models
