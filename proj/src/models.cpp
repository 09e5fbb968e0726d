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

#include "respdl/models.hpp"

#include <algorithm>
#include <cmath>

#include "respdl/errors.hpp"
#include "respdl/nn/blas.hpp"

namespace respdl::models {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kCnnMoe:
      return "cnn_moe";
    case ModelKind::kCrnn:
      return "crnn";
    case ModelKind::kEnsemble:
      return "ensemble";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "cnn_moe") return ModelKind::kCnnMoe;
  if (name == "crnn") return ModelKind::kCrnn;
  if (name == "ensemble") return ModelKind::kEnsemble;
  throw ParameterError("unknown model '" + std::string(name) +
                       "' (expected cnn_moe, crnn or ensemble)");
}

// ---- MoE ------------------------------------------------------------------

namespace {

template <typename T>
void uniform_fill(std::span<T> v, double limit, nn::Rng& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& x : v) x = static_cast<T>(dist(rng));
}

double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

template <typename T>
MoeLayer<T>::MoeLayer(std::size_t input, std::size_t n_classes, std::size_t experts,
                      nn::Rng& rng)
    : input_(input),
      classes_(n_classes),
      experts_(experts),
      expert_w_("experts.weight", Tensor<T>({experts * n_classes, input})),
      expert_b_("experts.bias", Tensor<T>({experts * n_classes})),
      gate_w_("gate.weight", Tensor<T>({experts, input})),
      gate_b_("gate.bias", Tensor<T>({experts})) {
  if (input == 0 || n_classes == 0 || experts == 0) {
    throw ParameterError("MoE: input, classes and experts must be positive");
  }
  uniform_fill(expert_w_.value.values(), xavier_limit(input, n_classes), rng);
  uniform_fill(gate_w_.value.values(), xavier_limit(input, experts), rng);
}

template <typename T>
void MoeLayer<T>::set_name(const std::string& name) {
  this->name_ = name;
  expert_w_.name = name + ".experts.weight";
  expert_b_.name = name + ".experts.bias";
  gate_w_.name = name + ".gate.weight";
  gate_b_.name = name + ".gate.bias";
}

template <typename T>
std::vector<nn::Parameter<T>*> MoeLayer<T>::parameters() {
  return {&expert_w_, &expert_b_, &gate_w_, &gate_b_};
}

template <typename T>
Shape MoeLayer<T>::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != input_) {
    throw ShapeError("MoE: expected (B, " + std::to_string(input_) + ") input, got " +
                     nn::shape_string(input));
  }
  return {input[0], classes_};
}

template <typename T>
Tensor<T> MoeLayer<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_shape = output_shape(x.shape());
  const std::size_t b = x.dim(0), jn = experts_ * classes_;
  input_cache_ = x;

  expert_out_ = Tensor<T>({b, experts_, classes_});
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(expert_b_.value.data(), jn, expert_out_.data() + i * jn);
  }
  nn::gemm(false, true, static_cast<int>(b), static_cast<int>(jn), static_cast<int>(input_),
           T{1}, x.data(), static_cast<int>(input_), expert_w_.value.data(),
           static_cast<int>(input_), T{1}, expert_out_.data(), static_cast<int>(jn));
  for (auto& v : expert_out_.values()) v = std::max(v, T{0});

  Tensor<T> gate_logits({b, experts_});
  for (std::size_t i = 0; i < b; ++i) {
    std::copy_n(gate_b_.value.data(), experts_, gate_logits.data() + i * experts_);
  }
  nn::gemm(false, true, static_cast<int>(b), static_cast<int>(experts_),
           static_cast<int>(input_), T{1}, x.data(), static_cast<int>(input_),
           gate_w_.value.data(), static_cast<int>(input_), T{1}, gate_logits.data(),
           static_cast<int>(experts_));
  gate_ = nn::softmax_rows(gate_logits);

  Tensor<T> z(out_shape);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < experts_; ++j) {
      const T g = gate_[i * experts_ + j];
      const T* e = expert_out_.data() + (i * experts_ + j) * classes_;
      for (std::size_t n = 0; n < classes_; ++n) z[i * classes_ + n] += g * e[n];
    }
  }
  return z;
}

template <typename T>
Tensor<T> MoeLayer<T>::backward(const Tensor<T>& grad_out) {
  const std::size_t b = input_cache_.dim(0), jn = experts_ * classes_;
  Tensor<T> d_expert({b, jn});
  Tensor<T> d_gate({b, experts_});
  for (std::size_t i = 0; i < b; ++i) {
    const T* dz = grad_out.data() + i * classes_;
    double weighted = 0.0;
    std::vector<double> dg(experts_);
    for (std::size_t j = 0; j < experts_; ++j) {
      const T g = gate_[i * experts_ + j];
      const T* e = expert_out_.data() + (i * experts_ + j) * classes_;
      T* de = d_expert.data() + i * jn + j * classes_;
      double acc = 0.0;
      for (std::size_t n = 0; n < classes_; ++n) {
        acc += static_cast<double>(dz[n]) * e[n];
        de[n] = e[n] > T{0} ? dz[n] * g : T{0};
      }
      dg[j] = acc;
      weighted += acc * g;
    }
    for (std::size_t j = 0; j < experts_; ++j) {
      d_gate[i * experts_ + j] = static_cast<T>(gate_[i * experts_ + j] * (dg[j] - weighted));
    }
  }

  const int ib = static_cast<int>(b), in = static_cast<int>(input_);
  nn::gemm(true, false, static_cast<int>(jn), in, ib, T{1}, d_expert.data(),
           static_cast<int>(jn), input_cache_.data(), in, T{1}, expert_w_.grad.data(), in);
  nn::gemm(true, false, static_cast<int>(experts_), in, ib, T{1}, d_gate.data(),
           static_cast<int>(experts_), input_cache_.data(), in, T{1}, gate_w_.grad.data(), in);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t k = 0; k < jn; ++k) expert_b_.grad[k] += d_expert[i * jn + k];
    for (std::size_t j = 0; j < experts_; ++j) gate_b_.grad[j] += d_gate[i * experts_ + j];
  }

  Tensor<T> dx(input_cache_.shape());
  nn::gemm(false, false, ib, in, static_cast<int>(jn), T{1}, d_expert.data(),
           static_cast<int>(jn), expert_w_.value.data(), in, T{0}, dx.data(), in);
  nn::gemm(false, false, ib, in, static_cast<int>(experts_), T{1}, d_gate.data(),
           static_cast<int>(experts_), gate_w_.value.data(), in, T{1}, dx.data(), in);
  return dx;
}

template <typename T>
Tensor<T> moe_probs(MoeLayer<T>& layer, const Tensor<T>& features, Mode mode) {
  return nn::softmax_rows(layer.forward(features, mode));
}

// ---- shared model plumbing ----------------------------------------------------

namespace {

Shape per_sample(const Shape& full) {
  if (full.size() == 4) return {full[2], full[3], full[1]};  // (freq, time, channels)
  return Shape(full.begin() + 1, full.end());
}

std::size_t scaled(int width, int divisor) {
  return static_cast<std::size_t>(std::max(1, width / std::max(1, divisor)));
}

void check_options(const ModelOptions& o) {
  if (o.n_classes < 2) throw ParameterError("model needs at least 2 classes");
  if (o.patch_rows <= 0 || o.patch_width <= 0) throw ParameterError("patch size must be positive");
  if (o.experts <= 0) throw ParameterError("experts must be positive");
  if (o.gru_hidden <= 0) throw ParameterError("gru_hidden must be positive");
  if (o.width_divisor <= 0) throw ParameterError("width_divisor must be positive");
}

void check_against_published(const ShapeTrace& built, const ShapeTrace& published,
                             const char* model) {
  for (std::size_t i = 0; i < built.size() && i < published.size(); ++i) {
    if (built[i].shape != published[i].shape) {
      throw ShapeError(std::string(model) + " " + built[i].stage + ": built " +
                       nn::shape_string(built[i].shape) + ", expected " +
                       nn::shape_string(published[i].shape));
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> Classifier<T>::as_image(const Tensor<T>& patches) const {
  const auto rows = static_cast<std::size_t>(opts_.patch_rows);
  const auto width = static_cast<std::size_t>(opts_.patch_width);
  if (patches.rank() == 3 && patches.dim(1) == rows && patches.dim(2) == width) {
    return patches.reshaped({patches.dim(0), 1, rows, width});
  }
  if (patches.rank() == 4 && patches.dim(1) == 1 && patches.dim(2) == rows &&
      patches.dim(3) == width) {
    return patches;
  }
  throw ShapeError("model expects (B, " + std::to_string(rows) + ", " + std::to_string(width) +
                   ") patches, got " + nn::shape_string(patches.shape()));
}

template <typename T>
ModelOutput<T> Classifier<T>::forward(const Tensor<T>& patches, Mode mode) {
  ModelOutput<T> out;
  out.logits = logits(patches, mode);
  out.probs = nn::softmax_rows(out.logits);
  return out;
}

// ---- CNN-MoE --------------------------------------------------------------

namespace {

struct CnnBlockSpec {
  int channels;
  bool pool;
  bool global_pool;
  double dropout;
};

constexpr CnnBlockSpec kCnnBlocks[] = {
    {64, true, false, 0.1},   {128, true, false, 0.15}, {256, false, false, 0.2},
    {256, true, false, 0.2},  {512, false, false, 0.25}, {512, false, true, 0.25},
};

struct CrnnBlockSpec {
  int channels;
  std::size_t pool_h;
  double dropout;
};

constexpr CrnnBlockSpec kCrnnBlocks[] = {
    {64, 2, 0.1}, {128, 2, 0.15}, {256, 4, 0.2}, {512, 4, 0.25}};

constexpr int kCrnnDense = 1024;
constexpr double kCrnnDenseDropout = 0.3;

}  // namespace

ShapeTrace published_cnn_moe_trace(int n_classes) {
  const auto n = static_cast<std::size_t>(n_classes);
  return {{"block1", {32, 64, 64}}, {"block2", {16, 32, 128}}, {"block3", {16, 32, 256}},
          {"block4", {8, 16, 256}}, {"block5", {8, 16, 512}},  {"block6", {512}},
          {"moe", {n}},             {"softmax", {n}}};
}

ShapeTrace published_crnn_trace(int n_classes) {
  const auto n = static_cast<std::size_t>(n_classes);
  return {{"block1", {32, 128, 64}}, {"block2", {16, 128, 128}}, {"block3", {4, 128, 256}},
          {"block4", {128, 512}},    {"bigru", {256, 512}},      {"feature_mean", {256}},
          {"fc1", {1024}},           {"fc2", {1024}},            {"fc3", {n}},
          {"softmax", {n}}};
}

template <typename T>
CnnMoe<T>::CnnMoe(ModelOptions opts) : Classifier<T>(opts) {
  check_options(opts);
  nn::Rng rng(opts.seed);
  std::size_t in_c = 1;
  int index = 1;
  for (const auto& spec : kCnnBlocks) {
    const std::size_t out_c = scaled(spec.channels, opts.width_divisor);
    auto block = std::make_unique<nn::Sequential<T>>();
    block->template emplace<nn::BatchNorm2d<T>>("bn_in", in_c);
    block->template emplace<nn::Conv2d<T>>("conv", in_c, out_c, 3, 3, rng);
    block->template emplace<nn::ReLU<T>>("relu");
    block->template emplace<nn::BatchNorm2d<T>>("bn_out", out_c);
    if (spec.pool) block->template emplace<nn::AvgPool2d<T>>("pool", 2, 2);
    if (spec.global_pool) block->template emplace<nn::GlobalAvgPool<T>>("gap");
    block->template emplace<nn::Dropout<T>>("dropout", spec.dropout, rng());
    trunk_.add("block" + std::to_string(index++), std::move(block));
    in_c = out_c;
  }
  trunk_.set_name("cnn");
  moe_ = std::make_unique<MoeLayer<T>>(in_c, static_cast<std::size_t>(opts.n_classes),
                                       static_cast<std::size_t>(opts.experts), rng);
  moe_->set_name("moe");

  Shape s{1, 1, static_cast<std::size_t>(opts.patch_rows),
          static_cast<std::size_t>(opts.patch_width)};
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    try {
      s = trunk_.at(i).output_shape(s);
    } catch (const ShapeError& e) {
      throw ShapeError("CNN-MoE " + trunk_.child_name(i) + ": " + e.what());
    }
    trace_.push_back({trunk_.child_name(i), per_sample(s)});
  }
  s = moe_->output_shape(s);
  trace_.push_back({"moe", per_sample(s)});
  trace_.push_back({"softmax", per_sample(s)});
  if (opts.patch_rows == 64 && opts.patch_width == 128 && opts.width_divisor == 1) {
    check_against_published(trace_, published_cnn_moe_trace(opts.n_classes), "CNN-MoE");
  }
}

template <typename T>
Tensor<T> CnnMoe<T>::logits(const Tensor<T>& patches, Mode mode) {
  return moe_->forward(trunk_.forward(this->as_image(patches), mode), mode);
}

template <typename T>
void CnnMoe<T>::backward(const Tensor<T>& grad_logits) {
  trunk_.backward(moe_->backward(grad_logits));
}

template <typename T>
std::vector<nn::Parameter<T>*> CnnMoe<T>::parameters() {
  auto p = trunk_.parameters();
  auto m = moe_->parameters();
  p.insert(p.end(), m.begin(), m.end());
  return p;
}

template <typename T>
std::vector<nn::NamedTensor<T>> CnnMoe<T>::buffers() {
  return trunk_.buffers();
}

// ---- C-RNN ------------------------------------------------------------------

template <typename T>
Crnn<T>::Crnn(ModelOptions opts) : Classifier<T>(opts) {
  check_options(opts);
  nn::Rng rng(opts.seed);
  std::size_t in_c = 1;
  int index = 1;
  for (const auto& spec : kCrnnBlocks) {
    const std::size_t out_c = scaled(spec.channels, opts.width_divisor);
    auto block = std::make_unique<nn::Sequential<T>>();
    block->template emplace<nn::BatchNorm2d<T>>("bn_in", in_c);
    block->template emplace<nn::Conv2d<T>>("conv", in_c, out_c, 4, 1, rng);
    block->template emplace<nn::ReLU<T>>("relu");
    block->template emplace<nn::BatchNorm2d<T>>("bn_out", out_c);
    block->template emplace<nn::AvgPool2d<T>>("pool", spec.pool_h, 1);
    block->template emplace<nn::Dropout<T>>("dropout", spec.dropout, rng());
    if (index == 4) block->template emplace<nn::ToSequence<T>>("to_sequence");
    net_.add("block" + std::to_string(index++), std::move(block));
    in_c = out_c;
  }
  const std::size_t hidden = scaled(opts.gru_hidden, opts.width_divisor);
  net_.template emplace<nn::BiGru<T>>("bigru", in_c, hidden, rng);
  net_.template emplace<nn::FeatureMean<T>>("feature_mean");
  // The sequence length after the GRU is twice the frame count.
  const std::size_t seq = 2 * static_cast<std::size_t>(opts.patch_width);
  const std::size_t dense = scaled(kCrnnDense, opts.width_divisor);
  std::size_t in_f = seq;
  for (int i = 1; i <= 2; ++i) {
    auto fc = std::make_unique<nn::Sequential<T>>();
    fc->template emplace<nn::Dense<T>>("dense", in_f, dense, rng);
    fc->template emplace<nn::ReLU<T>>("relu");
    fc->template emplace<nn::Dropout<T>>("dropout", kCrnnDenseDropout, rng());
    net_.add("fc" + std::to_string(i), std::move(fc));
    in_f = dense;
  }
  net_.template emplace<nn::Dense<T>>("fc3", in_f, static_cast<std::size_t>(opts.n_classes),
                                      rng);
  net_.set_name("crnn");

  Shape s{1, 1, static_cast<std::size_t>(opts.patch_rows),
          static_cast<std::size_t>(opts.patch_width)};
  for (std::size_t i = 0; i < net_.size(); ++i) {
    try {
      s = net_.at(i).output_shape(s);
    } catch (const ShapeError& e) {
      throw ShapeError("C-RNN " + net_.child_name(i) + ": " + e.what());
    }
    trace_.push_back({net_.child_name(i), per_sample(s)});
  }
  trace_.push_back({"softmax", per_sample(s)});
  if (opts.patch_rows == 64 && opts.patch_width == 128 && opts.width_divisor == 1 &&
      opts.gru_hidden == 512) {
    check_against_published(trace_, published_crnn_trace(opts.n_classes), "C-RNN");
  }
}

template <typename T>
Tensor<T> Crnn<T>::logits(const Tensor<T>& patches, Mode mode) {
  return net_.forward(this->as_image(patches), mode);
}

template <typename T>
void Crnn<T>::backward(const Tensor<T>& grad_logits) {
  net_.backward(grad_logits);
}

template <typename T>
std::unique_ptr<Classifier<T>> make_classifier(ModelKind kind, const ModelOptions& opts) {
  switch (kind) {
    case ModelKind::kCnnMoe:
      return std::make_unique<CnnMoe<T>>(opts);
    case ModelKind::kCrnn:
      return std::make_unique<Crnn<T>>(opts);
    case ModelKind::kEnsemble:
      break;
  }
  throw ParameterError("the ensemble is two classifiers; build cnn_moe and crnn separately");
}

// ---- aggregation ----------------------------------------------------------

std::vector<double> aggregate_patches(std::span<const std::vector<double>> patch_probs) {
  if (patch_probs.empty()) throw ParameterError("cannot aggregate zero patches");
  std::vector<double> mean(patch_probs.front().size(), 0.0);
  for (const auto& p : patch_probs) {
    if (p.size() != mean.size()) throw ShapeError("patch probability vectors differ in length");
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (auto& v : mean) v /= static_cast<double>(patch_probs.size());
  return mean;
}

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<double> ensemble_fuse(std::span<const double> p_a, std::span<const double> p_b) {
  if (p_a.size() != p_b.size()) throw ParameterError("ensemble inputs differ in length");
  std::vector<double> out(p_a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (p_a[i] + p_b[i]) / 2.0;
  return out;
}

EnsembleOutput ensemble_fuse(const Tensor<double>& p_a, const Tensor<double>& p_b) {
  if (p_a.shape() != p_b.shape()) {
    throw ParameterError("ensemble inputs differ: " + nn::shape_string(p_a.shape()) + " vs " +
                     nn::shape_string(p_b.shape()));
  }
  EnsembleOutput out{Tensor<double>(p_a.shape(), ensemble_fuse(p_a.values(), p_b.values())),
                     p_a, p_b};
  return out;
}

// ---- checkpoints ------------------------------------------------------------

template <typename T>
nn::Checkpoint to_checkpoint(Classifier<T>& model, const std::string& task) {
  nn::Checkpoint ckpt;
  ckpt.task = task;
  for (auto* p : model.parameters()) ckpt.records.emplace_back(p->name, p->value.template cast<float>());
  for (auto& b : model.buffers()) ckpt.records.emplace_back(b.name, b.tensor->template cast<float>());
  return ckpt;
}

template <typename T>
void load_weights(Classifier<T>& model, const nn::Checkpoint& ckpt) {
  auto restore = [&](const std::string& name, Tensor<T>& dst) {
    const Tensor<float>* src = ckpt.find(name);
    if (src == nullptr) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (src->shape() != dst.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " +
                        nn::shape_string(src->shape()) + ", model expects " +
                        nn::shape_string(dst.shape()));
    }
    dst = src->template cast<T>();
  };
  for (auto* p : model.parameters()) restore(p->name, p->value);
  for (auto& b : model.buffers()) restore(b.name, *b.tensor);
}

#define RESPDL_INSTANTIATE(T)                                                          \
  template class MoeLayer<T>;                                                          \
  template Tensor<T> moe_probs(MoeLayer<T>&, const Tensor<T>&, Mode);                  \
  template class Classifier<T>;                                                        \
  template class CnnMoe<T>;                                                            \
  template class Crnn<T>;                                                              \
  template std::unique_ptr<Classifier<T>> make_classifier<T>(ModelKind,                \
                                                             const ModelOptions&);     \
  template nn::Checkpoint to_checkpoint(Classifier<T>&, const std::string&);           \
  template void load_weights(Classifier<T>&, const nn::Checkpoint&);

RESPDL_INSTANTIATE(float)
RESPDL_INSTANTIATE(double)

}  // namespace respdl::models
