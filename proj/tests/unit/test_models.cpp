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

#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "respdl/errors.hpp"
#include "respdl/models.hpp"
#include "respdl/nn/adam.hpp"
#include "respdl/nn/loss.hpp"

using namespace respdl;
using namespace respdl::models;
using nn::Shape;
using nn::Tensor;

namespace {

Tensor<double> randn(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor<double> t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  for (auto& v : t.values()) v = g(rng);
  return t;
}

template <typename T>
void check_rows_stochastic(const Tensor<T>& p) {
  const std::size_t n = p.dim(1);
  for (std::size_t i = 0; i < p.dim(0); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      REQUIRE(p[i * n + j] >= 0);
      s += p[i * n + j];
    }
    REQUIRE(std::abs(s - 1.0) <= 1e-6);
  }
}

// Sets every expert to the same weights.
void make_experts_equal(MoeLayer<double>& moe, std::size_t n, std::size_t in) {
  auto& w = moe.expert_weight().value;
  auto& b = moe.expert_bias().value;
  for (std::size_t j = 1; j < moe.experts(); ++j) {
    for (std::size_t k = 0; k < n * in; ++k) w[j * n * in + k] = w[k];
    for (std::size_t k = 0; k < n; ++k) b[j * n + k] = b[k];
  }
}

}  // namespace

TEST_CASE("published shape traces") {
  for (int n : {2, 3, 4}) {
    CnnMoe<float> cnn(ModelOptions{n});
    CHECK(cnn.shape_trace() == published_cnn_moe_trace(n));
    const auto t = published_cnn_moe_trace(n);
    CHECK(t.front().shape == Shape{32, 64, 64});
    CHECK(t[1].shape == Shape{16, 32, 128});
    CHECK(t[2].shape == Shape{16, 32, 256});
    CHECK(t[3].shape == Shape{8, 16, 256});
    CHECK(t[4].shape == Shape{8, 16, 512});
    CHECK(t[5].shape == Shape{512});
    CHECK(t.back().shape == Shape{static_cast<std::size_t>(n)});
  }
  Crnn<float> crnn(ModelOptions{4});
  CHECK(crnn.shape_trace() == published_crnn_trace(4));
  std::vector<Shape> want = {{32, 128, 64}, {16, 128, 128}, {4, 128, 256}, {128, 512}, {256, 512},
                             {256},         {1024},        {1024},        {4}};
  const auto t = published_crnn_trace(4);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(t[i].shape == want[i]);
}

TEST_CASE("published-size models give distributions for zero input") {
  CnnMoe<float> cnn(ModelOptions{4});
  const auto p1 = cnn.forward(Tensor<float>({1, 64, 128}), nn::Mode::kInfer).probs;
  CHECK(p1.shape() == Shape{1, 4});
  check_rows_stochastic(p1);
  Crnn<float> crnn(ModelOptions{3});
  const auto p2 = crnn.forward(Tensor<float>({1, 64, 128}), nn::Mode::kInfer).probs;
  CHECK(p2.shape() == Shape{1, 3});
  check_rows_stochastic(p2);
}

TEST_CASE("reduced models: outputs on the simplex in both modes") {
  ModelOptions o;
  o.patch_width = 32;
  o.width_divisor = 8;
  o.gru_hidden = 16;
  for (auto kind : {ModelKind::kCnnMoe, ModelKind::kCrnn}) {
    auto m = make_classifier<double>(kind, o);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto x = randn({3, 64, 32}, seed, 10.0);
      check_rows_stochastic(m->forward(x, nn::Mode::kTrain).probs);
      check_rows_stochastic(m->forward(x, nn::Mode::kInfer).probs);
    }
  }
  CHECK_THROWS_AS(make_classifier<float>(ModelKind::kEnsemble, o), ParameterError);
  auto m = make_classifier<float>(ModelKind::kCnnMoe, o);
  CHECK_THROWS_AS(m->forward(Tensor<float>({1, 64, 30}), nn::Mode::kInfer), ShapeError);
}

TEST_CASE("MoE: single expert") {
  nn::Rng rng(3);
  MoeLayer<double> moe(6, 4, 1, rng);
  const auto x = randn({5, 6}, 1);
  const auto p = moe_probs(moe, x, nn::Mode::kInfer);
  for (double g : moe.gate().values()) CHECK(g == 1.0);
  // softmax(relu(W x + b))
  const auto& e = moe.expert_outputs();
  const auto want = nn::softmax_rows(e.reshaped({5, 4}));
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - want[i]) < 1e-9);
}

TEST_CASE("MoE: equal experts ignore the gate") {
  nn::Rng rng(4);
  MoeLayer<double> moe(6, 3, 10, rng);
  make_experts_equal(moe, 3, 6);
  const auto x = randn({4, 6}, 2);
  const auto p = moe_probs(moe, x, nn::Mode::kInfer);
  Tensor<double> e1({4, 3});
  for (std::size_t b = 0; b < 4; ++b) {
    for (std::size_t c = 0; c < 3; ++c) e1[b * 3 + c] = moe.expert_outputs()[(b * 10) * 3 + c];
  }
  const auto want = nn::softmax_rows(e1);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(p[i] - want[i]) < 1e-9);
}

TEST_CASE("MoE: symmetric two-expert case") {
  nn::Rng rng(5);
  MoeLayer<double> moe(2, 2, 2, rng);
  // e_1 = relu(x), e_2 = relu(swap(x)); the gate ignores the input.
  auto& w = moe.expert_weight().value;
  w.fill(0.0);
  w[0] = 1.0;  // expert 1, class 0 <- x0
  w[3] = 1.0;  // expert 1, class 1 <- x1
  w[5] = 1.0;  // expert 2, class 0 <- x1
  w[6] = 1.0;  // expert 2, class 1 <- x0
  moe.expert_bias().value.fill(0.0);
  moe.gate_weight().value.fill(0.0);
  moe.gate_bias().value.fill(0.0);
  const Tensor<double> x({1, 2}, std::vector<double>{1.0, 0.0});
  const auto p = moe_probs(moe, x, nn::Mode::kInfer);
  CHECK(moe.gate()[0] == 0.5);
  CHECK(moe.expert_outputs()[0] == 1.0);
  CHECK(moe.expert_outputs()[3] == 1.0);
  CHECK(std::abs(p[0] - 0.5) < 1e-9);
  CHECK(std::abs(p[1] - 0.5) < 1e-9);
}

TEST_CASE("MoE gate lies on the simplex") {
  nn::Rng rng(6);
  MoeLayer<double> moe(12, 4, 10, rng);
  for (std::uint64_t s = 0; s < 5; ++s) {
    moe.forward(randn({7, 12}, s, 5.0), nn::Mode::kTrain);
    check_rows_stochastic(moe.gate());
  }
}

TEST_CASE("patch aggregation") {
  const std::vector<std::vector<double>> one = {{0.2, 0.8}};
  CHECK(aggregate_patches(one) == one[0]);
  const std::vector<std::vector<double>> two = {{1.0, 0.0}, {0.0, 1.0}};
  CHECK(aggregate_patches(two) == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(aggregate_patches(std::vector<std::vector<double>>{}), ParameterError);
  std::mt19937_64 rng(1);
  std::vector<std::vector<double>> many;
  for (int i = 0; i < 9; ++i) {
    std::vector<double> p(4);
    double s = 0.0;
    for (auto& v : p) s += (v = static_cast<double>(rng() % 100 + 1));
    for (auto& v : p) v /= s;
    many.push_back(p);
  }
  const auto m = aggregate_patches(many);
  CHECK(std::abs(m[0] + m[1] + m[2] + m[3] - 1.0) < 1e-12);
  CHECK(argmax(std::vector<double>{0.1, 0.5, 0.5, 0.2}) == 1);
}

TEST_CASE("ensemble fusion") {
  const auto f = ensemble_fuse(std::vector<double>{0.8, 0.2}, std::vector<double>{0.6, 0.4});
  CHECK(std::abs(f[0] - 0.7) < 1e-12);
  CHECK(std::abs(f[1] - 0.3) < 1e-12);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Tensor<double> a({6, 4}), b({6, 4});
  for (auto* t : {&a, &b}) {
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 4; ++c) s += ((*t)[i * 4 + c] = u(rng));
      for (std::size_t c = 0; c < 4; ++c) (*t)[i * 4 + c] /= s;
    }
  }
  const auto ab = ensemble_fuse(a, b);
  const auto ba = ensemble_fuse(b, a);
  const auto aa = ensemble_fuse(a, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(ab.fused[i] - (a[i] + b[i]) / 2) < 1e-12);
    CHECK(std::abs(ab.fused[i] - ba.fused[i]) < 1e-12);
    CHECK(std::abs(aa.fused[i] - a[i]) < 1e-12);
  }
  CHECK(ab.cnn_moe == a);
  CHECK(ab.crnn == b);
  check_rows_stochastic(ab.fused);
  CHECK_THROWS_AS(ensemble_fuse(a, Tensor<double>({6, 3})), ParameterError);
  CHECK_THROWS_AS(ensemble_fuse(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), ParameterError);
}

namespace {

// 40 patches, four classes, each a Gaussian blob in a distinct
// frequency/time quadrant on top of unit noise.
void blob_set(Tensor<float>& x, std::vector<int>& labels, std::size_t width) {
  std::mt19937_64 rng(17);
  std::normal_distribution<float> g;
  x = Tensor<float>({40, 64, width});
  labels.clear();
  for (std::size_t i = 0; i < 40; ++i) {
    const int c = static_cast<int>(i % 4);
    labels.push_back(c);
    const double fr = c < 2 ? 16.0 : 48.0;
    const double tc = (c % 2 == 0) ? width * 0.25 : width * 0.75;
    for (std::size_t r = 0; r < 64; ++r) {
      for (std::size_t t = 0; t < width; ++t) {
        const double d = ((r - fr) * (r - fr)) / 50.0 + ((t - tc) * (t - tc)) / 20.0;
        x[(i * 64 + r) * width + t] = g(rng) * 0.5f + static_cast<float>(3.0 * std::exp(-d));
      }
    }
  }
}

double overfit_accuracy(ModelKind kind) {
  ModelOptions o;
  o.patch_width = 32;
  o.width_divisor = 8;
  o.gru_hidden = 32;
  auto model = make_classifier<float>(kind, o);
  Tensor<float> x;
  std::vector<int> labels;
  blob_set(x, labels, 32);
  Tensor<float> y({40, 4});
  for (std::size_t i = 0; i < 40; ++i) y[i * 4 + static_cast<std::size_t>(labels[i])] = 1.0f;
  auto params = model->parameters();
  nn::Adam<float> opt(params, nn::AdamConfig{1e-3, 0.9, 0.999, 1e-8});
  double acc = 0.0;
  for (int epoch = 1; epoch <= 200; ++epoch) {
    opt.zero_grad();
    const auto out = model->forward(x, nn::Mode::kTrain);
    const auto r = nn::loss_ce_l2<float>(out.probs, y, params, 1e-4);
    model->backward(r.grad_logits);
    opt.step();
    const auto p = model->forward(x, nn::Mode::kInfer).probs;
    int correct = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      std::vector<double> row(p.data() + i * 4, p.data() + i * 4 + 4);
      correct += argmax(row) == labels[i] ? 1 : 0;
    }
    acc = correct / 40.0;
    if (acc >= 0.95) break;
  }
  return acc;
}

}  // namespace

TEST_CASE("CNN-MoE overfits four Gaussian-blob classes") {
  CHECK(overfit_accuracy(ModelKind::kCnnMoe) >= 0.95);
}

TEST_CASE("C-RNN overfits four Gaussian-blob classes") {
  CHECK(overfit_accuracy(ModelKind::kCrnn) >= 0.95);
}

TEST_CASE("weights survive a checkpoint round trip") {
  ModelOptions o;
  o.patch_width = 32;
  o.width_divisor = 8;
  o.gru_hidden = 8;
  for (auto kind : {ModelKind::kCnnMoe, ModelKind::kCrnn}) {
    auto a = make_classifier<float>(kind, o);
    o.seed = 99;
    auto b = make_classifier<float>(kind, o);
    o.seed = 1;
    Tensor<float> x({2, 64, 32});
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g;
    for (auto& v : x.values()) v = g(rng);
    a->forward(x, nn::Mode::kTrain);  // moves batch-norm running stats
    const auto ckpt = to_checkpoint(*a, "task1_4class");
    load_weights(*b, ckpt);
    CHECK(a->forward(x, nn::Mode::kInfer).probs == b->forward(x, nn::Mode::kInfer).probs);

    auto broken = ckpt;
    broken.records.pop_back();
    CHECK_THROWS_AS(load_weights(*b, broken), FormatError);
  }
}

TEST_CASE("model kinds") {
  for (auto k : {ModelKind::kCnnMoe, ModelKind::kCrnn, ModelKind::kEnsemble}) {
    CHECK(parse_model_kind(to_string(k)) == k);
  }
  CHECK_THROWS_AS(parse_model_kind("resnet"), ParameterError);
}
