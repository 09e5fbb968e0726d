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

#include "respdl/gradcheck_suite.hpp"

#include <random>

#include "respdl/models.hpp"
#include "respdl/nn/loss.hpp"

namespace respdl {

namespace {

using nn::GradCheckOptions;
using nn::Mode;
using nn::Rng;
using nn::Tensor;

constexpr double kLinearTol = 1e-8;
constexpr double kNonlinearTol = 1e-4;
constexpr double kCompositionTol = 1e-3;

void freeze_dropout(nn::Layer<double>& layer) {
  if (auto* d = dynamic_cast<nn::Dropout<double>*>(&layer)) d->freeze_mask(true);
  if (auto* s = dynamic_cast<nn::Sequential<double>*>(&layer)) {
    for (std::size_t i = 0; i < s->size(); ++i) freeze_dropout(s->at(i));
  }
}

Tensor<double> random_tensor(const nn::Shape& shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> t(shape);
  for (auto& v : t.values()) v = normal(rng);
  return t;
}

Tensor<double> random_targets(std::size_t b, std::size_t n, Rng& rng) {
  Tensor<double> y({b, n});
  for (std::size_t i = 0; i < b; ++i) y[i * n + rng() % n] = 1.0;
  return y;
}

// Softmax + cross-entropy + L2 with respect to the logits and a weight vector.
nn::GradCheckReport loss_check() {
  Rng rng(11);
  Tensor<double> logits = random_tensor({3, 4}, rng);
  const Tensor<double> targets = random_targets(3, 4, rng);
  nn::Parameter<double> theta("theta", random_tensor({5}, rng));
  std::vector<nn::Parameter<double>*> params{&theta};
  const double lambda = 0.1;
  const auto res = nn::loss_ce_l2(nn::softmax_rows(logits), targets,
                                  std::span<nn::Parameter<double>* const>(params), lambda);
  auto objective = [&] {
    return nn::cross_entropy(nn::softmax_rows(logits), targets) +
           nn::l2_penalty(std::span<nn::Parameter<double>* const>(params), lambda);
  };
  std::vector<nn::GradProbe> probes;
  probes.push_back({"logits", logits.values(),
                    std::vector<double>(res.grad_logits.values().begin(), res.grad_logits.values().end())});
  probes.push_back({"theta", theta.value.values(),
                    std::vector<double>(theta.grad.values().begin(), theta.grad.values().end())});
  return nn::check_gradients("SoftmaxCrossEntropyL2", objective, probes, {});
}

nn::GradCheckReport composition_check() {
  models::ModelOptions o;
  o.n_classes = 4;
  o.patch_rows = 64;
  o.patch_width = 16;
  o.seed = 5;
  models::CnnMoe<double> model(o);
  freeze_dropout(model.trunk());

  Rng rng(13);
  const Tensor<double> x = random_tensor({2, 64, 16}, rng);
  const Tensor<double> y = random_targets(2, 4, rng);
  const double lambda = 1e-4;
  auto params = model.parameters();
  const std::span<nn::Parameter<double>* const> pspan(params);

  for (auto* p : params) p->zero_grad();
  // The first pass draws the dropout masks that later passes reuse.
  const auto out = model.forward(x, Mode::kTrain);
  const auto loss = nn::loss_ce_l2(out.probs, y, pspan, lambda);
  model.backward(loss.grad_logits);

  auto objective = [&] {
    const auto o2 = model.forward(x, Mode::kTrain);
    return nn::cross_entropy(o2.probs, y) + nn::l2_penalty(pspan, lambda);
  };
  std::vector<nn::GradProbe> probes;
  for (auto* p : params) {
    probes.push_back({p->name, p->value.values(),
                      std::vector<double>(p->grad.values().begin(), p->grad.values().end())});
  }
  GradCheckOptions opts;
  opts.max_entries_per_tensor = 3;
  opts.seed = 17;
  return nn::check_gradients("CNN-MoE 2x64x16", objective, probes, opts);
}

}  // namespace

std::vector<GradSuiteEntry> run_gradcheck_suite(bool include_composition) {
  std::vector<GradSuiteEntry> out;
  Rng rng(3);
  auto run = [&](std::string name, nn::Layer<double>& layer, const nn::Shape& shape, double tol,
                 Mode mode = Mode::kTrain) {
    GradCheckOptions opts;
    opts.mode = mode;
    // Central differences are exact for linear maps, so a larger step only
    // reduces cancellation error.
    if (tol == kLinearTol) opts.step = 1e-3;
    out.push_back({std::move(name), tol, nn::grad_check(layer, shape, opts)});
  };

  nn::Dense<double> dense(6, 4, rng);
  dense.set_name("dense");
  run("dense", dense, {3, 6}, kLinearTol);

  nn::Conv2d<double> conv33(3, 4, 3, 3, rng);
  conv33.set_name("conv3x3");
  run("conv2d 3x3", conv33, {2, 3, 8, 8}, kLinearTol);

  nn::Conv2d<double> conv41(3, 4, 4, 1, rng);
  conv41.set_name("conv4x1");
  run("conv2d 4x1", conv41, {2, 3, 8, 6}, kLinearTol);

  nn::BatchNorm2d<double> bn(3);
  bn.set_name("bn");
  {
    std::normal_distribution<double> normal(1.0, 0.3);
    for (auto& g : bn.gamma().value.values()) g = normal(rng);
    for (auto& b : bn.beta().value.values()) b = normal(rng);
  }
  run("batchnorm train", bn, {4, 3, 3, 5}, kNonlinearTol);
  run("batchnorm infer", bn, {4, 3, 3, 5}, kLinearTol, Mode::kInfer);

  nn::ReLU<double> relu;
  run("relu", relu, {3, 2, 4, 4}, kNonlinearTol);

  nn::AvgPool2d<double> ap22(2, 2), ap21(2, 1), ap41(4, 1);
  run("avgpool 2x2", ap22, {2, 3, 8, 8}, kLinearTol);
  run("avgpool 2x1", ap21, {2, 3, 8, 5}, kLinearTol);
  run("avgpool 4x1", ap41, {2, 3, 8, 5}, kLinearTol);

  nn::GlobalAvgPool<double> gap;
  run("global avgpool", gap, {2, 5, 4, 6}, kLinearTol);

  nn::Dropout<double> drop_off(0.25, 9);
  run("dropout (inference)", drop_off, {3, 10}, kLinearTol, Mode::kInfer);
  nn::Dropout<double> drop_on(0.25, 9);
  drop_on.freeze_mask(true);
  run("dropout (fixed mask)", drop_on, {3, 10}, kLinearTol);

  nn::Softmax<double> softmax;
  run("softmax", softmax, {3, 5}, kNonlinearTol);

  nn::ToSequence<double> to_seq;
  run("to-sequence", to_seq, {2, 4, 1, 6}, kLinearTol);
  nn::FeatureMean<double> fmean;
  run("feature mean", fmean, {2, 6, 4}, kLinearTol);

  nn::BiGru<double> gru(3, 4, rng);
  gru.set_name("bigru");
  run("bi-GRU", gru, {2, 5, 3}, kNonlinearTol);

  models::MoeLayer<double> moe(6, 3, 4, rng);
  moe.set_name("moe");
  run("MoE", moe, {3, 6}, kNonlinearTol);

  out.push_back({"softmax + cross-entropy + L2", kNonlinearTol, loss_check()});

  if (include_composition) out.push_back({"CNN-MoE composition", kCompositionTol, composition_check()});
  return out;
}

}  // namespace respdl
