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

#include "respdl/nn/loss.hpp"

#include <cmath>
#include <sstream>

#include "respdl/errors.hpp"

namespace respdl::nn {

template <typename T>
double cross_entropy(const Tensor<T>& probs, const Tensor<T>& targets) {
  if (probs.shape() != targets.shape() || probs.rank() != 2) {
    throw ShapeError("cross_entropy: shape mismatch " + shape_string(probs.shape()) + " vs " +
                     shape_string(targets.shape()));
  }
  const std::size_t b = probs.dim(0);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (targets[i] != T{0}) acc -= targets[i] * std::log(static_cast<double>(probs[i]) + kLogEps);
  }
  return acc / static_cast<double>(b);
}

template <typename T>
double l2_penalty(std::span<Parameter<T>* const> params, double lambda) {
  double ss = 0.0;
  for (const auto* p : params) {
    if (!p->decay) continue;
    for (T v : p->value.values()) ss += static_cast<double>(v) * v;
  }
  return 0.5 * lambda * ss;
}

template <typename T>
LossResult<T> loss_ce_l2(const Tensor<T>& probs, const Tensor<T>& targets,
                         std::span<Parameter<T>* const> params, double lambda,
                         bool accumulate_l2_grad) {
  if (!probs.all_finite()) {
    std::ostringstream msg;
    msg << "non-finite prediction in loss (batch " << probs.dim(0) << ")";
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!std::isfinite(probs[i])) {
        msg << "; first at row " << i / probs.dim(1) << ", class " << i % probs.dim(1);
        break;
      }
    }
    throw NumericalError(msg.str());
  }
  LossResult<T> out;
  out.ce = cross_entropy(probs, targets);
  out.l2 = l2_penalty(params, lambda);
  out.total = out.ce + out.l2;
  out.grad_logits = Tensor<T>(probs.shape());
  const double inv_b = 1.0 / static_cast<double>(probs.dim(0));
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out.grad_logits[i] = static_cast<T>((static_cast<double>(probs[i]) - targets[i]) * inv_b);
  }
  if (accumulate_l2_grad && lambda != 0.0) {
    for (auto* p : params) {
      if (!p->decay) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        p->grad[i] += static_cast<T>(lambda * p->value[i]);
      }
    }
  }
  return out;
}

#define RESPDL_INSTANTIATE(T)                                                            \
  template double cross_entropy(const Tensor<T>&, const Tensor<T>&);                     \
  template double l2_penalty(std::span<Parameter<T>* const>, double);                    \
  template LossResult<T> loss_ce_l2(const Tensor<T>&, const Tensor<T>&,                  \
                                    std::span<Parameter<T>* const>, double, bool);

RESPDL_INSTANTIATE(float)
RESPDL_INSTANTIATE(double)

#undef RESPDL_INSTANTIATE

}  // namespace respdl::nn
