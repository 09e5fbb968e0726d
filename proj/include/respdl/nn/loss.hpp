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

#include <span>

#include "respdl/nn/layers.hpp"

namespace respdl::nn {

inline constexpr double kLogEps = 1e-12;

template <typename T>
struct LossResult {
  double total = 0.0;  // ce + l2
  double ce = 0.0;
  double l2 = 0.0;
  // d(total)/d(logits) for the softmax that produced `probs`.
  Tensor<T> grad_logits;
};

// Mean cross-entropy over the batch, -1/B sum_i sum_c y[i,c] log(p[i,c] + 1e-12).
template <typename T>
double cross_entropy(const Tensor<T>& probs, const Tensor<T>& targets);

// (lambda / 2) * sum of squares over parameters with decay == true.
template <typename T>
double l2_penalty(std::span<Parameter<T>* const> params, double lambda);

// Cross-entropy plus L2. Probabilities are the softmax of the model logits;
// grad_logits is the fused softmax + CE gradient (p - y) / B. When
// accumulate_l2_grad is set, lambda * theta is added to each decayed
// parameter's grad. NaN/Inf in probs raises NumericalError.
template <typename T>
LossResult<T> loss_ce_l2(const Tensor<T>& probs, const Tensor<T>& targets,
                         std::span<Parameter<T>* const> params, double lambda,
                         bool accumulate_l2_grad = true);

}  // namespace respdl::nn
