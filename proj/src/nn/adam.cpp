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

#include "respdl/nn/adam.hpp"

#include <cmath>

#include "respdl/errors.hpp"

namespace respdl::nn {

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamMoments<T>& state,
               std::int64_t t, const AdamConfig& cfg) {
  if (t < 1) throw ParameterError("adam step index must be >= 1");
  if (params.size() != grads.size()) throw ShapeError("adam: params/grads size mismatch");
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), T{0});
    state.v.assign(params.size(), T{0});
  }
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    params[i] = static_cast<T>(params[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg), state_(params_.size()) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    state_[i].m.assign(params_[i]->value.size(), T{0});
    state_[i].v.assign(params_[i]->value.size(), T{0});
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step<T>(params_[i]->value.values(), params_[i]->grad.values(), state_[i], t_, cfg_);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template void adam_step(std::span<float>, std::span<const float>, AdamMoments<float>&,
                        std::int64_t, const AdamConfig&);
template void adam_step(std::span<double>, std::span<const double>, AdamMoments<double>&,
                        std::int64_t, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace respdl::nn
