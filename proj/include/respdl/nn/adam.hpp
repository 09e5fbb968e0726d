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
#include <span>
#include <vector>

#include "respdl/nn/layers.hpp"

namespace respdl::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates for one flat parameter block.
template <typename T>
struct AdamMoments {
  std::vector<T> m;
  std::vector<T> v;
};

// One bias-corrected Adam update at step t >= 1.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamMoments<T>& state,
               std::int64_t t, const AdamConfig& cfg);

template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg);

  // Applies the accumulated gradients, then leaves them untouched.
  void step();
  void zero_grad();

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  std::vector<AdamMoments<T>>& moments() { return state_; }
  const std::vector<AdamMoments<T>>& moments() const { return state_; }
  void set_steps(std::int64_t t) { t_ = t; }
  const std::vector<Parameter<T>*>& params() const { return params_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<AdamMoments<T>> state_;
  std::int64_t t_ = 0;
};

}  // namespace respdl::nn
