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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "respdl/nn/layers.hpp"

namespace respdl::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every entry; otherwise a seeded random subset per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 1;
  Mode mode = Mode::kTrain;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::string subject;
  std::vector<TensorCheck> tensors;

  double max_rel_error() const;
  bool passed(double tolerance) const { return max_rel_error() < tolerance; }
  std::string summary() const;
};

// Relative error |a - n| / max(|a|, |n|, floor). check_gradients sets the
// floor to the larger of 1% of the tensor's largest analytic magnitude and
// 1e-4 of the largest over all probed tensors, so near-zero entries (and
// tensors whose gradient is structurally zero) are judged against a
// meaningful gradient scale instead of rounding noise.
double relative_error(double analytic, double numeric, double floor);

struct GradProbe {
  std::string name;
  std::span<double> values;       // perturbed in place, restored afterwards
  std::vector<double> analytic;   // same length as values
};

// Central differences (f(x+h) - f(x-h)) / 2h on each probed entry.
GradCheckReport check_gradients(const std::string& subject,
                                const std::function<double()>& objective,
                                std::vector<GradProbe>& probes, const GradCheckOptions& opts);

// Checks a single layer: random Gaussian input, objective sum(r * layer(x))
// for a fixed random projection r, analytic gradients from backward(r).
GradCheckReport grad_check(Layer<double>& layer, const Shape& input_shape,
                           const GradCheckOptions& opts = {});

}  // namespace respdl::nn
