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

#include <string>
#include <vector>

#include "respdl/nn/gradcheck.hpp"

namespace respdl {

struct GradSuiteEntry {
  std::string name;
  double tolerance = 0.0;
  nn::GradCheckReport report;

  bool passed() const { return report.passed(tolerance); }
};

// Finite-difference checks at 64-bit for every layer type in both models,
// the softmax + cross-entropy + L2 loss, the MoE layer, and (optionally)
// the full CNN-MoE on a 2 x 64 x 16 input. Linear layers are held to 1e-8,
// nonlinear ones to 1e-4, the composition to 1e-3.
std::vector<GradSuiteEntry> run_gradcheck_suite(bool include_composition = true);

}  // namespace respdl
