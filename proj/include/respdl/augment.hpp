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

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "respdl/ingest.hpp"
#include "respdl/nn/tensor.hpp"

namespace respdl {

// Whole-cycle repetition count r = ceil(min_samples / len), at least 1.
std::size_t repetitions_needed(std::size_t length, std::size_t min_samples);

// Repeats the waveform r times without truncation so the result holds at
// least min_samples samples. Inputs already long enough come back unchanged.
std::vector<double> duplicate_to_min(std::span<const double> samples, std::size_t min_samples);
RespiratoryCycle duplicate_to_min(const RespiratoryCycle& cycle, double min_seconds,
                                  int sample_rate = kTargetRate);

struct MixupConfig {
  double alpha = 0.2;
  bool enabled = true;
};

// patches: B x ... ; targets: B x N with rows on the probability simplex.
template <typename T>
struct LabeledBatch {
  nn::Tensor<T> patches;
  nn::Tensor<T> targets;
};

template <typename T>
nn::Tensor<T> one_hot(std::span<const int> labels, std::size_t n_classes);

// X ~ Gamma(alpha), Y ~ Gamma(beta), X / (X + Y).
double sample_beta(double alpha, double beta, std::mt19937_64& rng);

// Row i: lambda_i * a_i + (1 - lambda_i) * b_i for patches and targets.
template <typename T>
LabeledBatch<T> mixup_with_lambdas(const LabeledBatch<T>& a, const LabeledBatch<T>& b,
                                   std::span<const double> lambdas);

// Draws one lambda ~ Beta(alpha, alpha) per row. Disabled config returns a.
template <typename T>
LabeledBatch<T> mixup(const LabeledBatch<T>& a, const LabeledBatch<T>& b,
                      const MixupConfig& cfg, std::mt19937_64& rng);

// Pairs each row with a random permutation of the same batch.
template <typename T>
LabeledBatch<T> mixup_in_batch(const LabeledBatch<T>& batch, const MixupConfig& cfg,
                               std::mt19937_64& rng);

// Rows reordered by `order`.
template <typename T>
LabeledBatch<T> gather_rows(const LabeledBatch<T>& batch, std::span<const std::size_t> order);

}  // namespace respdl
