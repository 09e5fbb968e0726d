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

#include "respdl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "respdl/errors.hpp"

namespace respdl {

std::size_t repetitions_needed(std::size_t length, std::size_t min_samples) {
  if (length == 0) throw ParameterError("cannot duplicate an empty cycle");
  if (length >= min_samples) return 1;
  return (min_samples + length - 1) / length;
}

std::vector<double> duplicate_to_min(std::span<const double> samples, std::size_t min_samples) {
  const std::size_t r = repetitions_needed(samples.size(), min_samples);
  std::vector<double> out;
  out.reserve(samples.size() * r);
  for (std::size_t i = 0; i < r; ++i) out.insert(out.end(), samples.begin(), samples.end());
  return out;
}

RespiratoryCycle duplicate_to_min(const RespiratoryCycle& cycle, double min_seconds,
                                  int sample_rate) {
  if (!(min_seconds > 0.0)) throw ParameterError("min_seconds must be positive");
  const auto min_samples = static_cast<std::size_t>(std::llround(min_seconds * sample_rate));
  RespiratoryCycle out = cycle;
  out.samples = duplicate_to_min(cycle.samples, min_samples);
  return out;
}

template <typename T>
nn::Tensor<T> one_hot(std::span<const int> labels, std::size_t n_classes) {
  nn::Tensor<T> t({labels.size(), n_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes) {
      throw ParameterError("label out of range");
    }
    t[i * n_classes + static_cast<std::size_t>(labels[i])] = T{1};
  }
  return t;
}

double sample_beta(double alpha, double beta, std::mt19937_64& rng) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ParameterError("beta parameters must be positive");
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  if (x + y == 0.0) return 0.5;
  return x / (x + y);
}

template <typename T>
LabeledBatch<T> mixup_with_lambdas(const LabeledBatch<T>& a, const LabeledBatch<T>& b,
                                   std::span<const double> lambdas) {
  if (a.patches.shape() != b.patches.shape() || a.targets.shape() != b.targets.shape()) {
    throw ParameterError("mixup: batch shapes differ");
  }
  const std::size_t rows = a.patches.dim(0);
  if (a.targets.dim(0) != rows || lambdas.size() != rows) {
    throw ParameterError("mixup: row count mismatch");
  }
  LabeledBatch<T> out{nn::Tensor<T>(a.patches.shape()), nn::Tensor<T>(a.targets.shape())};
  const std::size_t pw = a.patches.size() / rows;
  const std::size_t tw = a.targets.size() / rows;
  for (std::size_t i = 0; i < rows; ++i) {
    const double l = lambdas[i];
    // Endpoints copy exactly.
    const LabeledBatch<T>* only = l == 1.0 ? &a : (l == 0.0 ? &b : nullptr);
    for (std::size_t j = 0; j < pw; ++j) {
      const std::size_t k = i * pw + j;
      out.patches[k] = only ? only->patches[k]
                            : static_cast<T>(l * a.patches[k] + (1.0 - l) * b.patches[k]);
    }
    for (std::size_t j = 0; j < tw; ++j) {
      const std::size_t k = i * tw + j;
      out.targets[k] = only ? only->targets[k]
                            : static_cast<T>(l * a.targets[k] + (1.0 - l) * b.targets[k]);
    }
  }
  return out;
}

template <typename T>
LabeledBatch<T> mixup(const LabeledBatch<T>& a, const LabeledBatch<T>& b, const MixupConfig& cfg,
                      std::mt19937_64& rng) {
  if (a.patches.shape() != b.patches.shape() || a.targets.shape() != b.targets.shape()) {
    throw ParameterError("mixup: batch shapes differ");
  }
  if (!cfg.enabled) return a;
  if (!(cfg.alpha > 0.0)) throw ParameterError("mixup alpha must be positive");
  std::vector<double> lambdas(a.patches.dim(0));
  for (auto& l : lambdas) l = sample_beta(cfg.alpha, cfg.alpha, rng);
  return mixup_with_lambdas(a, b, lambdas);
}

template <typename T>
LabeledBatch<T> gather_rows(const LabeledBatch<T>& batch, std::span<const std::size_t> order) {
  const std::size_t rows = batch.patches.dim(0);
  const std::size_t pw = batch.patches.size() / rows;
  const std::size_t tw = batch.targets.size() / rows;
  auto pshape = batch.patches.shape();
  auto tshape = batch.targets.shape();
  pshape[0] = order.size();
  tshape[0] = order.size();
  LabeledBatch<T> out{nn::Tensor<T>(pshape), nn::Tensor<T>(tshape)};
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(batch.patches.data() + order[i] * pw, pw, out.patches.data() + i * pw);
    std::copy_n(batch.targets.data() + order[i] * tw, tw, out.targets.data() + i * tw);
  }
  return out;
}

template <typename T>
LabeledBatch<T> mixup_in_batch(const LabeledBatch<T>& batch, const MixupConfig& cfg,
                               std::mt19937_64& rng) {
  if (!cfg.enabled) return batch;
  std::vector<std::size_t> perm(batch.patches.dim(0));
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng() % i]);
  return mixup(batch, gather_rows(batch, perm), cfg, rng);
}

#define RESPDL_INSTANTIATE(T)                                                                  \
  template nn::Tensor<T> one_hot<T>(std::span<const int>, std::size_t);                        \
  template LabeledBatch<T> mixup_with_lambdas(const LabeledBatch<T>&, const LabeledBatch<T>&,  \
                                              std::span<const double>);                        \
  template LabeledBatch<T> mixup(const LabeledBatch<T>&, const LabeledBatch<T>&,               \
                                 const MixupConfig&, std::mt19937_64&);                        \
  template LabeledBatch<T> mixup_in_batch(const LabeledBatch<T>&, const MixupConfig&,          \
                                          std::mt19937_64&);                                   \
  template LabeledBatch<T> gather_rows(const LabeledBatch<T>&, std::span<const std::size_t>);

RESPDL_INSTANTIATE(float)
RESPDL_INSTANTIATE(double)

#undef RESPDL_INSTANTIATE

}  // namespace respdl
