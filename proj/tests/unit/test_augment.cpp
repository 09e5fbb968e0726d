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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>

#include "respdl/augment.hpp"
#include "respdl/errors.hpp"

using namespace respdl;
using respdl::nn::Tensor;

TEST_CASE("duplicate_to_min repeats whole cycles") {
  RespiratoryCycle c;
  c.samples.assign(static_cast<std::size_t>(2.5 * 16000), 0.25);
  c.class4 = Class4::kWheeze;
  const auto out = duplicate_to_min(c, 6.0);
  CHECK(out.samples.size() == 3 * c.samples.size());
  CHECK(static_cast<double>(out.samples.size()) / 16000 == 7.5);
  CHECK(out.class4 == Class4::kWheeze);

  c.samples.assign(8 * 16000, 0.25);
  CHECK(duplicate_to_min(c, 6.0).samples == c.samples);
  CHECK(repetitions_needed(10, 10) == 1);
  CHECK(repetitions_needed(10, 11) == 2);
  CHECK(repetitions_needed(10, 0) == 1);
}

TEST_CASE("duplicate_to_min meets the minimum and is idempotent") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) {
    const std::size_t len = 1 + rng() % 5000;
    const std::size_t min = 1 + rng() % 20000;
    std::vector<double> x(len);
    for (auto& v : x) v = static_cast<double>(rng() % 1000);
    const auto y = duplicate_to_min(x, min);
    REQUIRE(y.size() >= min);
    REQUIRE(y.size() % len == 0);
    REQUIRE(y.size() < min + len);
    for (std::size_t j = 0; j < y.size(); ++j) REQUIRE(y[j] == x[j % len]);
    REQUIRE(duplicate_to_min(y, min) == y);
  }
}

TEST_CASE("a repeated sine has its autocorrelation peak at the cycle length") {
  const std::size_t len = 997;
  std::vector<double> x(len);
  for (std::size_t i = 0; i < len; ++i) {
    x[i] = std::sin(2.0 * std::numbers::pi * 3.3 * i / len) + 0.3 * std::sin(0.05 * i * i / len);
  }
  const auto y = duplicate_to_min(x, 3 * len);
  auto ac = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < y.size(); ++i) s += y[i] * y[i + lag];
    return s / static_cast<double>(y.size() - lag);
  };
  std::size_t best = 0;
  double best_v = -1e300;
  for (std::size_t lag = len / 2; lag <= len + len / 2; ++lag) {
    const double v = ac(lag);
    if (v > best_v) {
      best_v = v;
      best = lag;
    }
  }
  CHECK(best == len);
}

namespace {

LabeledBatch<double> random_batch(std::size_t b, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  LabeledBatch<double> out;
  out.patches = Tensor<double>({b, 3, 5});
  for (auto& v : out.patches.values()) v = g(rng);
  std::vector<int> labels;
  for (std::size_t i = 0; i < b; ++i) labels.push_back(static_cast<int>(rng() % n));
  out.targets = one_hot<double>(labels, n);
  return out;
}

}  // namespace

TEST_CASE("mixup endpoints return the originals") {
  const auto a = random_batch(6, 4, 1);
  const auto b = random_batch(6, 4, 2);
  const std::vector<double> ones(6, 1.0), zeros(6, 0.0);
  const auto m1 = mixup_with_lambdas(a, b, ones);
  CHECK(m1.patches == a.patches);
  CHECK(m1.targets == a.targets);
  const auto m0 = mixup_with_lambdas(a, b, zeros);
  CHECK(m0.patches == b.patches);
  CHECK(m0.targets == b.targets);
}

TEST_CASE("mixup keeps targets on the simplex and patches between endpoints") {
  const auto a = random_batch(16, 3, 3);
  const auto b = random_batch(16, 3, 4);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = mixup(a, b, MixupConfig{0.2, true}, rng);
    for (std::size_t i = 0; i < 16; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double t = m.targets[i * 3 + c];
        REQUIRE(t >= 0.0);
        s += t;
      }
      REQUIRE(std::abs(s - 1.0) <= 1e-6);
    }
    for (std::size_t k = 0; k < a.patches.size(); ++k) {
      const double lo = std::min(a.patches[k], b.patches[k]);
      const double hi = std::max(a.patches[k], b.patches[k]);
      REQUIRE(m.patches[k] >= lo - 1e-15);
      REQUIRE(m.patches[k] <= hi + 1e-15);
    }
  }
}

TEST_CASE("disabled mixup leaves one-hot targets") {
  const auto a = random_batch(8, 4, 6);
  std::mt19937_64 rng(1);
  const auto m = mixup_in_batch(a, MixupConfig{0.2, false}, rng);
  CHECK(m.patches == a.patches);
  CHECK(m.targets == a.targets);
  for (double t : m.targets.values()) CHECK((t == 0.0 || t == 1.0));
}

TEST_CASE("in-batch mixup pairs rows of the same batch") {
  const auto a = random_batch(10, 4, 7);
  std::mt19937_64 rng(2);
  const auto m = mixup_in_batch(a, MixupConfig{0.2, true}, rng);
  CHECK(m.patches.shape() == a.patches.shape());
  // Every mixed target is a convex combination of two of the batch's labels.
  for (std::size_t i = 0; i < 10; ++i) {
    int nonzero = 0;
    for (std::size_t c = 0; c < 4; ++c) nonzero += m.targets[i * 4 + c] > 0.0 ? 1 : 0;
    CHECK(nonzero >= 1);
    CHECK(nonzero <= 2);
  }
}

TEST_CASE("mixup rejects mismatched batches") {
  const auto a = random_batch(6, 4, 1);
  const auto b = random_batch(5, 4, 2);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(mixup(a, b, MixupConfig{}, rng), ParameterError);
  CHECK_THROWS_AS(mixup_with_lambdas(a, a, std::vector<double>(3, 0.5)), ParameterError);
}

TEST_CASE("beta samples") {
  std::mt19937_64 rng(11);
  double sum = 0.0;
  const int n = 20000;
  int extreme = 0;
  for (int i = 0; i < n; ++i) {
    const double l = sample_beta(0.2, 0.2, rng);
    REQUIRE(l >= 0.0);
    REQUIRE(l <= 1.0);
    sum += l;
    if (l < 0.1 || l > 0.9) ++extreme;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.02);
  // Beta(0.2, 0.2) puts most of its mass near the endpoints.
  CHECK(extreme > n / 2);
}

TEST_CASE("gather_rows and one_hot") {
  const auto a = random_batch(4, 3, 9);
  const std::vector<std::size_t> order = {3, 0, 2, 1};
  const auto g = gather_rows(a, order);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t k = 0; k < 15; ++k) CHECK(g.patches[i * 15 + k] == a.patches[order[i] * 15 + k]);
  }
  const auto oh = one_hot<float>(std::vector<int>{2, 0}, 3);
  CHECK(oh.values()[2] == 1.0f);
  CHECK(oh.values()[3] == 1.0f);
  CHECK(oh.values()[0] == 0.0f);
}
