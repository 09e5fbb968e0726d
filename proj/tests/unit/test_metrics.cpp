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
#include <map>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "respdl/errors.hpp"
#include "respdl/metrics.hpp"

using namespace respdl;

TEST_CASE("hand-counted four-class fixture") {
  // truth:      N N N N C C W W B B
  // prediction: N N C N C W W W N B
  const std::vector<int> truth = {0, 0, 0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> pred = {0, 0, 1, 0, 1, 2, 2, 2, 0, 3};
  const auto m = compute_metrics(truth, pred, 4);
  // Normal: 3 of 4 correct. Others: C ok, C->W wrong, W ok, W ok, B->N wrong, B ok: 4 of 6.
  CHECK(m.specificity == 3.0 / 4.0);
  CHECK(m.sensitivity == 4.0 / 6.0);
  CHECK(m.icbhi_score == (m.specificity + m.sensitivity) / 2);
  const std::vector<std::vector<long>> want = {{3, 1, 0, 0}, {0, 1, 1, 0}, {0, 0, 2, 0}, {1, 0, 0, 1}};
  CHECK(m.confusion == want);
  CHECK(m.total() == 10);
}

TEST_CASE("metrics match a brute-force tally on random labelings") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 3);
    const std::size_t count = 1 + rng() % 60;
    std::vector<int> t(count), p(count);
    for (std::size_t i = 0; i < count; ++i) {
      t[i] = static_cast<int>(rng() % static_cast<unsigned>(n));
      p[i] = static_cast<int>(rng() % static_cast<unsigned>(n));
    }
    long base = 0, base_ok = 0, other = 0, other_ok = 0;
    for (std::size_t i = 0; i < count; ++i) {
      if (t[i] == 0) {
        ++base;
        base_ok += p[i] == 0;
      } else {
        ++other;
        other_ok += p[i] == t[i];
      }
    }
    const auto m = compute_metrics(t, p, n);
    const double spec = base ? static_cast<double>(base_ok) / base : 0.0;
    const double sen = other ? static_cast<double>(other_ok) / other : 0.0;
    REQUIRE(m.specificity == spec);
    REQUIRE(m.sensitivity == sen);
    REQUIRE(m.icbhi_score == (spec + sen) / 2);
  }
}

TEST_CASE("the 6 s cycle-length row: spec 0.90, sen 0.70") {
  // 10 normal (9 right), 10 abnormal (7 right).
  std::vector<int> truth(20), pred(20);
  for (int i = 0; i < 10; ++i) {
    truth[static_cast<std::size_t>(i)] = 0;
    pred[static_cast<std::size_t>(i)] = i < 9 ? 0 : 1;
    truth[10 + static_cast<std::size_t>(i)] = 1 + i % 3;
    pred[10 + static_cast<std::size_t>(i)] = i < 7 ? 1 + i % 3 : 0;
  }
  const auto m = compute_metrics(truth, pred, 4);
  CHECK(m.specificity == 0.9);
  CHECK(m.sensitivity == 0.7);
  CHECK(m.icbhi_score == doctest::Approx(0.80).epsilon(1e-15));
  CHECK(m.icbhi_score == (m.specificity + m.sensitivity) / 2);
}

TEST_CASE("all correct and empty classes") {
  const std::vector<int> t = {0, 1, 2, 1};
  const auto m = compute_metrics(t, t, 3);
  CHECK(m.specificity == 1.0);
  CHECK(m.sensitivity == 1.0);
  CHECK(m.icbhi_score == 1.0);
  const std::vector<int> only_normal = {0, 0};
  const auto z = compute_metrics(only_normal, only_normal, 2);
  CHECK(z.sensitivity == 0.0);
  CHECK(z.icbhi_score == 0.5);
  CHECK_THROWS_AS(compute_metrics(t, std::vector<int>{0, 1}, 3), ParameterError);
  CHECK_THROWS_AS(compute_metrics(std::vector<int>{5}, std::vector<int>{0}, 3), ParameterError);
}

TEST_CASE("entity-keyed metrics are invariant to relabeling ids") {
  std::map<std::string, int> truth, pred;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 30; ++i) {
    truth["e" + std::to_string(i)] = static_cast<int>(rng() % 4);
    pred["e" + std::to_string(i)] = static_cast<int>(rng() % 4);
  }
  const auto m = compute_metrics(truth, pred, 4);
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::map<std::string, int> t2, p2;
  for (int i = 0; i < 30; ++i) {
    const auto id = "x" + std::to_string(perm[static_cast<std::size_t>(i)]);
    t2[id] = truth["e" + std::to_string(i)];
    p2[id] = pred["e" + std::to_string(i)];
  }
  const auto m2 = compute_metrics(t2, p2, 4);
  CHECK(m.specificity == m2.specificity);
  CHECK(m.sensitivity == m2.sensitivity);
  CHECK(m.confusion == m2.confusion);
  pred.erase("e3");
  pred["zz"] = 1;
  CHECK_THROWS_AS(compute_metrics(truth, pred, 4), ParameterError);
}

TEST_CASE("fold means") {
  auto with = [](double spec, double sen) {
    auto m = metrics_from_confusion({{0, 0}, {0, 0}});
    m.specificity = spec;
    m.sensitivity = sen;
    m.icbhi_score = (spec + sen) / 2;
    return m;
  };
  const std::vector<Metrics> folds = {with(0.9, 0.7), with(1.0, 0.8)};
  const auto mean = mean_metrics(folds);
  CHECK(mean.specificity == doctest::Approx(0.95));
  CHECK(mean.sensitivity == doctest::Approx(0.75));
  CHECK(mean.icbhi_score == (mean.specificity + mean.sensitivity) / 2);
  CHECK(mean.icbhi_score == doctest::Approx(0.85));
  const std::vector<Metrics> same = {with(0.6, 0.4), with(0.6, 0.4), with(0.6, 0.4)};
  CHECK(mean_metrics(same).icbhi_score == with(0.6, 0.4).icbhi_score);

  const auto m = metrics_from_confusion({{4, 1}, {2, 3}});
  CHECK(m.specificity == 0.8);
  CHECK(m.sensitivity == 0.6);
}
