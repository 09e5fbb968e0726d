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

#include "respdl/metrics.hpp"

#include "respdl/errors.hpp"

namespace respdl {

long Metrics::total() const {
  long n = 0;
  for (const auto& row : confusion) {
    for (long v : row) n += v;
  }
  return n;
}

Metrics metrics_from_confusion(std::vector<std::vector<long>> confusion) {
  const std::size_t n = confusion.size();
  if (n < 2) throw ParameterError("metrics need at least 2 classes");
  long base_total = 0, base_correct = 0, other_total = 0, other_correct = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (confusion[t].size() != n) throw ParameterError("confusion matrix must be square");
    long row = 0;
    for (long v : confusion[t]) row += v;
    if (t == 0) {
      base_total += row;
      base_correct += confusion[t][t];
    } else {
      other_total += row;
      other_correct += confusion[t][t];
    }
  }
  Metrics m;
  m.specificity = base_total > 0 ? static_cast<double>(base_correct) / base_total : 0.0;
  m.sensitivity = other_total > 0 ? static_cast<double>(other_correct) / other_total : 0.0;
  m.icbhi_score = (m.specificity + m.sensitivity) / 2.0;
  m.confusion = std::move(confusion);
  return m;
}

Metrics compute_metrics(std::span<const int> truths, std::span<const int> predictions,
                        int n_classes) {
  if (truths.size() != predictions.size()) {
    throw ParameterError("metrics: " + std::to_string(truths.size()) + " truths vs " +
                         std::to_string(predictions.size()) + " predictions");
  }
  if (n_classes < 2) throw ParameterError("metrics need at least 2 classes");
  std::vector<std::vector<long>> confusion(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i], p = predictions[i];
    if (t < 0 || t >= n_classes || p < 0 || p >= n_classes) {
      throw ParameterError("metrics: class index out of range");
    }
    ++confusion[t][p];
  }
  return metrics_from_confusion(std::move(confusion));
}

Metrics compute_metrics(const std::map<std::string, int>& truths,
                        const std::map<std::string, int>& predictions, int n_classes) {
  if (truths.size() != predictions.size()) {
    throw ParameterError("metrics: entity sets differ in size");
  }
  std::vector<int> t, p;
  t.reserve(truths.size());
  p.reserve(truths.size());
  for (const auto& [id, cls] : truths) {
    auto it = predictions.find(id);
    if (it == predictions.end()) throw ParameterError("metrics: no prediction for entity " + id);
    t.push_back(cls);
    p.push_back(it->second);
  }
  return compute_metrics(t, p, n_classes);
}

Metrics mean_metrics(std::span<const Metrics> folds) {
  if (folds.empty()) throw ParameterError("mean of zero folds");
  Metrics m;
  const std::size_t n = folds.front().confusion.size();
  m.confusion.assign(n, std::vector<long>(n, 0));
  for (const auto& f : folds) {
    m.specificity += f.specificity;
    m.sensitivity += f.sensitivity;
    for (std::size_t i = 0; i < n && i < f.confusion.size(); ++i) {
      for (std::size_t j = 0; j < n && j < f.confusion[i].size(); ++j) {
        m.confusion[i][j] += f.confusion[i][j];
      }
    }
  }
  const auto k = static_cast<double>(folds.size());
  m.specificity /= k;
  m.sensitivity /= k;
  // Keeps the row identity score == (spec + sen) / 2 exact; this equals the
  // mean of fold scores up to rounding in the last bit.
  m.icbhi_score = (m.specificity + m.sensitivity) / 2.0;
  return m;
}

}  // namespace respdl
