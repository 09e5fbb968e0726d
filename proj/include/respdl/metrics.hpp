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

#include <map>
#include <span>
#include <string>
#include <vector>

namespace respdl {

// Class 0 is the baseline class (Normal for Task 1, Healthy for Task 2).
struct Metrics {
  double specificity = 0.0;  // correct among baseline-class entities
  double sensitivity = 0.0;  // exact-class correct among all other entities
  double icbhi_score = 0.0;  // (specificity + sensitivity) / 2
  // confusion[truth][prediction]
  std::vector<std::vector<long>> confusion;

  long total() const;
};

// A class with no entities contributes a zero rate rather than NaN.
Metrics compute_metrics(std::span<const int> truths, std::span<const int> predictions,
                        int n_classes);
// Keyed by entity id; the key sets must match.
Metrics compute_metrics(const std::map<std::string, int>& truths,
                        const std::map<std::string, int>& predictions, int n_classes);
// Rates from an existing confusion matrix.
Metrics metrics_from_confusion(std::vector<std::vector<long>> confusion);

// Unweighted mean of specificity and sensitivity over folds; confusion
// matrices are summed.
Metrics mean_metrics(std::span<const Metrics> folds);

}  // namespace respdl
