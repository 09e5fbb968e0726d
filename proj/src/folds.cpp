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
#include <sstream>

#include "respdl/errors.hpp"
#include "respdl/ingest.hpp"
#include "util.hpp"

namespace respdl {
namespace {

template <typename T>
void fisher_yates(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(v[i - 1], v[j]);
  }
}

void check_partition(const FoldAssignment& f, std::span<const Entity> entities) {
  std::vector<std::map<int, int>> per_fold(static_cast<std::size_t>(f.k));
  std::map<int, int> labels;
  for (const auto& e : entities) {
    ++per_fold[static_cast<std::size_t>(f.fold_of.at(e.id))][e.label];
    labels[e.label] = 1;
  }
  for (int fold = 0; fold < f.k; ++fold) {
    for (const auto& [label, _] : labels) {
      if (per_fold[static_cast<std::size_t>(fold)][label] == 0) {
        throw StratificationError("fold " + std::to_string(fold) + " has no entity of class " +
                                  std::to_string(label));
      }
    }
  }
}

FoldAssignment stratified(std::span<const Entity> entities, int k, std::uint64_t seed) {
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& e : entities) by_class[e.label].push_back(e.id);
  for (auto& [label, ids] : by_class) {
    if (static_cast<int>(ids.size()) < k) {
      throw StratificationError("class " + std::to_string(label) + " has " +
                                std::to_string(ids.size()) + " entities, fewer than k=" +
                                std::to_string(k));
    }
    std::sort(ids.begin(), ids.end());
  }
  std::mt19937_64 rng(seed);
  FoldAssignment out;
  out.k = k;
  // Dealing continues across classes so total fold sizes stay within +-1.
  std::size_t offset = 0;
  for (auto& [label, ids] : by_class) {
    fisher_yates(ids, rng);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      out.fold_of[ids[i]] = static_cast<int>((offset + i) % static_cast<std::size_t>(k));
    }
    offset = (offset + ids.size()) % static_cast<std::size_t>(k);
  }
  return out;
}

FoldAssignment by_patient(std::span<const Entity> entities, int k, std::uint64_t seed) {
  std::map<std::string, std::map<int, int>> patient_counts;
  std::map<int, int> class_totals;
  for (const auto& e : entities) {
    ++patient_counts[e.patient_id][e.label];
    ++class_totals[e.label];
  }
  std::vector<std::string> patients;
  for (const auto& [p, _] : patient_counts) patients.push_back(p);
  std::mt19937_64 rng(seed);
  fisher_yates(patients, rng);
  auto size_of = [&](const std::string& p) {
    int n = 0;
    for (const auto& [_, c] : patient_counts.at(p)) n += c;
    return n;
  };
  std::stable_sort(patients.begin(), patients.end(),
                   [&](const auto& a, const auto& b) { return size_of(a) > size_of(b); });

  std::vector<std::map<int, double>> load(static_cast<std::size_t>(k));
  std::map<std::string, int> fold_of_patient;
  for (const auto& p : patients) {
    int best = 0;
    double best_cost = 0.0;
    for (int f = 0; f < k; ++f) {
      double cost = 0.0;
      for (const auto& [label, c] : patient_counts.at(p)) {
        const double target = static_cast<double>(class_totals[label]) / k;
        cost += c * (load[static_cast<std::size_t>(f)][label] + c) / target;
      }
      if (f == 0 || cost < best_cost) {
        best = f;
        best_cost = cost;
      }
    }
    fold_of_patient[p] = best;
    for (const auto& [label, c] : patient_counts.at(p)) {
      load[static_cast<std::size_t>(best)][label] += c;
    }
  }
  FoldAssignment out;
  out.k = k;
  for (const auto& e : entities) out.fold_of[e.id] = fold_of_patient.at(e.patient_id);
  return out;
}

}  // namespace

std::vector<std::string> FoldAssignment::fold_members(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of) {
    if (f == fold) out.push_back(id);
  }
  return out;
}

FoldAssignment make_folds(std::span<const Entity> entities, int k, std::uint64_t seed,
                          const FoldOptions& opts) {
  if (k < 2) throw ParameterError("k must be >= 2");
  FoldAssignment out = opts.patient_independent ? by_patient(entities, k, seed)
                                                : stratified(entities, k, seed);
  check_partition(out, entities);
  return out;
}

FoldAssignment make_folds(const DatasetManifest& m, int k, std::uint64_t seed,
                          const FoldOptions& opts) {
  const auto entities = enumerate_entities(m);
  return make_folds(entities, k, seed, opts);
}

std::string serialize_folds(const FoldAssignment& f) {
  std::ostringstream out;
  out << "entity_id,fold_index\n";
  for (const auto& [id, fold] : f.fold_of) out << id << ',' << fold << '\n';
  return out.str();
}

FoldAssignment parse_folds(std::string_view csv) {
  FoldAssignment f;
  int max_fold = -1;
  int line_no = 0;
  for (auto line : detail::lines(csv)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line == "entity_id,fold_index") continue;
    const auto comma = line.rfind(',');
    if (comma == std::string_view::npos) throw ParseError("expected entity_id,fold_index", line_no);
    const auto fold = detail::parse_int(line.substr(comma + 1));
    if (!fold || *fold < 0) throw ParseError("bad fold index", line_no);
    f.fold_of[std::string(line.substr(0, comma))] = static_cast<int>(*fold);
    max_fold = std::max(max_fold, static_cast<int>(*fold));
  }
  f.k = max_fold + 1;
  return f;
}

}  // namespace respdl
