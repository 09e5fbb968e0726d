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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "respdl/audio.hpp"

namespace respdl {

inline constexpr int kTargetRate = 16000;

enum class Class4 { kNormal = 0, kCrackle = 1, kWheeze = 2, kBoth = 3 };
enum class Class2 { kNormal = 0, kAnomaly = 1 };

inline Class4 class4_from_flags(bool crackle, bool wheeze) {
  if (crackle && wheeze) return Class4::kBoth;
  if (crackle) return Class4::kCrackle;
  if (wheeze) return Class4::kWheeze;
  return Class4::kNormal;
}

inline Class2 to_class2(Class4 c) {
  return c == Class4::kNormal ? Class2::kNormal : Class2::kAnomaly;
}

// The four challenge sub-tasks. Task 1 scores cycles, Task 2 recordings.
enum class Task { kTask1_4class, kTask1_2class, kTask2_3class, kTask2_2class };

std::string_view to_string(Task t);
Task parse_task(std::string_view name);
int num_classes(Task t);
bool is_cycle_task(Task t);
std::vector<std::string> class_names(Task t);
// Class index per task; index 0 is always the baseline class (Normal/Healthy).
int cycle_class(Task t, Class4 c);
int recording_class(Task t, Diagnosis d);

struct CycleLabel {
  double onset = 0.0;
  double offset = 0.0;
  bool crackle = false;
  bool wheeze = false;

  Class4 class4() const { return class4_from_flags(crackle, wheeze); }
  friend bool operator==(const CycleLabel&, const CycleLabel&) = default;
};

// Four whitespace-separated columns per line: onset offset crackle wheeze.
// Blank lines are ignored. Output sorted by onset.
std::vector<CycleLabel> parse_annotation(std::string_view text);

struct RespiratoryCycle {
  std::string cycle_id;  // "<recording_id>:<index>"
  std::vector<double> samples;  // 16 kHz
  Class4 class4 = Class4::kNormal;
  std::string recording_id;
  std::string patient_id;

  Class2 class2() const { return to_class2(class4); }
};

struct ExtractionWarning {
  std::string recording_id;
  std::size_t label_index = 0;
  std::string message;
};

struct CycleExtraction {
  std::vector<RespiratoryCycle> cycles;
  std::vector<ExtractionWarning> warnings;
};

// Slices samples[round(onset*16000), round(offset*16000)). Labels running
// past the end are clipped; labels starting at or beyond the end are skipped
// and reported.
CycleExtraction extract_cycles(const AudioRecording& recording,
                               std::span<const CycleLabel> labels);

std::string cycle_id(const std::string& recording_id, std::size_t index);

struct ManifestEntry {
  std::string recording_id;
  std::string patient_id;
  Diagnosis diagnosis = Diagnosis::kHealthy;
  std::string wav_path;
  std::vector<CycleLabel> labels;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Reject {
  std::string path;
  std::string reason;

  friend bool operator==(const Reject&, const Reject&) = default;
};

struct DatasetManifest {
  Task task = Task::kTask1_4class;
  std::vector<ManifestEntry> recordings;  // sorted by recording_id
  std::array<std::size_t, 4> cycle_counts{};  // indexed by Class4
  std::vector<Reject> rejects;

  std::size_t total_cycles() const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Lines "patient_id,diagnosis" (comma or whitespace separated).
std::map<std::string, Diagnosis> parse_diagnosis_file(std::string_view text);

// Scans audio_dir for *.wav with same-stem *.txt annotations.
DatasetManifest build_manifest(const std::filesystem::path& audio_dir,
                               const std::filesystem::path& diagnosis_file,
                               Task task);

// One record per line: recording_id,patient_id,diagnosis,cycle_count,
// followed by wav_path and ';'-joined "onset:offset:crackle:wheeze" labels.
std::string serialize_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(std::string_view text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);
// Rejects sidecar: "path,reason" CSV.
void save_rejects(const DatasetManifest& m, const std::filesystem::path& path);

// A classification entity: a cycle (Task 1) or a whole recording (Task 2).
struct Entity {
  std::string id;
  std::string recording_id;
  std::string patient_id;
  int label = 0;
  std::size_t label_index = 0;  // cycle index within the recording (Task 1)
};

std::vector<Entity> enumerate_entities(const DatasetManifest& m);

struct FoldAssignment {
  int k = 5;
  std::map<std::string, int> fold_of;

  std::vector<std::string> fold_members(int fold) const;
  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

struct FoldOptions {
  // Keep all entities of one patient in the same fold.
  bool patient_independent = false;
};

// Stratified k-fold split over the manifest's task entities.
FoldAssignment make_folds(const DatasetManifest& m, int k, std::uint64_t seed,
                          const FoldOptions& opts = {});
FoldAssignment make_folds(std::span<const Entity> entities, int k,
                          std::uint64_t seed, const FoldOptions& opts = {});

std::string serialize_folds(const FoldAssignment& f);
FoldAssignment parse_folds(std::string_view csv);

}  // namespace respdl
