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
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "respdl/augment.hpp"
#include "respdl/dsp.hpp"
#include "respdl/ingest.hpp"
#include "respdl/metrics.hpp"
#include "respdl/models.hpp"
#include "respdl/nn/adam.hpp"

namespace respdl {

using models::ModelKind;

enum class Selection { kBest, kFinal };

struct TrainConfig {
  int epochs = 100;
  int batch_size = 50;
  nn::AdamConfig adam;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 1;
  MixupConfig mixup;
  Selection selection = Selection::kBest;
  // Stop once entity-level training accuracy reaches this value; 0 disables.
  double target_train_accuracy = 0.0;
};

struct ExperimentConfig {
  Task task = Task::kTask1_4class;
  double min_cycle_seconds = 6.0;  // cycle tasks only
  int patch_width = 128;
  ModelKind model = ModelKind::kCnnMoe;
  TrainConfig train;
  int folds = 5;
  std::uint64_t fold_seed = 1;
  bool patient_independent = false;
  int experts = 10;
  int gru_hidden = 512;
  int width_divisor = 1;
  std::string audio_dir;
  std::string diagnosis_file;
  std::string cache_dir;  // empty: $RESPDL_CACHE, else <out>/cache
};

inline constexpr int kPatchWidths[] = {32, 64, 96, 128, 160, 192};
inline constexpr double kSecondsPerFrame = 256.0 / 16000.0;

// Throws ParameterError on out-of-range values.
void validate(const ExperimentConfig& cfg);

// Fixed front end: 64-channel gammatone bank, 2048-point FFT, 1024/256 STFT.
const GammatoneBank& default_bank();

// Log-gammatone spectrogram (unnormalized) of one entity's 16 kHz waveform.
// Cycle entities are first duplicated to min_cycle_seconds; anything still
// shorter than one analysis window is duplicated up to it.
Spectrogram entity_spectrogram(std::span<const double> samples16k, bool cycle_entity,
                               double min_cycle_seconds);

struct LabeledFeature {
  Entity entity;
  Spectrogram spec;  // unnormalized
};

struct Dataset {
  Task task = Task::kTask1_4class;
  std::vector<LabeledFeature> items;  // in entity order
  FoldAssignment folds;
  std::vector<ExtractionWarning> warnings;

  std::vector<Entity> entities() const;
};

// Feature-cache root: cfg.cache_dir, else $RESPDL_CACHE, else fallback.
std::filesystem::path feature_cache_root(const ExperimentConfig& cfg,
                                         const std::filesystem::path& fallback);

// Builds the manifest, computes (or loads cached) features under a
// subdirectory of cache_root keyed by the manifest and front-end settings,
// drops cycles that could not be extracted, and assigns folds.
Dataset prepare_dataset(const ExperimentConfig& cfg, const std::filesystem::path& cache_root);

// Dataset from in-memory features; folds assigned from cfg.
Dataset make_dataset(Task task, std::vector<LabeledFeature> items, const ExperimentConfig& cfg);

struct HistoryRow {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double heldout_score = 0.0;
  double train_accuracy = -1.0;  // only when early stopping is enabled
};

struct FoldResult {
  int fold = 0;
  Metrics metrics;  // at the selected epoch
  int selected_epoch = 0;
  std::vector<HistoryRow> history;
  double final_train_accuracy = -1.0;
  std::map<std::string, int> predictions;  // held-out entity -> class at the selected epoch
  std::vector<std::string> train_ids;  // entities behind norm stats, mixup and updates
  std::vector<std::string> test_ids;
  NormStats norm;
};

struct RunOptions {
  // Checkpoints, history and model cards go here when set.
  std::optional<std::filesystem::path> out_dir;
  // Recorded in model cards.
  std::string config_hash;
  // Observe per-epoch progress.
  std::function<void(int fold, const HistoryRow&)> on_epoch;
};

// Trains on every fold but `fold`, evaluates at entity level on `fold`.
FoldResult run_fold(const ExperimentConfig& cfg, const Dataset& data, int fold,
                    const RunOptions& opts = {});

struct CvResult {
  std::vector<FoldResult> folds;
  Metrics mean;
};

// Folds run in up to `jobs` worker processes; results are identical for any
// job count.
CvResult run_cv(const ExperimentConfig& cfg, const Dataset& data, int jobs = 1,
                const RunOptions& opts = {});

struct ReportRow {
  std::string task;
  std::string setting;
  std::string fold;  // index or "mean"
  double specificity = 0.0;
  double sensitivity = 0.0;
  double icbhi_score = 0.0;
  double seconds = 0.0;  // sweep reports: cycle length or patch duration
  bool best = false;
};

// "task,setting,fold,specificity,sensitivity,icbhi_score"
std::string serialize_report(std::span<const ReportRow> rows);
// Sweep reports append ",seconds,best".
std::string serialize_sweep_report(std::span<const ReportRow> rows);
std::vector<ReportRow> parse_report(std::string_view csv);
// "epoch,train_loss,heldout_score"
std::string serialize_history(std::span<const HistoryRow> rows);

std::vector<ReportRow> cv_report_rows(const ExperimentConfig& cfg, const CvResult& cv);

struct SweepOptions {
  bool all_folds = false;  // default: first fold only
  int fold = 0;
  int jobs = 1;
};

struct SweepReport {
  std::vector<ReportRow> rows;
  std::size_t best_index = 0;
};

// Highest score wins; ties go to the earlier (smaller) setting.
std::size_t best_row(std::span<const ReportRow> rows);

// Minimum cycle lengths in seconds, default 2..8. Cycle tasks only.
SweepReport sweep_cycle_length(const ExperimentConfig& base, std::span<const double> lengths,
                               const std::filesystem::path& cache_root, const SweepOptions& opts,
                               const RunOptions& run = {});
// Patch widths in frames, the command line defaults to 32..192 step 32.
SweepReport sweep_time_resolution(const ExperimentConfig& base, std::span<const int> widths,
                                  const std::filesystem::path& cache_root,
                                  const SweepOptions& opts, const RunOptions& run = {});

// Per-class probabilities for one entity: mean over its patches of the
// (ensemble-averaged) model outputs.
std::vector<double> predict_entity(std::span<models::Classifier<float>* const> members,
                                   const Spectrogram& normalized, int patch_width);

struct Evaluation {
  Metrics metrics;
  std::map<std::string, int> predictions;
  std::map<std::string, std::vector<double>> probabilities;
};

// Entity-level evaluation of the held-out fold with fixed weights.
Evaluation evaluate_fold(std::span<models::Classifier<float>* const> members,
                         const Dataset& data, int fold, const NormStats& norm, int patch_width);

// Checkpoint metadata keys written by run_fold.
struct CheckpointInfo {
  Task task = Task::kTask1_4class;
  ModelKind model = ModelKind::kCnnMoe;
  models::ModelOptions options;
  double min_cycle_seconds = 0.0;
  NormStats norm;
};

CheckpointInfo checkpoint_info(const nn::Checkpoint& ckpt);
std::unique_ptr<models::Classifier<float>> restore_model(const nn::Checkpoint& ckpt);

}  // namespace respdl
