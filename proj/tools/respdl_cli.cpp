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

// respdl: ingest, feature extraction, training, evaluation and sweeps for
// respiratory-sound classification.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "respdl/audio.hpp"
#include "respdl/config.hpp"
#include "respdl/dsp.hpp"
#include "respdl/errors.hpp"
#include "respdl/gradcheck_suite.hpp"
#include "respdl/harness.hpp"
#include "respdl/ingest.hpp"
#include "respdl/log.hpp"
#include "respdl/nn/checkpoint.hpp"
#include "respdl/synth.hpp"

namespace fs = std::filesystem;
using namespace respdl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Thrown for invalid option combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

// Config file plus one flag per schema key.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file (flags override it)");
    for (const auto& key : config_schema()) {
      auto* opt = app->add_option_function<std::string>(
          "--" + key.name, [this, name = key.name](const std::string& v) { values[name] = v; },
          key.help);
      opt->type_name("VALUE");
    }
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg;
    try {
      if (!config_file.empty()) cfg = load_config(config_file, cfg);
      for (const auto& key : config_schema()) {
        if (auto it = values.find(key.name); it != values.end()) apply_setting(cfg, key.name, it->second);
      }
      validate(cfg);
    } catch (const ParseError& e) {
      throw UsageError(config_file + ": " + e.what());
    } catch (const ParameterError& e) {
      throw UsageError(e.what());
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

fs::path prepare_run_dir(const fs::path& out, const std::string& prefix, const ExperimentConfig& cfg) {
  const fs::path dir = out / (prefix + config_hash(cfg));
  fs::create_directories(dir);
  write_file(dir / "config.txt", serialize_config(cfg));
  return dir;
}

RunOptions run_options(const fs::path& dir, const ExperimentConfig& cfg) {
  RunOptions opts;
  opts.out_dir = dir;
  opts.config_hash = config_hash(cfg);
  opts.on_epoch = [](int fold, const HistoryRow& row) {
    std::ostringstream os;
    os << "fold " << fold << " epoch " << row.epoch << " loss " << row.train_loss
       << " heldout " << row.heldout_score;
    if (row.train_accuracy >= 0.0) os << " train_acc " << row.train_accuracy;
    log::info(os.str());
  };
  return opts;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      if constexpr (std::is_same_v<T, int>) {
        std::size_t used = 0;
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } else {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw UsageError(std::string("bad ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

fs::path cache_root(const ExperimentConfig& cfg, const fs::path& out) {
  return feature_cache_root(cfg, out / "cache");
}

// ---- subcommands ------------------------------------------------------------------

int cmd_ingest(const ExperimentConfig& cfg, const fs::path& out) {
  if (cfg.audio_dir.empty()) throw UsageError("--audio_dir is required");
  const auto manifest = build_manifest(cfg.audio_dir, cfg.diagnosis_file, cfg.task);
  fs::create_directories(out);
  save_manifest(manifest, out / "manifest.csv");
  save_rejects(manifest, out / "rejects.csv");
  const auto folds = make_folds(manifest, cfg.folds, cfg.fold_seed, {cfg.patient_independent});
  write_file(out / "folds.csv", serialize_folds(folds));
  std::cout << "recordings," << manifest.recordings.size() << "\n"
            << "cycles," << manifest.total_cycles() << "\n";
  const char* names[] = {"normal", "crackle", "wheeze", "both"};
  for (int c = 0; c < 4; ++c) std::cout << names[c] << ',' << manifest.cycle_counts[c] << "\n";
  std::cout << "rejects," << manifest.rejects.size() << "\n";
  return kExitOk;
}

int cmd_features(const ExperimentConfig& cfg, const fs::path& out) {
  const auto data = prepare_dataset(cfg, cache_root(cfg, out));
  std::cout << "entities," << data.items.size() << "\n"
            << "warnings," << data.warnings.size() << "\n";
  return kExitOk;
}

int cmd_train(const ExperimentConfig& cfg, const fs::path& out, int jobs, int fold) {
  const auto data = prepare_dataset(cfg, cache_root(cfg, out));
  const fs::path dir = prepare_run_dir(out, "run-", cfg);
  const auto opts = run_options(dir, cfg);
  std::vector<ReportRow> rows;
  if (fold >= 0) {
    const auto r = run_fold(cfg, data, fold, opts);
    CvResult single;
    single.folds.push_back(r);
    single.mean = r.metrics;
    rows = cv_report_rows(cfg, single);
    rows.pop_back();
  } else {
    rows = cv_report_rows(cfg, run_cv(cfg, data, jobs, opts));
  }
  const std::string report = serialize_report(rows);
  write_file(dir / "report.csv", report);
  std::cout << report << "run_dir," << dir.string() << "\n";
  return kExitOk;
}

std::vector<std::unique_ptr<models::Classifier<float>>> load_members(const fs::path& fold_dir,
                                                                      ModelKind kind,
                                                                      NormStats& norm) {
  std::vector<std::unique_ptr<models::Classifier<float>>> members;
  std::vector<ModelKind> kinds;
  if (kind == ModelKind::kEnsemble) {
    kinds = {ModelKind::kCnnMoe, ModelKind::kCrnn};
  } else {
    kinds = {kind};
  }
  for (auto k : kinds) {
    const auto ckpt = nn::load_checkpoint(fold_dir / (std::string(models::to_string(k)) + ".ckpt"));
    norm = checkpoint_info(ckpt).norm;
    members.push_back(restore_model(ckpt));
  }
  return members;
}

int cmd_eval(const fs::path& run_dir, int fold) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(run_dir / "config.txt");
  } catch (const ParseError& e) {
    throw UsageError(std::string("config.txt: ") + e.what());
  }
  const auto data = prepare_dataset(cfg, cache_root(cfg, run_dir.parent_path()));
  std::vector<ReportRow> rows;
  std::vector<Metrics> all;
  for (int f = 0; f < data.folds.k; ++f) {
    if (fold >= 0 && f != fold) continue;
    NormStats norm;
    auto members = load_members(run_dir / ("fold" + std::to_string(f)), cfg.model, norm);
    std::vector<models::Classifier<float>*> ptrs;
    for (auto& m : members) ptrs.push_back(m.get());
    const auto ev = evaluate_fold(ptrs, data, f, norm, cfg.patch_width);
    all.push_back(ev.metrics);
    ReportRow r;
    r.task = std::string(to_string(cfg.task));
    r.setting = std::string(models::to_string(cfg.model));
    r.fold = std::to_string(f);
    r.specificity = ev.metrics.specificity;
    r.sensitivity = ev.metrics.sensitivity;
    r.icbhi_score = ev.metrics.icbhi_score;
    rows.push_back(r);
  }
  if (rows.empty()) throw UsageError("no such fold");
  if (fold < 0) {
    const auto mean = mean_metrics(all);
    ReportRow r = rows.front();
    r.fold = "mean";
    r.specificity = mean.specificity;
    r.sensitivity = mean.sensitivity;
    r.icbhi_score = mean.icbhi_score;
    rows.push_back(r);
  }
  const std::string report = serialize_report(rows);
  write_file(run_dir / "eval.csv", report);
  std::cout << report;
  return kExitOk;
}

int cmd_sweep(bool cycle, const ExperimentConfig& cfg, const fs::path& out, const std::string& list,
              const SweepOptions& so) {
  const fs::path dir = prepare_run_dir(out, cycle ? "sweep-cycle-" : "sweep-timeres-", cfg);
  const auto opts = run_options(dir, cfg);
  SweepReport rep;
  if (cycle) {
    if (!is_cycle_task(cfg.task)) throw UsageError("sweep-cycle needs a task1 sub-task");
    const auto lengths = parse_list<double>(list, "length");
    rep = sweep_cycle_length(cfg, lengths, cache_root(cfg, out), so, opts);
  } else {
    const auto widths = parse_list<int>(list, "width");
    rep = sweep_time_resolution(cfg, widths, cache_root(cfg, out), so, opts);
  }
  const std::string report = serialize_sweep_report(rep.rows);
  write_file(dir / (cycle ? "sweep_cycle.csv" : "sweep_timeres.csv"), report);
  std::cout << report << "run_dir," << dir.string() << "\n";
  return kExitOk;
}

int cmd_predict(const std::vector<std::string>& model_paths, const std::string& wav) {
  if (model_paths.empty() || model_paths.size() > 2) throw UsageError("give one or two --model files");
  std::vector<std::unique_ptr<models::Classifier<float>>> members;
  std::optional<CheckpointInfo> first;
  for (const auto& p : model_paths) {
    const auto ckpt = nn::load_checkpoint(p);
    const auto info = checkpoint_info(ckpt);
    if (first && (info.task != first->task || info.options.patch_width != first->options.patch_width)) {
      throw UsageError("ensemble checkpoints disagree on task or patch width");
    }
    if (!first) first = info;
    members.push_back(restore_model(ckpt));
  }
  const auto audio = resample(load_wav(wav), kTargetRate);
  Spectrogram spec = entity_spectrogram(audio.samples, is_cycle_task(first->task),
                                        first->min_cycle_seconds);
  normalize_in_place(spec, first->norm);
  std::vector<models::Classifier<float>*> ptrs;
  for (auto& m : members) ptrs.push_back(m.get());
  const auto probs = predict_entity(ptrs, spec, first->options.patch_width);
  const auto names = class_names(first->task);
  for (std::size_t i = 0; i < names.size(); ++i) std::cout << (i ? "," : "") << names[i];
  std::cout << "\n";
  char buf[32];
  for (std::size_t i = 0; i < probs.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", probs[i]);
    std::cout << (i ? "," : "") << buf;
  }
  std::cout << "\n";
  return kExitOk;
}

int cmd_gradcheck(bool quick) {
  bool ok = true;
  for (const auto& e : run_gradcheck_suite(!quick)) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %-32s max_rel_err=%.3e tol=%.0e", e.passed() ? "PASS" : "FAIL",
                  e.name.c_str(), e.report.max_rel_error(), e.tolerance);
    std::cout << buf << "\n";
    if (!e.passed()) {
      ok = false;
      std::cerr << e.report.summary() << "\n";
    }
  }
  return ok ? kExitOk : kExitNumerical;
}

int cmd_synth(const fs::path& out, const SynthOptions& opts) {
  const auto s = write_synth_dataset(out, opts);
  std::cout << "recordings," << s.recordings << "\n"
            << "cycles," << s.cycles << "\n"
            << "audio_dir," << s.audio_dir.string() << "\n"
            << "diagnosis_file," << s.diagnosis_file.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"respdl: respiratory-sound classification with gammatone features, CNN-MoE and C-RNN"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Progress and diagnostic messages on stderr");
  app.add_flag("-q,--quiet", quiet, "Errors only");
  app.fallthrough();

  std::string out = "runs";
  int jobs = 1;

  auto* ingest = app.add_subcommand("ingest", "Build the dataset manifest, reject list and fold assignment");
  ConfigFlags ingest_flags;
  ingest_flags.attach(ingest);
  ingest->add_option("--out", out, "Output directory")->capture_default_str();

  auto* features = app.add_subcommand("features", "Compute and cache gammatone spectrograms");
  ConfigFlags features_flags;
  features_flags.attach(features);
  features->add_option("--out", out, "Run root (default cache location is <out>/cache)")->capture_default_str();

  auto* train = app.add_subcommand("train", "Cross-validated training and evaluation");
  ConfigFlags train_flags;
  train_flags.attach(train);
  int train_fold = -1;
  train->add_option("--out", out, "Run root; the run directory is named by the config hash")->capture_default_str();
  train->add_option("--jobs", jobs, "Folds trained in parallel worker processes")->capture_default_str();
  train->add_option("--fold", train_fold, "Train and evaluate only this fold (0-based)");

  auto* eval = app.add_subcommand("eval", "Re-evaluate a run's checkpoints on their held-out folds");
  std::string run_dir;
  int eval_fold = -1;
  eval->add_option("--run", run_dir, "Run directory written by train")->required();
  eval->add_option("--fold", eval_fold, "Evaluate only this fold (0-based)");

  SweepOptions sweep_opts;
  auto* sweep_cycle = app.add_subcommand("sweep-cycle", "Minimum cycle length sweep (Task 1)");
  ConfigFlags cycle_flags;
  cycle_flags.attach(sweep_cycle);
  std::string lengths = "2,3,4,5,6,7,8";
  sweep_cycle->add_option("--lengths", lengths, "Comma-separated minimum cycle lengths in seconds")->capture_default_str();
  sweep_cycle->add_option("--out", out, "Run root")->capture_default_str();
  sweep_cycle->add_option("--jobs", jobs, "Parallel worker processes")->capture_default_str();
  sweep_cycle->add_flag("--all-folds", sweep_opts.all_folds, "Cross-validate every point instead of one fold");
  sweep_cycle->add_option("--sweep-fold", sweep_opts.fold, "Fold used when not cross-validating")->capture_default_str();

  auto* sweep_time = app.add_subcommand("sweep-timeres", "Patch width (time resolution) sweep");
  ConfigFlags time_flags;
  time_flags.attach(sweep_time);
  std::string widths = "32,64,96,128,160,192";
  sweep_time->add_option("--widths", widths, "Comma-separated patch widths in frames")->capture_default_str();
  sweep_time->add_option("--out", out, "Run root")->capture_default_str();
  sweep_time->add_option("--jobs", jobs, "Parallel worker processes")->capture_default_str();
  sweep_time->add_flag("--all-folds", sweep_opts.all_folds, "Cross-validate every point instead of one fold");
  sweep_time->add_option("--sweep-fold", sweep_opts.fold, "Fold used when not cross-validating")->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Class probabilities for one WAV file");
  std::vector<std::string> model_paths;
  std::string wav;
  predict->add_option("--model", model_paths, "Checkpoint; give two to average an ensemble")->required();
  predict->add_option("--wav", wav, "WAV file scored as one entity")->required();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks of every layer");
  bool quick = false;
  gradcheck->add_flag("--quick", quick, "Skip the full CNN-MoE composition check");

  auto* synth = app.add_subcommand("synth", "Write a synthetic labeled dataset");
  SynthOptions synth_opts;
  std::string synth_out;
  bool fixed_rate = false;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--classes", synth_opts.classes, "2, 3 or 4 cycle classes")->capture_default_str();
  synth->add_option("--n", synth_opts.n, "Number of recordings")->capture_default_str();
  synth->add_option("--cycles-per-recording", synth_opts.cycles_per_recording, "Labeled cycles per recording")
      ->capture_default_str();
  synth->add_option("--min-seconds", synth_opts.min_cycle_seconds, "Shortest cycle")->capture_default_str();
  synth->add_option("--max-seconds", synth_opts.max_cycle_seconds, "Longest cycle")->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "Generator seed")->capture_default_str();
  synth->add_flag("--fixed-rate", fixed_rate, "Write every file at 16 kHz");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  log::set_level(quiet ? log::Level::kError : verbose ? log::Level::kInfo : log::Level::kWarning);
  if (jobs < 1) {
    std::cerr << "--jobs must be at least 1\n";
    return kExitUsage;
  }
  sweep_opts.jobs = jobs;
  synth_opts.vary_sample_rate = !fixed_rate;

  try {
    if (*ingest) return cmd_ingest(ingest_flags.resolve(), out);
    if (*features) return cmd_features(features_flags.resolve(), out);
    if (*train) return cmd_train(train_flags.resolve(), out, jobs, train_fold);
    if (*eval) return cmd_eval(run_dir, eval_fold);
    if (*sweep_cycle) return cmd_sweep(true, cycle_flags.resolve(), out, lengths, sweep_opts);
    if (*sweep_time) return cmd_sweep(false, time_flags.resolve(), out, widths, sweep_opts);
    if (*predict) return cmd_predict(model_paths, wav);
    if (*gradcheck) return cmd_gradcheck(quick);
    if (*synth) return cmd_synth(synth_out, synth_opts);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
