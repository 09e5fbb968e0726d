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

#include "respdl/harness.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <sstream>

#include "respdl/errors.hpp"
#include "respdl/log.hpp"
#include "respdl/nn/loss.hpp"
#include "util.hpp"

namespace respdl {

namespace fs = std::filesystem;
using models::Classifier;
using nn::Mode;
using nn::Tensor;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
  return s;
}

std::vector<ModelKind> member_kinds(ModelKind kind) {
  if (kind == ModelKind::kEnsemble) return {ModelKind::kCnnMoe, ModelKind::kCrnn};
  return {kind};
}

}  // namespace

// ---- config & front end -------------------------------------------------------

void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& msg) { throw ParameterError(msg); };
  if (std::find(std::begin(kPatchWidths), std::end(kPatchWidths), cfg.patch_width) ==
      std::end(kPatchWidths)) {
    fail("patch_width must be one of 32, 64, 96, 128, 160, 192; got " +
         std::to_string(cfg.patch_width));
  }
  if (is_cycle_task(cfg.task) && !(cfg.min_cycle_seconds > 0.0 && cfg.min_cycle_seconds <= 60.0)) {
    fail("min_cycle_seconds must be in (0, 60]");
  }
  const auto& t = cfg.train;
  if (t.epochs < 1) fail("epochs must be at least 1");
  if (t.batch_size < 1) fail("batch_size must be at least 1");
  if (!(t.adam.lr > 0.0)) fail("lr must be positive");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(t.adam.eps > 0.0)) fail("adam_eps must be positive");
  if (!(t.l2_lambda >= 0.0)) fail("l2_lambda must be nonnegative");
  if (!(t.mixup.alpha > 0.0)) fail("mixup_alpha must be positive");
  if (!(t.target_train_accuracy >= 0.0 && t.target_train_accuracy <= 1.0)) {
    fail("target_train_accuracy must be in [0, 1]");
  }
  if (cfg.folds < 2) fail("folds must be at least 2");
  if (cfg.experts < 1) fail("experts must be at least 1");
  if (cfg.gru_hidden < 1) fail("gru_hidden must be at least 1");
  if (cfg.width_divisor < 1) fail("width_divisor must be at least 1");
}

const GammatoneBank& default_bank() {
  static const GammatoneBank bank = build_gammatone_bank(64, 2048, kTargetRate, 50.0);
  return bank;
}

Spectrogram entity_spectrogram(std::span<const double> samples16k, bool cycle_entity,
                               double min_cycle_seconds) {
  if (samples16k.empty()) throw LengthError("entity has no samples");
  const StftParams stft;
  std::size_t min_samples = static_cast<std::size_t>(stft.window);
  if (cycle_entity) {
    min_samples = std::max<std::size_t>(
        min_samples, static_cast<std::size_t>(std::llround(min_cycle_seconds * kTargetRate)));
  }
  const auto audio = duplicate_to_min(samples16k, min_samples);
  return gammatone_spectrogram(audio, default_bank(), std::nullopt, stft);
}

std::vector<Entity> Dataset::entities() const {
  std::vector<Entity> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.entity);
  return out;
}

fs::path feature_cache_root(const ExperimentConfig& cfg, const fs::path& fallback) {
  if (!cfg.cache_dir.empty()) return cfg.cache_dir;
  if (const char* env = std::getenv("RESPDL_CACHE"); env != nullptr && *env != '\0') return env;
  return fallback;
}

namespace {

std::string entity_file_name(const std::string& id) {
  std::string s = id;
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s + ".gspc";
}

std::vector<LabeledFeature> load_cached(const fs::path& dir, const std::vector<Entity>& entities) {
  const auto index = parse_feature_index(detail::read_text(dir / "index.csv"));
  std::map<std::string, const FeatureIndexRow*> by_id;
  for (const auto& row : index) by_id[row.entity_id] = &row;
  std::vector<LabeledFeature> out;
  for (const auto& e : entities) {
    auto it = by_id.find(e.id);
    if (it == by_id.end()) continue;  // skipped at extraction time
    Spectrogram spec = read_feature_file(dir / it->second->path);
    spec.entity_id = e.id;
    if (spec.rows != it->second->rows || spec.cols != it->second->cols) {
      throw FormatError("feature cache entry disagrees with index: " + e.id);
    }
    out.push_back({e, std::move(spec)});
  }
  return out;
}

}  // namespace

Dataset make_dataset(Task task, std::vector<LabeledFeature> items, const ExperimentConfig& cfg) {
  Dataset d;
  d.task = task;
  d.items = std::move(items);
  const auto entities = d.entities();
  d.folds = make_folds(std::span<const Entity>(entities), cfg.folds, cfg.fold_seed,
                       FoldOptions{cfg.patient_independent});
  return d;
}

Dataset prepare_dataset(const ExperimentConfig& cfg, const fs::path& cache_root) {
  validate(cfg);
  if (cfg.audio_dir.empty()) throw ParameterError("audio_dir is not set");
  const DatasetManifest manifest = build_manifest(cfg.audio_dir, cfg.diagnosis_file, cfg.task);
  for (const auto& r : manifest.rejects) log::warning("rejected " + r.path + ": " + r.reason);
  const bool cycles = is_cycle_task(cfg.task);

  std::ostringstream key;
  key << "features-v1|" << to_string(cfg.task) << '|'
      << (cycles ? detail::format_double(cfg.min_cycle_seconds) : "recording")
      << "|bank=64,2048,16000,50|stft=1024,256|" << serialize_manifest(manifest);
  const fs::path dir = cache_root / ("features-" + hex64(detail::fnv1a(key.str())));
  const auto entities = enumerate_entities(manifest);

  Dataset out;
  out.task = cfg.task;
  if (fs::exists(dir / "index.csv")) {
    log::info("feature cache hit: " + dir.string());
    out = make_dataset(cfg.task, load_cached(dir, entities), cfg);
    return out;
  }

  std::map<std::string, const Entity*> entity_of;
  for (const auto& e : entities) entity_of[e.id] = &e;
  std::vector<LabeledFeature> items;
  std::vector<ExtractionWarning> warnings;
  std::vector<FeatureIndexRow> index;
  auto add = [&](const std::string& id, Spectrogram spec) {
    const Entity& e = *entity_of.at(id);
    spec.entity_id = id;
    const std::string file = entity_file_name(id);
    write_feature_file(dir / file, spec);
    index.push_back({id, file, spec.rows, spec.cols, e.label});
    items.push_back({e, std::move(spec)});
  };
  for (const auto& rec : manifest.recordings) {
    AudioRecording audio = resample(load_wav(rec.wav_path), kTargetRate);
    audio.recording_id = rec.recording_id;
    audio.patient_id = rec.patient_id;
    if (cycles) {
      auto ext = extract_cycles(audio, rec.labels);
      for (auto& w : ext.warnings) {
        log::warning(w.recording_id + " cycle " + std::to_string(w.label_index) + ": " + w.message);
        warnings.push_back(std::move(w));
      }
      for (const auto& c : ext.cycles) {
        add(c.cycle_id, entity_spectrogram(c.samples, true, cfg.min_cycle_seconds));
      }
    } else {
      add(rec.recording_id, entity_spectrogram(audio.samples, false, 0.0));
    }
  }
  // The index is written last so a partially written cache is never used.
  detail::write_atomic(dir / "index.csv", serialize_feature_index(index));

  // Keep manifest order so cached and fresh datasets are identical.
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < entities.size(); ++i) pos[entities[i].id] = i;
  std::sort(items.begin(), items.end(), [&](const auto& a, const auto& b) {
    return pos[a.entity.id] < pos[b.entity.id];
  });
  out = make_dataset(cfg.task, std::move(items), cfg);
  out.warnings = std::move(warnings);
  return out;
}

// ---- prediction ---------------------------------------------------------------

std::vector<double> predict_entity(std::span<Classifier<float>* const> members,
                                   const Spectrogram& normalized, int patch_width) {
  if (members.empty()) throw ParameterError("no models to predict with");
  const auto patches = patchify(normalized, patch_width);
  const auto rows = static_cast<std::size_t>(normalized.rows);
  const auto width = static_cast<std::size_t>(patch_width);
  Tensor<float> x({patches.size(), rows, width});
  for (std::size_t p = 0; p < patches.size(); ++p) {
    std::copy(patches[p].values.begin(), patches[p].values.end(), x.data() + p * rows * width);
  }
  std::vector<std::vector<double>> per_member;
  for (auto* m : members) {
    const auto out = m->forward(x, Mode::kInfer);
    const std::size_t n = out.probs.dim(1);
    std::vector<std::vector<double>> patch_probs(patches.size(), std::vector<double>(n));
    for (std::size_t p = 0; p < patches.size(); ++p) {
      for (std::size_t c = 0; c < n; ++c) patch_probs[p][c] = out.probs[p * n + c];
    }
    per_member.push_back(models::aggregate_patches(patch_probs));
  }
  if (per_member.size() == 2) return models::ensemble_fuse(per_member[0], per_member[1]);
  return models::aggregate_patches(per_member);
}

namespace {

Spectrogram normalized_copy(const Spectrogram& s, const NormStats& norm) {
  Spectrogram out = s;
  normalize_in_place(out, norm);
  return out;
}

template <typename Pred>
Evaluation evaluate_items(std::span<Classifier<float>* const> members,
                          const std::vector<LabeledFeature>& items, Pred include,
                          const NormStats& norm, int patch_width, int n_classes) {
  Evaluation ev;
  std::map<std::string, int> truths;
  for (const auto& it : items) {
    if (!include(it)) continue;
    auto probs = predict_entity(members, normalized_copy(it.spec, norm), patch_width);
    ev.predictions[it.entity.id] = models::argmax(probs);
    ev.probabilities[it.entity.id] = std::move(probs);
    truths[it.entity.id] = it.entity.label;
  }
  if (truths.empty()) throw ParameterError("no entities to evaluate");
  ev.metrics = compute_metrics(truths, ev.predictions, n_classes);
  return ev;
}

}  // namespace

Evaluation evaluate_fold(std::span<Classifier<float>* const> members, const Dataset& data,
                         int fold, const NormStats& norm, int patch_width) {
  return evaluate_items(
      members, data.items,
      [&](const LabeledFeature& it) { return data.folds.fold_of.at(it.entity.id) == fold; },
      norm, patch_width, num_classes(data.task));
}

// ---- checkpoints ----------------------------------------------------------------

CheckpointInfo checkpoint_info(const nn::Checkpoint& ckpt) {
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = ckpt.meta.find(key);
    if (it == ckpt.meta.end()) throw FormatError("checkpoint metadata lacks '" + key + "'");
    return it->second;
  };
  auto get_int = [&](const std::string& key) {
    auto v = detail::parse_int(get(key));
    if (!v) throw FormatError("checkpoint metadata '" + key + "' is not an integer");
    return static_cast<int>(*v);
  };
  auto get_double = [&](const std::string& key) {
    auto v = detail::parse_double(get(key));
    if (!v) throw FormatError("checkpoint metadata '" + key + "' is not a number");
    return *v;
  };
  CheckpointInfo info;
  info.task = parse_task(ckpt.task);
  info.model = models::parse_model_kind(get("model"));
  info.options.n_classes = get_int("n_classes");
  info.options.patch_rows = get_int("patch_rows");
  info.options.patch_width = get_int("patch_width");
  info.options.experts = get_int("experts");
  info.options.gru_hidden = get_int("gru_hidden");
  info.options.width_divisor = get_int("width_divisor");
  info.options.seed = static_cast<std::uint64_t>(std::stoull(get("seed")));
  info.min_cycle_seconds = get_double("min_cycle_seconds");
  info.norm = {get_double("norm_mean"), get_double("norm_std")};
  return info;
}

std::unique_ptr<Classifier<float>> restore_model(const nn::Checkpoint& ckpt) {
  const auto info = checkpoint_info(ckpt);
  auto model = models::make_classifier<float>(info.model, info.options);
  models::load_weights(*model, ckpt);
  return model;
}

namespace {

struct Member {
  ModelKind kind;
  models::ModelOptions options;
  std::unique_ptr<Classifier<float>> model;
  std::unique_ptr<nn::Adam<float>> adam;
};

nn::Checkpoint member_checkpoint(Member& m, const ExperimentConfig& cfg, const NormStats& norm,
                                 int epoch, double score) {
  nn::Checkpoint ckpt = models::to_checkpoint(*m.model, std::string(to_string(cfg.task)));
  auto& meta = ckpt.meta;
  meta["model"] = std::string(models::to_string(m.kind));
  meta["n_classes"] = std::to_string(m.options.n_classes);
  meta["patch_rows"] = std::to_string(m.options.patch_rows);
  meta["patch_width"] = std::to_string(m.options.patch_width);
  meta["experts"] = std::to_string(m.options.experts);
  meta["gru_hidden"] = std::to_string(m.options.gru_hidden);
  meta["width_divisor"] = std::to_string(m.options.width_divisor);
  meta["seed"] = std::to_string(m.options.seed);
  meta["min_cycle_seconds"] =
      detail::format_double(is_cycle_task(cfg.task) ? cfg.min_cycle_seconds : 0.0);
  meta["norm_mean"] = detail::format_double(norm.mean);
  meta["norm_std"] = detail::format_double(norm.std);
  meta["epoch"] = std::to_string(epoch);
  meta["heldout_score"] = detail::format_double(score);
  meta["adam_step"] = std::to_string(m.adam->steps());
  const auto params = m.model->parameters();
  const auto& moments = m.adam->moments();
  for (std::size_t i = 0; i < params.size() && i < moments.size(); ++i) {
    if (moments[i].m.empty()) continue;
    const auto& shape = params[i]->value.shape();
    ckpt.records.emplace_back("adam.m/" + params[i]->name,
                              Tensor<float>(shape, std::vector<float>(moments[i].m)));
    ckpt.records.emplace_back("adam.v/" + params[i]->name,
                              Tensor<float>(shape, std::vector<float>(moments[i].v)));
  }
  return ckpt;
}

void save_member(Member& m, const ExperimentConfig& cfg, const NormStats& norm, int epoch,
                 double score, const fs::path& dir, const std::string& config_hash) {
  const auto name = std::string(models::to_string(m.kind));
  nn::save_checkpoint(dir / (name + ".ckpt"), member_checkpoint(m, cfg, norm, epoch, score));
  std::ostringstream card;
  card << "model=" << name << '\n'
       << "task=" << to_string(cfg.task) << '\n'
       << "patch_width=" << cfg.patch_width << '\n'
       << "min_cycle_seconds="
       << (is_cycle_task(cfg.task) ? detail::format_double(cfg.min_cycle_seconds) : "n/a") << '\n'
       << "seed=" << cfg.train.seed << '\n'
       << "config_hash=" << config_hash << '\n'
       << "epoch=" << epoch << '\n'
       << "heldout_icbhi_score=" << detail::format_double(score) << '\n';
  detail::write_atomic(dir / (name + ".card.txt"), card.str());
}

}  // namespace

// ---- training -------------------------------------------------------------------

FoldResult run_fold(const ExperimentConfig& cfg, const Dataset& data, int fold,
                    const RunOptions& opts) {
  validate(cfg);
  if (fold < 0 || fold >= data.folds.k) {
    throw ParameterError("fold " + std::to_string(fold) + " out of range for k=" +
                         std::to_string(data.folds.k));
  }
  const int n_classes = num_classes(data.task);
  const int width = cfg.patch_width;
  FoldResult result;
  result.fold = fold;

  std::vector<const LabeledFeature*> train;
  for (const auto& it : data.items) {
    const int f = data.folds.fold_of.at(it.entity.id);
    if (f == fold) {
      result.test_ids.push_back(it.entity.id);
    } else {
      train.push_back(&it);
      result.train_ids.push_back(it.entity.id);
    }
  }
  if (train.empty() || result.test_ids.empty()) {
    throw ParameterError("fold " + std::to_string(fold) + " leaves an empty train or test set");
  }

  std::vector<const Spectrogram*> train_specs;
  for (const auto* it : train) train_specs.push_back(&it->spec);
  result.norm = fit_norm_stats(std::span<const Spectrogram* const>(train_specs));

  // Training patches, contiguous.
  const auto rows = static_cast<std::size_t>(data.items.front().spec.rows);
  const std::size_t patch_size = rows * static_cast<std::size_t>(width);
  std::vector<float> patch_values;
  std::vector<int> patch_labels;
  for (const auto* it : train) {
    for (const auto& p : patchify(normalized_copy(it->spec, result.norm), width)) {
      patch_values.insert(patch_values.end(), p.values.begin(), p.values.end());
      patch_labels.push_back(it->entity.label);
    }
  }
  const std::size_t n_patches = patch_labels.size();

  std::vector<Member> members;
  const auto kinds = member_kinds(cfg.model);
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    Member m;
    m.kind = kinds[i];
    m.options = {n_classes, static_cast<int>(rows), width, cfg.experts, cfg.gru_hidden,
                 cfg.width_divisor, derive_seed(cfg.train.seed, static_cast<std::uint64_t>(fold), i)};
    m.model = models::make_classifier<float>(m.kind, m.options);
    m.adam = std::make_unique<nn::Adam<float>>(m.model->parameters(), cfg.train.adam);
    members.push_back(std::move(m));
  }
  std::vector<Classifier<float>*> member_ptrs;
  for (auto& m : members) member_ptrs.push_back(m.model.get());

  std::optional<fs::path> fold_dir;
  if (opts.out_dir) fold_dir = *opts.out_dir / ("fold" + std::to_string(fold));
  auto write_history = [&] {
    if (fold_dir) detail::write_atomic(*fold_dir / "history.csv", serialize_history(result.history));
  };

  std::mt19937_64 rng(derive_seed(cfg.train.seed, static_cast<std::uint64_t>(fold), 1000));
  std::vector<std::size_t> order(n_patches);
  double best_score = -1.0;
  const auto batch_size = static_cast<std::size_t>(cfg.train.batch_size);

  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n_patches; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n_patches; start += batch_size) {
      const std::size_t b = std::min(batch_size, n_patches - start);
      LabeledBatch<float> batch;
      batch.patches = Tensor<float>({b, rows, static_cast<std::size_t>(width)});
      std::vector<int> labels(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(patch_values.data() + src * patch_size, patch_size,
                    batch.patches.data() + i * patch_size);
        labels[i] = patch_labels[src];
      }
      batch.targets = one_hot<float>(labels, static_cast<std::size_t>(n_classes));
      const auto mixed = mixup_in_batch(batch, cfg.train.mixup, rng);

      for (auto& m : members) {
        m.adam->zero_grad();
        const auto out = m.model->forward(mixed.patches, Mode::kTrain);
        auto params = m.model->parameters();
        const auto loss = nn::loss_ce_l2(out.probs, mixed.targets,
                                         std::span<nn::Parameter<float>* const>(params),
                                         cfg.train.l2_lambda);
        if (!std::isfinite(loss.total)) {
          write_history();
          throw NumericalError("non-finite loss in fold " + std::to_string(fold) + ", epoch " +
                               std::to_string(epoch));
        }
        m.model->backward(loss.grad_logits);
        m.adam->step();
        loss_sum += loss.total * static_cast<double>(b);
      }
    }

    HistoryRow row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n_patches * members.size());
    const auto ev = evaluate_fold(member_ptrs, data, fold, result.norm, width);
    row.heldout_score = ev.metrics.icbhi_score;
    bool reached_target = false;
    if (cfg.train.target_train_accuracy > 0.0) {
      const auto tr = evaluate_items(
          std::span<Classifier<float>* const>(member_ptrs), data.items,
          [&](const LabeledFeature& it) { return data.folds.fold_of.at(it.entity.id) != fold; },
          result.norm, width, n_classes);
      long correct = 0;
      for (std::size_t c = 0; c < tr.metrics.confusion.size(); ++c) correct += tr.metrics.confusion[c][c];
      row.train_accuracy = static_cast<double>(correct) / static_cast<double>(tr.metrics.total());
      result.final_train_accuracy = row.train_accuracy;
      reached_target = row.train_accuracy >= cfg.train.target_train_accuracy;
    }
    result.history.push_back(row);
    if (opts.on_epoch) opts.on_epoch(fold, row);

    const bool last = epoch == cfg.train.epochs || reached_target;
    const bool take = cfg.train.selection == Selection::kBest ? row.heldout_score > best_score
                                                              : last;
    if (take) {
      best_score = row.heldout_score;
      result.metrics = ev.metrics;
      result.predictions = ev.predictions;
      result.selected_epoch = epoch;
      if (fold_dir) {
        for (auto& m : members) {
          save_member(m, cfg, result.norm, epoch, row.heldout_score, *fold_dir, opts.config_hash);
        }
      }
    }
    if (reached_target) break;
  }
  write_history();
  return result;
}

// ---- fold results across processes ------------------------------------------

namespace {

std::string serialize_fold_result(const FoldResult& r) {
  using detail::format_double;
  std::ostringstream os;
  os << "fold=" << r.fold << '\n'
     << "selected_epoch=" << r.selected_epoch << '\n'
     << "final_train_accuracy=" << format_double(r.final_train_accuracy) << '\n'
     << "norm=" << format_double(r.norm.mean) << ',' << format_double(r.norm.std) << '\n'
     << "metrics=" << format_double(r.metrics.specificity) << ','
     << format_double(r.metrics.sensitivity) << ',' << format_double(r.metrics.icbhi_score)
     << '\n';
  for (const auto& row : r.metrics.confusion) {
    os << "confusion=";
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "," : "") << row[j];
    os << '\n';
  }
  for (const auto& h : r.history) {
    os << "history=" << h.epoch << ',' << format_double(h.train_loss) << ','
       << format_double(h.heldout_score) << ',' << format_double(h.train_accuracy) << '\n';
  }
  for (const auto& [id, c] : r.predictions) os << "pred=" << id << ',' << c << '\n';
  for (const auto& id : r.train_ids) os << "train=" << id << '\n';
  for (const auto& id : r.test_ids) os << "test=" << id << '\n';
  return os.str();
}

double need_double(std::string_view s) {
  auto v = detail::parse_double(s);
  if (!v) throw FormatError("bad number in fold result: " + std::string(s));
  return *v;
}

long long need_int(std::string_view s) {
  auto v = detail::parse_int(s);
  if (!v) throw FormatError("bad integer in fold result: " + std::string(s));
  return *v;
}

FoldResult parse_fold_result(std::string_view text) {
  FoldResult r;
  for (auto line : detail::lines(text)) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    const auto f = detail::split(val, ',');
    if (key == "fold") {
      r.fold = static_cast<int>(need_int(val));
    } else if (key == "selected_epoch") {
      r.selected_epoch = static_cast<int>(need_int(val));
    } else if (key == "final_train_accuracy") {
      r.final_train_accuracy = need_double(val);
    } else if (key == "norm") {
      r.norm = {need_double(f.at(0)), need_double(f.at(1))};
    } else if (key == "metrics") {
      r.metrics.specificity = need_double(f.at(0));
      r.metrics.sensitivity = need_double(f.at(1));
      r.metrics.icbhi_score = need_double(f.at(2));
    } else if (key == "confusion") {
      std::vector<long> row;
      for (auto v : f) row.push_back(static_cast<long>(need_int(v)));
      r.metrics.confusion.push_back(std::move(row));
    } else if (key == "history") {
      r.history.push_back({static_cast<int>(need_int(f.at(0))), need_double(f.at(1)),
                           need_double(f.at(2)), need_double(f.at(3))});
    } else if (key == "pred") {
      const auto comma = val.rfind(',');
      r.predictions[std::string(val.substr(0, comma))] =
          static_cast<int>(need_int(val.substr(comma + 1)));
    } else if (key == "train") {
      r.train_ids.emplace_back(val);
    } else if (key == "test") {
      r.test_ids.emplace_back(val);
    }
  }
  return r;
}

// Runs each task in its own worker process, at most `jobs` at a time, and
// collects the serialized results. jobs <= 1 runs in-process.
std::vector<FoldResult> run_tasks(const std::vector<std::function<FoldResult()>>& tasks, int jobs) {
  std::vector<FoldResult> results(tasks.size());
  if (jobs <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) results[i] = tasks[i]();
    return results;
  }
  const fs::path tmp = fs::temp_directory_path() /
                       ("respdl-jobs-" + std::to_string(::getpid()) + "-" +
                        hex64(reinterpret_cast<std::uintptr_t>(&tasks)));
  fs::create_directories(tmp);
  auto result_path = [&](std::size_t i) { return tmp / ("task" + std::to_string(i) + ".txt"); };
  auto error_path = [&](std::size_t i) { return tmp / ("task" + std::to_string(i) + ".err"); };

  std::map<pid_t, std::size_t> running;
  std::vector<int> exit_codes(tasks.size(), 0);
  std::size_t next = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    if (pid < 0) throw Error("waitpid failed");
    auto it = running.find(pid);
    if (it == running.end()) return;
    exit_codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 4;
    running.erase(it);
  };
  std::fflush(nullptr);
  while (next < tasks.size() || !running.empty()) {
    while (next < tasks.size() && static_cast<int>(running.size()) < jobs) {
      const std::size_t i = next++;
      const pid_t pid = ::fork();
      if (pid < 0) throw Error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          detail::write_atomic(result_path(i), serialize_fold_result(tasks[i]()));
        } catch (const NumericalError& e) {
          detail::write_atomic(error_path(i), e.what());
          code = 3;
        } catch (const std::exception& e) {
          detail::write_atomic(error_path(i), e.what());
          code = 2;
        }
        std::fflush(nullptr);
        ::_exit(code);
      }
      running[pid] = i;
    }
    if (!running.empty()) reap_one();
  }
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (exit_codes[i] != 0) {
      std::string msg = "worker " + std::to_string(i) + " failed";
      if (fs::exists(error_path(i))) msg = detail::read_text(error_path(i));
      fs::remove_all(tmp);
      if (exit_codes[i] == 3) throw NumericalError(msg);
      throw Error(msg);
    }
    results[i] = parse_fold_result(detail::read_text(result_path(i)));
  }
  fs::remove_all(tmp);
  return results;
}

}  // namespace

CvResult run_cv(const ExperimentConfig& cfg, const Dataset& data, int jobs,
                const RunOptions& opts) {
  std::vector<std::function<FoldResult()>> tasks;
  for (int f = 0; f < data.folds.k; ++f) {
    tasks.emplace_back([&, f] { return run_fold(cfg, data, f, opts); });
  }
  CvResult cv;
  cv.folds = run_tasks(tasks, jobs);
  std::vector<Metrics> m;
  for (const auto& f : cv.folds) m.push_back(f.metrics);
  cv.mean = mean_metrics(m);
  return cv;
}

// ---- reports ----------------------------------------------------------------------

namespace {

void write_row_prefix(std::ostringstream& os, const ReportRow& r) {
  using detail::format_double;
  os << r.task << ',' << r.setting << ',' << r.fold << ',' << format_double(r.specificity) << ','
     << format_double(r.sensitivity) << ',' << format_double(r.icbhi_score);
}

}  // namespace

std::string serialize_report(std::span<const ReportRow> rows) {
  std::ostringstream os;
  os << "task,setting,fold,specificity,sensitivity,icbhi_score\n";
  for (const auto& r : rows) {
    write_row_prefix(os, r);
    os << '\n';
  }
  return os.str();
}

std::string serialize_sweep_report(std::span<const ReportRow> rows) {
  std::ostringstream os;
  os << "task,setting,fold,specificity,sensitivity,icbhi_score,seconds,best\n";
  for (const auto& r : rows) {
    write_row_prefix(os, r);
    os << ',' << detail::format_double(r.seconds) << ',' << (r.best ? 1 : 0) << '\n';
  }
  return os.str();
}

std::vector<ReportRow> parse_report(std::string_view csv) {
  std::vector<ReportRow> rows;
  const auto lines = detail::lines(csv);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = detail::split(detail::trim(lines[i]), ',');
    if (f.size() != 6 && f.size() != 8) throw ParseError("report row has wrong field count", i + 1);
    ReportRow r;
    r.task = f[0];
    r.setting = f[1];
    r.fold = f[2];
    r.specificity = need_double(f[3]);
    r.sensitivity = need_double(f[4]);
    r.icbhi_score = need_double(f[5]);
    if (f.size() == 8) {
      r.seconds = need_double(f[6]);
      r.best = f[7] == "1";
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string serialize_history(std::span<const HistoryRow> rows) {
  std::ostringstream os;
  os << "epoch,train_loss,heldout_score\n";
  for (const auto& r : rows) {
    os << r.epoch << ',' << detail::format_double(r.train_loss) << ','
       << detail::format_double(r.heldout_score) << '\n';
  }
  return os.str();
}

namespace {

ReportRow make_row(const ExperimentConfig& cfg, std::string setting, std::string fold,
                   const Metrics& m) {
  ReportRow r;
  r.task = std::string(to_string(cfg.task));
  r.setting = std::move(setting);
  r.fold = std::move(fold);
  r.specificity = m.specificity;
  r.sensitivity = m.sensitivity;
  r.icbhi_score = m.icbhi_score;
  return r;
}

}  // namespace

std::vector<ReportRow> cv_report_rows(const ExperimentConfig& cfg, const CvResult& cv) {
  std::vector<ReportRow> rows;
  const std::string setting(models::to_string(cfg.model));
  for (const auto& f : cv.folds) rows.push_back(make_row(cfg, setting, std::to_string(f.fold), f.metrics));
  rows.push_back(make_row(cfg, setting, "mean", cv.mean));
  return rows;
}

std::size_t best_row(std::span<const ReportRow> rows) {
  if (rows.empty()) throw ParameterError("no rows");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].icbhi_score > rows[best].icbhi_score) best = i;
  }
  return best;
}

namespace {

SweepReport finish_sweep(std::vector<ReportRow> rows) {
  SweepReport rep;
  rep.rows = std::move(rows);
  rep.best_index = best_row(rep.rows);
  rep.rows[rep.best_index].best = true;
  return rep;
}

Metrics sweep_point(const ExperimentConfig& cfg, const Dataset& data, const SweepOptions& so,
                    const RunOptions& run) {
  if (so.all_folds) return run_cv(cfg, data, so.jobs, run).mean;
  return run_fold(cfg, data, so.fold, run).metrics;
}

RunOptions point_options(const RunOptions& run, const std::string& label) {
  RunOptions r = run;
  if (run.out_dir) r.out_dir = *run.out_dir / label;
  return r;
}

std::string fold_label(const SweepOptions& so) {
  return so.all_folds ? "mean" : std::to_string(so.fold);
}

std::vector<FoldResult> sweep_points(const std::vector<std::function<FoldResult()>>& tasks,
                                     const SweepOptions& so) {
  // Sweep points fan out across workers unless the folds inside a point do.
  return run_tasks(tasks, so.all_folds ? 1 : so.jobs);
}

}  // namespace

SweepReport sweep_cycle_length(const ExperimentConfig& base, std::span<const double> lengths,
                               const fs::path& cache_root, const SweepOptions& so,
                               const RunOptions& run) {
  if (!is_cycle_task(base.task)) throw ParameterError("cycle-length sweep needs a Task 1 config");
  if (lengths.empty()) throw ParameterError("no cycle lengths to sweep");
  std::vector<std::function<FoldResult()>> tasks;
  for (double len : lengths) {
    tasks.emplace_back([&, len] {
      ExperimentConfig cfg = base;
      cfg.min_cycle_seconds = len;
      const Dataset data = prepare_dataset(cfg, cache_root);
      FoldResult r;
      r.metrics = sweep_point(cfg, data, so, point_options(run, "cycle_" + detail::format_double(len)));
      return r;
    });
  }
  const auto results = sweep_points(tasks, so);
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    auto row = make_row(base, detail::format_double(lengths[i]), fold_label(so), results[i].metrics);
    row.seconds = lengths[i];
    rows.push_back(std::move(row));
  }
  return finish_sweep(std::move(rows));
}

SweepReport sweep_time_resolution(const ExperimentConfig& base, std::span<const int> widths,
                                  const fs::path& cache_root, const SweepOptions& so,
                                  const RunOptions& run) {
  if (widths.empty()) throw ParameterError("no patch widths to sweep");
  for (int w : widths) {
    ExperimentConfig probe = base;
    probe.patch_width = w;
    validate(probe);
  }
  // Features do not depend on the patch width.
  const Dataset data = prepare_dataset(base, cache_root);
  std::vector<std::function<FoldResult()>> tasks;
  for (int w : widths) {
    tasks.emplace_back([&, w] {
      ExperimentConfig cfg = base;
      cfg.patch_width = w;
      FoldResult r;
      r.metrics = sweep_point(cfg, data, so, point_options(run, "width_" + std::to_string(w)));
      return r;
    });
  }
  const auto results = sweep_points(tasks, so);
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    auto row = make_row(base, std::to_string(widths[i]), fold_label(so), results[i].metrics);
    row.seconds = widths[i] * kSecondsPerFrame;
    rows.push_back(std::move(row));
  }
  return finish_sweep(std::move(rows));
}

}  // namespace respdl
