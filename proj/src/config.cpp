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

#include "respdl/config.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "respdl/errors.hpp"
#include "util.hpp"

namespace respdl {

namespace {

double to_double(std::string_view key, std::string_view v) {
  auto d = detail::parse_double(v);
  if (!d) throw ParameterError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  return *d;
}

long long to_int(std::string_view key, std::string_view v) {
  auto i = detail::parse_int(v);
  if (!i) throw ParameterError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  return *i;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  const long long i = to_int(key, v);
  if (i < 0) throw ParameterError(std::string(key) + ": must be nonnegative");
  return static_cast<std::uint64_t>(i);
}

bool to_bool(std::string_view key, std::string_view v) {
  std::string s(detail::trim(v));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ParameterError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

std::string str(bool b) { return b ? "true" : "false"; }

template <typename Get, typename Set>
ConfigKey key(std::string name, std::string help, Get get, Set set) {
  return {std::move(name), std::move(help), get, set};
}

std::vector<ConfigKey> build_schema() {
  using C = ExperimentConfig;
  using SV = std::string_view;
  using detail::format_double;
  std::vector<ConfigKey> s;
  s.push_back(key(
      "task", "sub-task: task1_4class, task1_2class, task2_3class or task2_2class",
      [](const C& c) { return std::string(to_string(c.task)); },
      [](C& c, SV v) { c.task = parse_task(detail::trim(v)); }));
  s.push_back(key(
      "model", "classifier: cnn_moe, crnn or ensemble",
      [](const C& c) { return std::string(models::to_string(c.model)); },
      [](C& c, SV v) { c.model = models::parse_model_kind(detail::trim(v)); }));
  s.push_back(key(
      "min_cycle_seconds", "minimum cycle length after duplication (Task 1)",
      [](const C& c) { return format_double(c.min_cycle_seconds); },
      [](C& c, SV v) { c.min_cycle_seconds = to_double("min_cycle_seconds", v); }));
  s.push_back(key(
      "patch_width", "patch width in frames: 32, 64, 96, 128, 160 or 192",
      [](const C& c) { return std::to_string(c.patch_width); },
      [](C& c, SV v) { c.patch_width = static_cast<int>(to_int("patch_width", v)); }));
  s.push_back(key(
      "epochs", "training epochs per fold",
      [](const C& c) { return std::to_string(c.train.epochs); },
      [](C& c, SV v) { c.train.epochs = static_cast<int>(to_int("epochs", v)); }));
  s.push_back(key(
      "batch_size", "patches per minibatch",
      [](const C& c) { return std::to_string(c.train.batch_size); },
      [](C& c, SV v) { c.train.batch_size = static_cast<int>(to_int("batch_size", v)); }));
  s.push_back(key(
      "lr", "Adam learning rate",
      [](const C& c) { return format_double(c.train.adam.lr); },
      [](C& c, SV v) { c.train.adam.lr = to_double("lr", v); }));
  s.push_back(key(
      "beta1", "Adam first-moment decay",
      [](const C& c) { return format_double(c.train.adam.beta1); },
      [](C& c, SV v) { c.train.adam.beta1 = to_double("beta1", v); }));
  s.push_back(key(
      "beta2", "Adam second-moment decay",
      [](const C& c) { return format_double(c.train.adam.beta2); },
      [](C& c, SV v) { c.train.adam.beta2 = to_double("beta2", v); }));
  s.push_back(key(
      "adam_eps", "Adam epsilon",
      [](const C& c) { return format_double(c.train.adam.eps); },
      [](C& c, SV v) { c.train.adam.eps = to_double("adam_eps", v); }));
  s.push_back(key(
      "l2_lambda", "L2 weight-decay coefficient",
      [](const C& c) { return format_double(c.train.l2_lambda); },
      [](C& c, SV v) { c.train.l2_lambda = to_double("l2_lambda", v); }));
  s.push_back(key(
      "seed", "training seed (weights, shuffling, mixup)",
      [](const C& c) { return std::to_string(c.train.seed); },
      [](C& c, SV v) { c.train.seed = to_u64("seed", v); }));
  s.push_back(key(
      "mixup", "apply mixup to training batches",
      [](const C& c) { return str(c.train.mixup.enabled); },
      [](C& c, SV v) { c.train.mixup.enabled = to_bool("mixup", v); }));
  s.push_back(key(
      "mixup_alpha", "mixup Beta(alpha, alpha) parameter",
      [](const C& c) { return format_double(c.train.mixup.alpha); },
      [](C& c, SV v) { c.train.mixup.alpha = to_double("mixup_alpha", v); }));
  s.push_back(key(
      "selection", "checkpoint selection: best (held-out score) or final",
      [](const C& c) { return std::string(c.train.selection == Selection::kBest ? "best" : "final"); },
      [](C& c, SV v) {
        const auto t = detail::trim(v);
        if (t == "best") {
          c.train.selection = Selection::kBest;
        } else if (t == "final") {
          c.train.selection = Selection::kFinal;
        } else {
          throw ParameterError("selection: expected best or final");
        }
      }));
  s.push_back(key(
      "target_train_accuracy", "stop a fold once training accuracy reaches this (0 = off)",
      [](const C& c) { return format_double(c.train.target_train_accuracy); },
      [](C& c, SV v) { c.train.target_train_accuracy = to_double("target_train_accuracy", v); }));
  s.push_back(key(
      "folds", "number of cross-validation folds",
      [](const C& c) { return std::to_string(c.folds); },
      [](C& c, SV v) { c.folds = static_cast<int>(to_int("folds", v)); }));
  s.push_back(key(
      "fold_seed", "seed for the fold assignment",
      [](const C& c) { return std::to_string(c.fold_seed); },
      [](C& c, SV v) { c.fold_seed = to_u64("fold_seed", v); }));
  s.push_back(key(
      "patient_independent", "keep each patient's entities in one fold",
      [](const C& c) { return str(c.patient_independent); },
      [](C& c, SV v) { c.patient_independent = to_bool("patient_independent", v); }));
  s.push_back(key(
      "experts", "MoE expert count",
      [](const C& c) { return std::to_string(c.experts); },
      [](C& c, SV v) { c.experts = static_cast<int>(to_int("experts", v)); }));
  s.push_back(key(
      "gru_hidden", "bi-GRU hidden units per direction",
      [](const C& c) { return std::to_string(c.gru_hidden); },
      [](C& c, SV v) { c.gru_hidden = static_cast<int>(to_int("gru_hidden", v)); }));
  s.push_back(key(
      "width_divisor", "divide all layer widths by this (1 = published sizes)",
      [](const C& c) { return std::to_string(c.width_divisor); },
      [](C& c, SV v) { c.width_divisor = static_cast<int>(to_int("width_divisor", v)); }));
  s.push_back(key(
      "audio_dir", "directory of WAV recordings and annotation files",
      [](const C& c) { return c.audio_dir; },
      [](C& c, SV v) { c.audio_dir = std::string(detail::trim(v)); }));
  s.push_back(key(
      "diagnosis_file", "patient diagnosis list",
      [](const C& c) { return c.diagnosis_file; },
      [](C& c, SV v) { c.diagnosis_file = std::string(detail::trim(v)); }));
  s.push_back(key(
      "cache_dir", "feature cache root (default $RESPDL_CACHE or <out>/cache)",
      [](const C& c) { return c.cache_dir; },
      [](C& c, SV v) { c.cache_dir = std::string(detail::trim(v)); }));
  return s;
}

}  // namespace

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = build_schema();
  return schema;
}

void apply_setting(ExperimentConfig& cfg, std::string_view name, std::string_view value) {
  for (const auto& k : config_schema()) {
    if (k.name == name) {
      k.set(cfg, value);
      return;
    }
  }
  throw ParameterError("unknown config key '" + std::string(name) + "'");
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  int line_no = 0;
  for (auto raw : detail::lines(text)) {
    ++line_no;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", line_no);
    const auto name = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    try {
      apply_setting(base, name, value);
    } catch (const ParameterError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  return parse_config(detail::read_text(path), std::move(base));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& k : config_schema()) os << k.name << " = " << k.get(cfg) << '\n';
  return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = detail::fnv1a(serialize_config(cfg));
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 15];
  return s;
}

}  // namespace respdl
