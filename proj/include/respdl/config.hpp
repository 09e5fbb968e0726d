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

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "respdl/harness.hpp"

namespace respdl {

// One settable experiment field. The schema drives config-file parsing,
// command-line flags and help text alike.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

const std::vector<ConfigKey>& config_schema();

// Throws ParameterError for unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, std::string_view key, std::string_view value);

// Flat "key = value" lines; '#' starts a comment. Unknown keys and
// malformed lines raise ParseError with the line number.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Every schema key in schema order; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// 16 hex digits identifying the effective configuration.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace respdl
