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

#include <set>
#include <string>

#include <doctest.h>

#include "respdl/config.hpp"
#include "respdl/errors.hpp"

using namespace respdl;

TEST_CASE("config text round trip") {
  ExperimentConfig c;
  c.task = Task::kTask2_3class;
  c.model = ModelKind::kEnsemble;
  c.min_cycle_seconds = 4.5;
  c.patch_width = 96;
  c.train.adam.lr = 3e-4;
  c.train.mixup.enabled = false;
  c.train.selection = Selection::kFinal;
  c.patient_independent = true;
  c.audio_dir = "/data/icbhi";
  const auto text = serialize_config(c);
  const auto back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.task == Task::kTask2_3class);
  CHECK(back.train.adam.lr == 3e-4);
  CHECK(config_hash(back) == config_hash(c));
  auto d = c;
  d.train.seed = 2;
  CHECK(config_hash(d) != config_hash(c));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("every schema key appears in the serialized config") {
  const auto text = serialize_config(ExperimentConfig{});
  std::set<std::string> names;
  for (const auto& k : config_schema()) {
    CHECK(names.insert(k.name).second);
    CHECK_FALSE(k.help.empty());
    CHECK(text.find(k.name + " = ") != std::string::npos);
  }
  CHECK(names.count("min_cycle_seconds") == 1);
  CHECK(names.count("l2_lambda") == 1);
}

TEST_CASE("comments, blank lines and a base config") {
  ExperimentConfig base;
  base.train.epochs = 7;
  const auto c = parse_config("# experiment\n\n  model = crnn   # inline\npatch_width=64\n", base);
  CHECK(c.model == ModelKind::kCrnn);
  CHECK(c.patch_width == 64);
  CHECK(c.train.epochs == 7);
}

TEST_CASE("config errors name the line") {
  auto line_of = [](const char* text) {
    try {
      parse_config(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("task = task1_4class\nbogus = 1\n") == 2);
  CHECK(line_of("epochs = ten\n") == 1);
  CHECK(line_of("\n\nno equals sign\n") == 3);
  CHECK(line_of("mixup = maybe\n") == 1);
  ExperimentConfig c;
  CHECK_THROWS_AS(apply_setting(c, "nope", "1"), ParameterError);
  apply_setting(c, "selection", "final");
  CHECK(c.train.selection == Selection::kFinal);
}
