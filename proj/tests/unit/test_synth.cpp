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
#include <cmath>
#include <set>

#include <doctest.h>

#include "respdl/audio.hpp"
#include "respdl/ingest.hpp"
#include "respdl/synth.hpp"
#include "unit/test_util.hpp"

using namespace respdl;

TEST_CASE("synthetic corpus re-ingests with the requested counts") {
  respdl::testing::TempDir tmp;
  for (int classes : {4, 3, 2}) {
    SynthOptions o;
    o.n = 40;
    o.classes = classes;
    const auto out = tmp / ("c" + std::to_string(classes));
    const auto s = write_synth_dataset(out, o);
    CHECK(s.recordings == 40);
    CHECK(s.cycles == 40);
    const auto m = build_manifest(s.audio_dir, s.diagnosis_file, Task::kTask1_4class);
    CHECK(m.rejects.empty());
    CHECK(m.recordings.size() == 40);
    CHECK(m.total_cycles() == 40);
    for (int c = 0; c < 4; ++c) {
      CHECK(m.cycle_counts[static_cast<std::size_t>(c)] == static_cast<std::size_t>(s.class4_counts[static_cast<std::size_t>(c)]));
      const int want = c < classes ? 40 / classes + (c < 40 % classes ? 1 : 0) : 0;
      CHECK(s.class4_counts[static_cast<std::size_t>(c)] == want);
    }
  }
}

TEST_CASE("synthetic recordings vary in rate and stay in range") {
  respdl::testing::TempDir tmp;
  SynthOptions o;
  o.n = 12;
  o.cycles_per_recording = 2;
  const auto s = write_synth_dataset(tmp.path(), o);
  CHECK(s.cycles == 24);
  std::set<int> rates;
  for (const auto& e : std::filesystem::directory_iterator(s.audio_dir)) {
    if (e.path().extension() != ".wav") continue;
    const auto rec = load_wav(e.path());
    rates.insert(rec.sample_rate);
    double peak = 0.0;
    for (double v : rec.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 0.9 + 1e-4);
    CHECK(peak > 0.01);
  }
  CHECK(rates.size() > 1);
}

TEST_CASE("synth cycles are reproducible and class-dependent") {
  const auto a = synth_cycle(Class4::kWheeze, 1.5, 8000, 3);
  CHECK(a == synth_cycle(Class4::kWheeze, 1.5, 8000, 3));
  CHECK(a.size() == 12000);
  CHECK(a != synth_cycle(Class4::kNormal, 1.5, 8000, 3));
  CHECK(synth_diagnosis(Class4::kNormal) == Diagnosis::kHealthy);
}
