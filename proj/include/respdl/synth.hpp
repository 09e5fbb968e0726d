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
#include <vector>

#include "respdl/ingest.hpp"

namespace respdl {

// Synthetic lung-sound corpus with class-distinct textures over a shared
// breath-noise bed: Normal is the bed alone, Crackle adds ~10 ms broadband
// clicks, Wheeze adds a ~400 Hz harmonic tone, Both adds both.
struct SynthOptions {
  int n = 40;        // recordings, one labeled cycle each by default
  int classes = 4;   // 4: all cycle classes; 3: Normal/Crackle/Wheeze; 2: Normal/Crackle
  int cycles_per_recording = 1;
  double min_cycle_seconds = 1.2;
  double max_cycle_seconds = 2.0;
  bool vary_sample_rate = true;  // draw each file's rate from common device rates
  std::uint64_t seed = 7;
};

struct SynthSummary {
  std::filesystem::path audio_dir;       // <out>/audio
  std::filesystem::path diagnosis_file;  // <out>/diagnosis.txt
  int recordings = 0;
  int cycles = 0;
  std::array<int, 4> class4_counts{};
};

// Diagnosis assigned to recordings whose cycles carry class c; healthy
// patients have normal cycles, chronic and non-chronic diseases differ.
Diagnosis synth_diagnosis(Class4 c);

// One cycle of the given class at the given rate, peak amplitude <= 0.9.
std::vector<double> synth_cycle(Class4 c, double seconds, int sample_rate, std::uint64_t seed);

SynthSummary write_synth_dataset(const std::filesystem::path& out, const SynthOptions& opts);

}  // namespace respdl
