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

#include "respdl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "respdl/errors.hpp"
#include "util.hpp"

namespace respdl {

namespace fs = std::filesystem;

Diagnosis synth_diagnosis(Class4 c) {
  switch (c) {
    case Class4::kNormal:
      return Diagnosis::kHealthy;
    case Class4::kCrackle:
      return Diagnosis::kCOPD;
    case Class4::kWheeze:
      return Diagnosis::kURTI;
    case Class4::kBoth:
      return Diagnosis::kAsthma;
  }
  return Diagnosis::kHealthy;
}

std::vector<double> synth_cycle(Class4 c, double seconds, int sample_rate, std::uint64_t seed) {
  if (seconds <= 0.0 || sample_rate <= 0) throw ParameterError("synth: bad cycle length or rate");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const double fs_d = sample_rate;
  std::vector<double> x(n, 0.0);

  // Breath bed: white noise through two one-pole low-passes (~250 Hz),
  // shaped by a slow inhale/exhale envelope.
  const double a = std::exp(-2.0 * std::numbers::pi * 250.0 / fs_d);
  double s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s1 = a * s1 + (1.0 - a) * gauss(rng);
    s2 = a * s2 + (1.0 - a) * s1;
    const double env = 0.6 + 0.4 * std::sin(std::numbers::pi * static_cast<double>(i) / n);
    x[i] = 4.0 * s2 * env + 0.002 * gauss(rng);
  }

  const bool crackle = c == Class4::kCrackle || c == Class4::kBoth;
  const bool wheeze = c == Class4::kWheeze || c == Class4::kBoth;
  if (crackle) {
    // Damped broadband clicks, ~25 per second.
    const auto clicks = static_cast<int>(std::ceil(25.0 * seconds));
    const auto len = static_cast<std::size_t>(0.010 * fs_d);
    for (int k = 0; k < clicks; ++k) {
      const auto start = static_cast<std::size_t>(uni(rng) * static_cast<double>(n));
      const double f = 300.0 + 1200.0 * uni(rng);
      const double amp = 0.6 + 0.3 * uni(rng);
      for (std::size_t i = 0; i < len && start + i < n; ++i) {
        const double t = static_cast<double>(i) / fs_d;
        x[start + i] += amp * std::exp(-t / 0.002) *
                        (std::sin(2.0 * std::numbers::pi * f * t) + 0.5 * gauss(rng));
      }
    }
  }
  if (wheeze) {
    const double f0 = 380.0 + 40.0 * uni(rng);
    const double phase = 2.0 * std::numbers::pi * uni(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs_d;
      const double w = 2.0 * std::numbers::pi * f0 * t + phase;
      x[i] += 0.35 * std::sin(w) + 0.12 * std::sin(2.0 * w);
    }
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.9) {
    for (auto& v : x) v *= 0.9 / peak;
  }
  return x;
}

namespace {

std::vector<Class4> classes_for(int classes) {
  switch (classes) {
    case 4:
      return {Class4::kNormal, Class4::kCrackle, Class4::kWheeze, Class4::kBoth};
    case 3:
      return {Class4::kNormal, Class4::kCrackle, Class4::kWheeze};
    case 2:
      return {Class4::kNormal, Class4::kCrackle};
    default:
      throw ParameterError("synth: --classes must be 2, 3 or 4");
  }
}

}  // namespace

SynthSummary write_synth_dataset(const fs::path& out, const SynthOptions& opts) {
  if (opts.n <= 0) throw ParameterError("synth: n must be positive");
  if (opts.cycles_per_recording <= 0) throw ParameterError("synth: cycles per recording must be positive");
  if (opts.min_cycle_seconds <= 0.0 || opts.max_cycle_seconds < opts.min_cycle_seconds) {
    throw ParameterError("synth: bad cycle length range");
  }
  const auto pool = classes_for(opts.classes);
  constexpr int kRates[] = {4000, 8000, 16000, 22050, 44100};
  constexpr double kGap = 0.2;  // silence-ish bed before, between and after cycles

  SynthSummary summary;
  summary.audio_dir = out / "audio";
  summary.diagnosis_file = out / "diagnosis.txt";
  fs::create_directories(summary.audio_dir);

  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> len_dist(opts.min_cycle_seconds, opts.max_cycle_seconds);
  std::ostringstream diagnoses;
  for (int r = 0; r < opts.n; ++r) {
    const Class4 cls = pool[static_cast<std::size_t>(r) % pool.size()];
    const int rate = opts.vary_sample_rate ? kRates[rng() % std::size(kRates)] : kTargetRate;
    const std::string patient = std::to_string(101 + r);
    const std::string rec_id = patient + "_1b1_Al_sc_Synth";

    std::vector<double> audio(static_cast<std::size_t>(kGap * rate), 0.0);
    std::ostringstream ann;
    for (int c = 0; c < opts.cycles_per_recording; ++c) {
      const double seconds = len_dist(rng);
      const double onset = static_cast<double>(audio.size()) / rate;
      auto cycle = synth_cycle(cls, seconds, rate, rng());
      audio.insert(audio.end(), cycle.begin(), cycle.end());
      const double offset = static_cast<double>(audio.size()) / rate;
      audio.resize(audio.size() + static_cast<std::size_t>(kGap * rate), 0.0);
      const bool crackle = cls == Class4::kCrackle || cls == Class4::kBoth;
      const bool wheeze = cls == Class4::kWheeze || cls == Class4::kBoth;
      ann << detail::format_double(onset) << '\t' << detail::format_double(offset) << '\t'
          << (crackle ? 1 : 0) << '\t' << (wheeze ? 1 : 0) << '\n';
      ++summary.class4_counts[static_cast<int>(cls)];
      ++summary.cycles;
    }
    write_wav(summary.audio_dir / (rec_id + ".wav"), audio, 1, rate, WavEncoding::kPcm16);
    detail::write_atomic(summary.audio_dir / (rec_id + ".txt"), ann.str());
    diagnoses << patient << '\t' << to_string(synth_diagnosis(cls)) << '\n';
    ++summary.recordings;
  }
  detail::write_atomic(summary.diagnosis_file, diagnoses.str());
  return summary;
}

}  // namespace respdl
