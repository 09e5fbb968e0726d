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
#include <numbers>
#include <numeric>

#include "respdl/dsp.hpp"
#include "respdl/errors.hpp"

namespace respdl {
namespace {

constexpr int kZeroCrossings = 24;
constexpr double kKaiserBeta = 8.6;

double kaiser(double x, double beta) {
  // x in [-1, 1]
  const double a = 1.0 - x * x;
  if (a <= 0.0) return 0.0;
  return std::cyl_bessel_i(0.0, beta * std::sqrt(a)) / std::cyl_bessel_i(0.0, beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::vector<double> resample(std::span<const double> samples, int src_rate, int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw ParameterError("sample rates must be positive");
  if (samples.empty()) return {};
  if (src_rate == dst_rate) return {samples.begin(), samples.end()};

  const double ratio = static_cast<double>(dst_rate) / src_rate;
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(samples.size()) * ratio));
  // Cutoff in cycles per input sample.
  const double fc = 0.5 * std::min(1.0, ratio);
  const double half_width = kZeroCrossings / (2.0 * fc);
  const auto n = static_cast<long long>(samples.size());
  auto kernel = [&](double d) {
    if (std::abs(d) >= half_width) return 0.0;
    return 2.0 * fc * sinc(2.0 * fc * d) * kaiser(d / half_width, kKaiserBeta);
  };

  // Output i sits at input time i * up / down; the fractional offset cycles
  // through `phases` values, so the taps are tabulated once per phase.
  const long long g = std::gcd(src_rate, dst_rate);
  const long long up = src_rate / g;
  const long long phases = dst_rate / g;
  const auto reach = static_cast<long long>(std::ceil(half_width)) + 1;
  const long long taps = 2 * reach + 1;
  std::vector<double> table;
  const bool tabulate = phases * taps <= (1 << 22);
  if (tabulate) {
    table.resize(static_cast<std::size_t>(phases * taps));
    for (long long p = 0; p < phases; ++p) {
      const double frac = static_cast<double>(p) / static_cast<double>(phases);
      for (long long j = -reach; j <= reach; ++j) {
        table[static_cast<std::size_t>(p * taps + j + reach)] = kernel(frac - static_cast<double>(j));
      }
    }
  }

  std::vector<double> out(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const long long num = static_cast<long long>(i) * up;
    const long long base = num / phases;
    const long long phase = num % phases;
    double acc = 0.0;
    const long long lo = std::max(-reach, -base);
    const long long hi = std::min(reach, n - 1 - base);
    if (tabulate) {
      const double* h = table.data() + phase * taps + reach;
      for (long long j = lo; j <= hi; ++j) acc += samples[static_cast<std::size_t>(base + j)] * h[j];
    } else {
      const double frac = static_cast<double>(phase) / static_cast<double>(phases);
      for (long long j = lo; j <= hi; ++j) {
        acc += samples[static_cast<std::size_t>(base + j)] * kernel(frac - static_cast<double>(j));
      }
    }
    out[i] = acc;
  }
  return out;
}

AudioRecording resample(const AudioRecording& rec, int dst_rate) {
  AudioRecording out;
  out.samples = resample(rec.samples, rec.sample_rate, dst_rate);
  for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  out.sample_rate = dst_rate;
  out.recording_id = rec.recording_id;
  out.patient_id = rec.patient_id;
  out.diagnosis = rec.diagnosis;
  return out;
}

}  // namespace respdl
