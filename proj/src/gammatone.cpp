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

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>

#include "respdl/dsp.hpp"
#include "respdl/errors.hpp"

namespace respdl {
namespace {

// The FFTW planner is not re-entrant; execution with a built plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  void execute() { fftw_execute(plan_); }
  double power(int bin) const {
    return out_[bin][0] * out_[bin][0] + out_[bin][1] * out_[bin][1];
  }
  int size() const { return n_; }

 private:
  int n_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

}  // namespace

double erb_rate(double hz) { return 21.4 * std::log10(0.00437 * hz + 1.0); }

double erb_rate_to_hz(double erb) {
  return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437;
}

double erb_bandwidth(double hz) { return 24.7 * (0.00437 * hz + 1.0); }

GammatoneBank build_gammatone_bank(int n_channels, int fft_len, int sample_rate,
                                   double f_min) {
  if (n_channels < 1) throw ParameterError("n_channels must be >= 1");
  if (fft_len < 2 || fft_len % 2 != 0) throw ParameterError("fft_len must be even and >= 2");
  if (sample_rate <= 0) throw ParameterError("sample_rate must be positive");
  const double nyquist = sample_rate / 2.0;
  if (f_min < 0.0 || f_min >= nyquist) {
    throw ParameterError("f_min must lie in [0, Nyquist)");
  }
  GammatoneBank bank;
  bank.n_channels = n_channels;
  bank.fft_len = fft_len;
  bank.sample_rate = sample_rate;
  bank.f_min = f_min;

  const double lo = erb_rate(f_min);
  const double step = (erb_rate(nyquist) - lo) / n_channels;
  bank.center_freqs.resize(static_cast<std::size_t>(n_channels));
  for (int c = 0; c < n_channels; ++c) {
    bank.center_freqs[static_cast<std::size_t>(c)] = erb_rate_to_hz(lo + (c + 0.5) * step);
  }

  const int bins = bank.n_bins();
  bank.weights.resize(static_cast<std::size_t>(n_channels) * bins);
  for (int c = 0; c < n_channels; ++c) {
    const double cf = bank.center_freqs[static_cast<std::size_t>(c)];
    const double b = 1.019 * erb_bandwidth(cf);
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_len;
      const double x = (f - cf) / b;
      const double q = 1.0 + x * x;
      bank.weights[static_cast<std::size_t>(c) * bins + k] = 1.0 / (q * q);
    }
  }
  return bank;
}

int frame_count(std::size_t length, const StftParams& stft) {
  if (length < static_cast<std::size_t>(stft.window)) return 0;
  return static_cast<int>((length - static_cast<std::size_t>(stft.window)) /
                          static_cast<std::size_t>(stft.hop)) + 1;
}

Spectrogram gammatone_spectrogram(std::span<const double> samples,
                                  const GammatoneBank& bank,
                                  const std::optional<NormStats>& stats,
                                  const StftParams& stft) {
  if (stft.window > bank.fft_len) throw ParameterError("window longer than FFT length");
  const int frames = frame_count(samples.size(), stft);
  if (frames == 0) {
    throw LengthError("input of " + std::to_string(samples.size()) +
                      " samples is shorter than one window (" +
                      std::to_string(stft.window) + ")");
  }
  std::vector<double> window(static_cast<std::size_t>(stft.window));
  for (int n = 0; n < stft.window; ++n) {
    window[static_cast<std::size_t>(n)] =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / stft.window);
  }

  RealFft fft(bank.fft_len);
  const int bins = bank.n_bins();
  std::vector<double> power(static_cast<std::size_t>(bins));
  Spectrogram spec;
  spec.rows = bank.n_channels;
  spec.cols = frames;
  spec.values.resize(static_cast<std::size_t>(spec.rows) * frames);

  double* in = fft.input();
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * stft.hop;
    for (int n = 0; n < stft.window; ++n) {
      in[n] = samples[start + static_cast<std::size_t>(n)] * window[static_cast<std::size_t>(n)];
    }
    for (int n = stft.window; n < bank.fft_len; ++n) in[n] = 0.0;
    fft.execute();
    for (int k = 0; k < bins; ++k) power[static_cast<std::size_t>(k)] = fft.power(k);
    for (int c = 0; c < bank.n_channels; ++c) {
      const double* w = bank.weights.data() + static_cast<std::size_t>(c) * bins;
      double e = 0.0;
      for (int k = 0; k < bins; ++k) e += w[k] * power[static_cast<std::size_t>(k)];
      double v = std::log(e + kLogFloor);
      if (stats) v = (v - stats->mean) / stats->std;
      spec.at(c, t) = static_cast<float>(v);
    }
  }
  return spec;
}

}  // namespace respdl
