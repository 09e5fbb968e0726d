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

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "respdl/audio.hpp"

namespace respdl {

// Band-limited (Kaiser-windowed sinc) sample-rate conversion. The low-pass
// cutoff sits at min(src_rate, dst_rate) / 2. Output length is
// round(len * dst_rate / src_rate); equal rates return the input unchanged.
std::vector<double> resample(std::span<const double> samples, int src_rate,
                             int dst_rate = 16000);
AudioRecording resample(const AudioRecording& rec, int dst_rate = 16000);

// Glasberg & Moore ERB-rate scale and bandwidth.
double erb_rate(double hz);
double erb_rate_to_hz(double erb);
double erb_bandwidth(double hz);

struct GammatoneBank {
  int n_channels = 64;
  int fft_len = 2048;
  int sample_rate = 16000;
  double f_min = 50.0;
  std::vector<double> center_freqs;
  std::vector<double> weights;  // n_channels x n_bins, row-major

  int n_bins() const { return fft_len / 2 + 1; }
  double weight(int channel, int bin) const {
    return weights[static_cast<std::size_t>(channel) * n_bins() + bin];
  }
};

// Center frequencies are equally spaced on the ERB-rate scale over
// (f_min, sr/2), at the midpoints of n_channels equal ERB intervals. Row c is
// the magnitude response of a 4th-order gammatone filter centred at cf[c],
// |H(f)| = (1 + ((f - cf) / (1.019 ERB(cf)))^2)^-2, at each FFT bin.
GammatoneBank build_gammatone_bank(int n_channels = 64, int fft_len = 2048,
                                   int sample_rate = 16000, double f_min = 50.0);

struct StftParams {
  int window = 1024;
  int hop = 256;
};

inline constexpr double kLogFloor = 1e-10;

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

// Channels x frames, row-major float storage.
struct Spectrogram {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
  std::string entity_id;

  float at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  float& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// floor((L - window) / hop) + 1, or 0 when L < window.
int frame_count(std::size_t length, const StftParams& stft = {});

// Hann-windowed power STFT (window zero-padded to fft_len), bank weights,
// log(x + 1e-10), then (v - mean) / std when stats are given.
// Throws LengthError when the input is shorter than one window.
Spectrogram gammatone_spectrogram(std::span<const double> samples,
                                  const GammatoneBank& bank,
                                  const std::optional<NormStats>& stats = std::nullopt,
                                  const StftParams& stft = {});

void normalize_in_place(Spectrogram& spec, const NormStats& stats);

// Mean/std over every cell of every spectrogram; std is floored at 1e-6.
NormStats fit_norm_stats(std::span<const Spectrogram> training);
NormStats fit_norm_stats(std::span<const Spectrogram* const> training);

struct Patch {
  int rows = 0;
  int cols = 0;
  std::vector<float> values;
  std::string entity_id;
  int index = 0;
  int start_frame = 0;  // -1 for a cyclically tiled patch
};

// Non-overlapping windows from frame 0; a remainder adds one right-aligned
// window over the last `width` frames; T < width tiles the spectrogram.
std::vector<Patch> patchify(const Spectrogram& spec, int width);

// Feature cache container: "GSPC", u16 version, u32 rows, u32 cols, then
// row-major little-endian float32.
inline constexpr std::uint16_t kFeatureCacheVersion = 1;
std::vector<std::uint8_t> encode_feature_file(const Spectrogram& spec);
Spectrogram decode_feature_file(std::span<const std::uint8_t> bytes);
void write_feature_file(const std::filesystem::path& path, const Spectrogram& spec);
Spectrogram read_feature_file(const std::filesystem::path& path);

struct FeatureIndexRow {
  std::string entity_id;
  std::string path;
  int rows = 0;
  int cols = 0;
  int label = 0;

  friend bool operator==(const FeatureIndexRow&, const FeatureIndexRow&) = default;
};

// "entity_id,path,rows,cols,label"
std::string serialize_feature_index(std::span<const FeatureIndexRow> rows);
std::vector<FeatureIndexRow> parse_feature_index(std::string_view csv);

}  // namespace respdl
