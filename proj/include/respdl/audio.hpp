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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace respdl {

enum class Diagnosis {
  kHealthy,
  kCOPD,
  kBronchiectasis,
  kAsthma,
  kURTI,
  kLRTI,
  kPneumonia,
  kBronchiolitis,
};

std::string_view to_string(Diagnosis d);
// Case-insensitive; accepts the spellings used by the ICBHI diagnosis file.
std::optional<Diagnosis> parse_diagnosis(std::string_view name);

struct AudioRecording {
  std::vector<double> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
  std::string recording_id;
  std::string patient_id;
  Diagnosis diagnosis = Diagnosis::kHealthy;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate
                           : 0.0;
  }
};

enum class WavEncoding { kPcm16, kPcm24, kPcm32, kFloat32 };

// Decodes a RIFF/WAVE file. Integer PCM is scaled by 2^(bits-1) so the most
// negative code maps to -1.0; multi-channel audio is averaged to mono.
// recording_id is the file stem; patient_id is its first '_' token.
AudioRecording load_wav(const std::filesystem::path& path);
AudioRecording decode_wav(std::span<const std::uint8_t> bytes);

// Interleaved samples, clamped to [-1, 1] for integer encodings.
std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved,
                                     int channels, int sample_rate,
                                     WavEncoding encoding);
void write_wav(const std::filesystem::path& path,
               std::span<const double> interleaved, int channels,
               int sample_rate, WavEncoding encoding = WavEncoding::kPcm16);

}  // namespace respdl
