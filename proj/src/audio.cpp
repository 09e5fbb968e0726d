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

#include "respdl/audio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "respdl/errors.hpp"

namespace respdl {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const FmtChunk& fmt) {
  if (fmt.format == kFormatFloat) {
    if (fmt.bits == 32) {
      const std::uint32_t raw = read_u32(p);
      return static_cast<double>(std::bit_cast<float>(raw));
    }
    std::uint64_t raw = 0;
    for (int i = 0; i < 8; ++i) raw |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(raw);
  }
  switch (fmt.bits) {
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32:
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    default:
      return 0.0;
  }
}

std::string stem_patient(const std::string& stem) {
  const auto pos = stem.find('_');
  return pos == std::string::npos ? stem : stem.substr(0, pos);
}

}  // namespace

std::string_view to_string(Diagnosis d) {
  switch (d) {
    case Diagnosis::kHealthy: return "Healthy";
    case Diagnosis::kCOPD: return "COPD";
    case Diagnosis::kBronchiectasis: return "Bronchiectasis";
    case Diagnosis::kAsthma: return "Asthma";
    case Diagnosis::kURTI: return "URTI";
    case Diagnosis::kLRTI: return "LRTI";
    case Diagnosis::kPneumonia: return "Pneumonia";
    case Diagnosis::kBronchiolitis: return "Bronchiolitis";
  }
  return "Healthy";
}

std::optional<Diagnosis> parse_diagnosis(std::string_view name) {
  std::string lower;
  for (char c : name) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  static constexpr std::array<Diagnosis, 8> kAll = {
      Diagnosis::kHealthy, Diagnosis::kCOPD,     Diagnosis::kBronchiectasis,
      Diagnosis::kAsthma,  Diagnosis::kURTI,     Diagnosis::kLRTI,
      Diagnosis::kPneumonia, Diagnosis::kBronchiolitis};
  for (Diagnosis d : kAll) {
    std::string n;
    for (char c : to_string(d)) {
      n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    if (n == lower) return d;
  }
  return std::nullopt;
}

AudioRecording decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::optional<FmtChunk> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    // Truncated trailing data chunks occur in the wild; clamp them.
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      FmtChunk c;
      c.format = read_u16(f);
      c.channels = read_u16(f + 2);
      c.sample_rate = read_u32(f + 4);
      c.block_align = read_u16(f + 12);
      c.bits = read_u16(f + 14);
      if (c.format == kFormatExtensible) {
        if (avail < 40) throw FormatError("extensible fmt chunk too short");
        c.format = read_u16(f + 24);  // first two bytes of the subformat GUID
      }
      fmt = c;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.subspan(body, avail);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (fmt->channels == 0) throw FormatError("zero channels");
  if (fmt->sample_rate == 0) throw FormatError("zero sample rate");

  const bool pcm_ok = fmt->format == kFormatPcm &&
                      (fmt->bits == 16 || fmt->bits == 24 || fmt->bits == 32);
  const bool float_ok =
      fmt->format == kFormatFloat && (fmt->bits == 32 || fmt->bits == 64);
  if (!pcm_ok && !float_ok) {
    throw UnsupportedError("unsupported WAV encoding: format " +
                           std::to_string(fmt->format) + ", " +
                           std::to_string(fmt->bits) + " bits");
  }
  const std::size_t sample_bytes = fmt->bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt->channels;
  if (fmt->block_align != 0 && fmt->block_align != frame_bytes) {
    throw FormatError("block alignment does not match channels * bits");
  }
  const std::size_t frames = data.size() / frame_bytes;

  AudioRecording rec;
  rec.sample_rate = static_cast<int>(fmt->sample_rate);
  rec.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t ch = 0; ch < fmt->channels; ++ch) {
      acc += decode_sample(data.data() + i * frame_bytes + ch * sample_bytes, *fmt);
    }
    double v = acc / fmt->channels;
    if (!std::isfinite(v)) throw FormatError("non-finite sample value");
    rec.samples[i] = std::clamp(v, -1.0, 1.0);
  }
  return rec;
}

AudioRecording load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  AudioRecording rec;
  try {
    rec = decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  }
  rec.recording_id = path.stem().string();
  rec.patient_id = stem_patient(rec.recording_id);
  return rec;
}

std::vector<std::uint8_t> encode_wav(std::span<const double> interleaved,
                                     int channels, int sample_rate,
                                     WavEncoding encoding) {
  if (channels < 1) throw ParameterError("channels must be >= 1");
  if (sample_rate <= 0) throw ParameterError("sample rate must be positive");
  std::uint16_t bits = 16;
  std::uint16_t format = kFormatPcm;
  switch (encoding) {
    case WavEncoding::kPcm16: bits = 16; break;
    case WavEncoding::kPcm24: bits = 24; break;
    case WavEncoding::kPcm32: bits = 32; break;
    case WavEncoding::kFloat32: bits = 32; format = kFormatFloat; break;
  }
  const std::uint32_t bytes_per_sample = bits / 8;
  const auto data_size =
      static_cast<std::uint32_t>(interleaved.size() * bytes_per_sample);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate) * channels * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);

  for (double s : interleaved) {
    if (encoding == WavEncoding::kFloat32) {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
      continue;
    }
    const double c = std::clamp(s, -1.0, 1.0);
    const double scale = std::ldexp(1.0, bits - 1);
    const auto max_code = static_cast<std::int64_t>(scale) - 1;
    auto code = static_cast<std::int64_t>(std::llround(c * scale));
    code = std::clamp<std::int64_t>(code, -static_cast<std::int64_t>(scale), max_code);
    const auto u = static_cast<std::uint32_t>(code);
    for (std::uint32_t b = 0; b < bytes_per_sample; ++b) {
      out.push_back(static_cast<std::uint8_t>((u >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

void write_wav(const std::filesystem::path& path,
               std::span<const double> interleaved, int channels,
               int sample_rate, WavEncoding encoding) {
  const auto bytes = encode_wav(interleaved, channels, sample_rate, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

}  // namespace respdl
