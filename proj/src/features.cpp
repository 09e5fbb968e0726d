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
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "respdl/dsp.hpp"
#include "respdl/errors.hpp"
#include "util.hpp"

namespace respdl {
namespace {

constexpr double kMinStd = 1e-6;

NormStats fit_impl(std::span<const Spectrogram* const> specs) {
  if (specs.empty()) throw ParameterError("fit_norm_stats needs at least one spectrogram");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* s : specs) {
    for (float v : s->values) sum += v;
    n += s->values.size();
  }
  if (n == 0) throw ParameterError("fit_norm_stats: spectrograms are empty");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto* s : specs) {
    for (float v : s->values) {
      const double d = v - mean;
      ss += d * d;
    }
  }
  const double std = std::sqrt(ss / static_cast<double>(n));
  return {mean, std::max(std, kMinStd)};
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void normalize_in_place(Spectrogram& spec, const NormStats& stats) {
  for (float& v : spec.values) v = static_cast<float>((v - stats.mean) / stats.std);
}

NormStats fit_norm_stats(std::span<const Spectrogram> training) {
  std::vector<const Spectrogram*> ptrs;
  ptrs.reserve(training.size());
  for (const auto& s : training) ptrs.push_back(&s);
  return fit_impl(ptrs);
}

NormStats fit_norm_stats(std::span<const Spectrogram* const> training) {
  return fit_impl(training);
}

std::vector<Patch> patchify(const Spectrogram& spec, int width) {
  if (width < 1) throw ParameterError("patch width must be >= 1");
  if (spec.cols < 1 || spec.rows < 1) throw ParameterError("spectrogram has no frames");
  auto make = [&](int index, int start) {
    Patch p;
    p.rows = spec.rows;
    p.cols = width;
    p.entity_id = spec.entity_id;
    p.index = index;
    p.start_frame = start;
    p.values.resize(static_cast<std::size_t>(spec.rows) * width);
    for (int r = 0; r < spec.rows; ++r) {
      for (int c = 0; c < width; ++c) {
        const int src = start < 0 ? c % spec.cols : start + c;
        p.values[static_cast<std::size_t>(r) * width + c] = spec.at(r, src);
      }
    }
    return p;
  };
  std::vector<Patch> out;
  if (spec.cols < width) {
    out.push_back(make(0, -1));
    return out;
  }
  const int full = spec.cols / width;
  for (int i = 0; i < full; ++i) out.push_back(make(i, i * width));
  if (spec.cols % width != 0) out.push_back(make(full, spec.cols - width));
  return out;
}

std::vector<std::uint8_t> encode_feature_file(const Spectrogram& spec) {
  std::vector<std::uint8_t> out;
  out.reserve(14 + spec.values.size() * 4);
  for (char c : {'G', 'S', 'P', 'C'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kFeatureCacheVersion);
  put_u32(out, static_cast<std::uint32_t>(spec.rows));
  put_u32(out, static_cast<std::uint32_t>(spec.cols));
  for (float v : spec.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Spectrogram decode_feature_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 14 || std::memcmp(bytes.data(), "GSPC", 4) != 0) {
    throw FormatError("not a GSPC feature file");
  }
  const auto version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kFeatureCacheVersion) {
    throw UnsupportedError("unsupported GSPC version " + std::to_string(version));
  }
  Spectrogram s;
  s.rows = static_cast<int>(get_u32(bytes.data() + 6));
  s.cols = static_cast<int>(get_u32(bytes.data() + 10));
  const std::size_t count = static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
  if (bytes.size() != 14 + count * 4) throw FormatError("GSPC payload size mismatch");
  s.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    s.values[i] = std::bit_cast<float>(get_u32(bytes.data() + 14 + 4 * i));
  }
  return s;
}

void write_feature_file(const std::filesystem::path& path, const Spectrogram& spec) {
  const auto bytes = encode_feature_file(spec);
  detail::write_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                              bytes.size()));
}

Spectrogram read_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_feature_file(bytes);
}

std::string serialize_feature_index(std::span<const FeatureIndexRow> rows) {
  std::ostringstream out;
  out << "entity_id,path,rows,cols,label\n";
  for (const auto& r : rows) {
    out << r.entity_id << ',' << r.path << ',' << r.rows << ',' << r.cols << ',' << r.label
        << '\n';
  }
  return out.str();
}

std::vector<FeatureIndexRow> parse_feature_index(std::string_view csv) {
  std::vector<FeatureIndexRow> out;
  int line_no = 0;
  for (auto line : detail::lines(csv)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line.starts_with("entity_id,")) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
    const auto rows = detail::parse_int(f[2]);
    const auto cols = detail::parse_int(f[3]);
    const auto label = detail::parse_int(f[4]);
    if (!rows || !cols || !label) throw ParseError("non-numeric field", line_no);
    out.push_back({std::string(f[0]), std::string(f[1]), static_cast<int>(*rows),
                   static_cast<int>(*cols), static_cast<int>(*label)});
  }
  return out;
}

}  // namespace respdl
