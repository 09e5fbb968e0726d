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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "respdl/audio.hpp"
#include "respdl/errors.hpp"
#include "unit/test_util.hpp"

using respdl::testing::fixture;

namespace {

struct Expected {
  int rate = 0;
  std::vector<double> samples;
};

Expected read_expected(const std::string& stem) {
  std::ifstream in(fixture(stem + ".expected"));
  Expected e;
  std::size_t n = 0;
  in >> e.rate >> n;
  e.samples.resize(n);
  for (auto& v : e.samples) in >> v;
  return e;
}

void put_u16(std::vector<std::uint8_t>& b, unsigned v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}

// Minimal RIFF writer, independent of encode_wav.
std::vector<std::uint8_t> riff(unsigned format, unsigned channels, unsigned rate, unsigned bits,
                               const std::vector<std::uint8_t>& data) {
  std::vector<std::uint8_t> b = {'R', 'I', 'F', 'F'};
  put_u32(b, static_cast<std::uint32_t>(36 + data.size()));
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<std::uint8_t>(c));
  put_u32(b, 16);
  put_u16(b, format);
  put_u16(b, channels);
  put_u32(b, rate);
  put_u32(b, rate * channels * bits / 8);
  put_u16(b, channels * bits / 8);
  put_u16(b, bits);
  for (char c : std::string("data")) b.push_back(static_cast<std::uint8_t>(c));
  put_u32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

}  // namespace

TEST_CASE("wav fixtures decode to code / 2^(bits-1), channels averaged") {
  for (const std::string stem : {"pcm16_mono", "pcm16_stereo", "pcm32_mono"}) {
    CAPTURE(stem);
    const auto rec = respdl::load_wav(fixture(stem + ".wav"));
    const auto want = read_expected(stem);
    CHECK(rec.sample_rate == want.rate);
    REQUIRE(rec.samples.size() == want.samples.size());
    for (std::size_t i = 0; i < want.samples.size(); ++i) {
      CHECK(rec.samples[i] == want.samples[i]);
    }
  }
  const auto rec = respdl::load_wav(fixture("pcm16_mono.wav"));
  CHECK(rec.samples[0] == -1.0);
  CHECK(rec.recording_id == "pcm16_mono");
  CHECK(rec.patient_id == "pcm16");
}

TEST_CASE("one second of 16-bit silence") {
  const std::vector<std::uint8_t> data(44100 * 2, 0);
  const auto rec = respdl::decode_wav(riff(1, 1, 44100, 16, data));
  CHECK(rec.sample_rate == 44100);
  CHECK(rec.samples.size() == 44100);
  for (double v : rec.samples) REQUIRE(v == 0.0);
}

TEST_CASE("opposite stereo channels average to zero") {
  std::vector<double> interleaved;
  for (int i = 0; i < 100; ++i) {
    interleaved.push_back(0.5);
    interleaved.push_back(-0.5);
  }
  for (auto enc : {respdl::WavEncoding::kPcm16, respdl::WavEncoding::kPcm32,
                   respdl::WavEncoding::kFloat32}) {
    const auto rec = respdl::decode_wav(respdl::encode_wav(interleaved, 2, 8000, enc));
    REQUIRE(rec.samples.size() == 100);
    for (double v : rec.samples) REQUIRE(v == 0.0);
  }
}

TEST_CASE("float32 data chunk decodes verbatim") {
  const std::vector<float> values = {0.0f, 0.25f, -0.75f, 1.0f, -1.0f};
  std::vector<std::uint8_t> data(values.size() * 4);
  std::memcpy(data.data(), values.data(), data.size());
  const auto rec = respdl::decode_wav(riff(3, 1, 16000, 32, data));
  REQUIRE(rec.samples.size() == values.size());
  for (std::size_t i = 0; i < values.size(); ++i) CHECK(rec.samples[i] == values[i]);
}

TEST_CASE("encode/decode round trip") {
  std::vector<double> x;
  for (int i = 0; i < 257; ++i) x.push_back(std::sin(0.1 * i) * 0.8);
  const auto f = respdl::decode_wav(respdl::encode_wav(x, 1, 4000, respdl::WavEncoding::kFloat32));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(f.samples[i] == doctest::Approx(x[i]).epsilon(1e-7));
  const auto p = respdl::decode_wav(respdl::encode_wav(x, 1, 4000, respdl::WavEncoding::kPcm24));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(p.samples[i] - x[i]) <= 1.0 / (1 << 23));
}

TEST_CASE("malformed and unsupported files") {
  const std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'X', 0, 0, 0, 0};
  CHECK_THROWS_AS(respdl::decode_wav(junk), respdl::FormatError);
  auto good = riff(1, 1, 8000, 16, std::vector<std::uint8_t>(8, 0));
  good.resize(30);
  CHECK_THROWS_AS(respdl::decode_wav(good), respdl::FormatError);
  // IMA ADPCM
  CHECK_THROWS_AS(respdl::decode_wav(riff(0x11, 1, 8000, 4, std::vector<std::uint8_t>(8, 0))),
                  respdl::UnsupportedError);
  CHECK_THROWS_AS(respdl::load_wav("/nonexistent/none.wav"), respdl::Error);
}

TEST_CASE("diagnosis names") {
  CHECK(respdl::parse_diagnosis("COPD") == respdl::Diagnosis::kCOPD);
  CHECK(respdl::parse_diagnosis("urti") == respdl::Diagnosis::kURTI);
  CHECK(respdl::parse_diagnosis("Bronchiolitis") == respdl::Diagnosis::kBronchiolitis);
  CHECK_FALSE(respdl::parse_diagnosis("Flu").has_value());
  for (int i = 0; i < 8; ++i) {
    const auto d = static_cast<respdl::Diagnosis>(i);
    CHECK(respdl::parse_diagnosis(respdl::to_string(d)) == d);
  }
}
