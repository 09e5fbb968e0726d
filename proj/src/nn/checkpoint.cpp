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

#include "respdl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "../util.hpp"
#include "respdl/errors.hpp"

namespace respdl::nn {
namespace {

class Writer {
 public:
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
  }
  void bytes(std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : records) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("RSDL");
  w.u16(kCheckpointVersion);
  w.u16(static_cast<std::uint16_t>(ckpt.task.size()));
  w.bytes(ckpt.task);
  std::string meta;
  for (const auto& [k, v] : ckpt.meta) meta += k + "=" + v + "\n";
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta);
  w.u32(static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& [name, t] : ckpt.records) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.values()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "RSDL", 4) != 0) {
    throw FormatError("not an RSDL checkpoint");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw UnsupportedError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.task = r.str(r.u16());
  const std::string meta = r.str(r.u32());
  for (auto line : detail::lines(meta)) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("bad checkpoint metadata line");
    ckpt.meta[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    const auto rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError("bad tensor rank in checkpoint");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    std::vector<float> values(shape_size(shape));
    for (auto& v : values) v = std::bit_cast<float>(r.u32());
    ckpt.records.emplace_back(std::move(name), Tensor<float>(shape, std::move(values)));
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  detail::write_atomic(path,
                       std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace respdl::nn
