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
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "respdl/nn/tensor.hpp"

namespace respdl::nn {

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Binary container:
//   "RSDL", u16 version, u16 task-tag length + bytes,
//   u32 metadata length + "key=value\n" text, u32 record count,
//   records: u32 name length + bytes, u32 rank, u32 dims..., f32 LE values.
// Adam moments travel as ordinary records named "adam.m/<param>" and
// "adam.v/<param>"; the step counter is the "adam_step" metadata key.
struct Checkpoint {
  std::string task;
  std::map<std::string, std::string> meta;
  std::vector<std::pair<std::string, Tensor<float>>> records;

  const Tensor<float>* find(const std::string& name) const;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace respdl::nn
