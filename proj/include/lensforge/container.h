// Copyright 2026 The Lensforge Authors.
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

// Single-file tensor container:
//
//   u64 little-endian header length N
//   N bytes of JSON: {name: {dtype, shape, data_offsets: [begin, end]}, ...}
//                    plus an optional "__metadata__" string map
//   payload; data_offsets are relative to the first payload byte
//
// F16 and BF16 payloads are widened to f32 when read.

#ifndef LENSFORGE_CONTAINER_H_
#define LENSFORGE_CONTAINER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/tensor.h"

namespace lensforge {

enum class Dtype { kF32, kF16, kBF16 };

std::string_view dtype_name(Dtype dtype);
std::size_t dtype_size(Dtype dtype);

struct TensorEntry {
  Dtype dtype = Dtype::kF32;
  Shape shape;
  // Payload-relative byte range [begin, end).
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  friend bool operator==(const TensorEntry&, const TensorEntry&) = default;
};

using ContainerIndex = std::map<std::string, TensorEntry, std::less<>>;

// Parsed header plus on-demand access to tensor payloads. Reads open the
// file independently, so a Container may be shared across threads.
class Container {
 public:
  // Parses and validates the header only. Throws ContainerError.
  static Container open(const std::filesystem::path& path);
  static Container from_bytes(std::string bytes);

  const ContainerIndex& index() const { return index_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  bool contains(std::string_view name) const { return index_.contains(name); }

  // Throws ContainerError(kUnknownTensor) for unknown names.
  const TensorEntry& entry(std::string_view name) const;
  Tensor read(std::string_view name) const;

  // Byte source behind a container (file or memory).
  class Source;

 private:
  Container(std::shared_ptr<const Source> source, ContainerIndex index,
            std::map<std::string, std::string> metadata,
            std::uint64_t payload_offset);
  static Container parse(std::shared_ptr<const Source> source);

  std::shared_ptr<const Source> source_;
  ContainerIndex index_;
  std::map<std::string, std::string> metadata_;
  std::uint64_t payload_offset_ = 0;
};

// A tensor to be written, already encoded in `dtype`.
struct ContainerTensor {
  std::string name;
  Dtype dtype = Dtype::kF32;
  Shape shape;
  std::vector<std::uint8_t> bytes;
};

ContainerTensor encode_tensor(std::string name, const Tensor& tensor,
                              Dtype dtype = Dtype::kF32);

// Serializes tensors in ascending name order; the header is space-padded to
// a multiple of 8 bytes.
std::string container_bytes(std::span<const ContainerTensor> tensors,
                            const std::map<std::string, std::string>& metadata = {});
void write_container(const std::filesystem::path& path,
                     std::span<const ContainerTensor> tensors,
                     const std::map<std::string, std::string>& metadata = {});

float f16_to_f32(std::uint16_t bits);
float bf16_to_f32(std::uint16_t bits);
std::uint16_t f32_to_f16(float value);
std::uint16_t f32_to_bf16(float value);

}  // namespace lensforge

#endif  // LENSFORGE_CONTAINER_H_
