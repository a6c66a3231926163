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

#include "lensforge/container.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "lensforge/errors.h"

namespace lensforge {

using nlohmann::json;
using Kind = ContainerErrorKind;

// Header JSON larger than this is rejected before allocation.
constexpr std::uint64_t kMaxHeaderBytes = 100ULL << 20;

class Container::Source {
 public:
  virtual ~Source() = default;
  virtual std::uint64_t size() const = 0;
  virtual std::string read(std::uint64_t offset, std::uint64_t n) const = 0;
};

namespace {

class MemorySource final : public Container::Source {
 public:
  explicit MemorySource(std::string bytes) : bytes_(std::move(bytes)) {}
  std::uint64_t size() const override { return bytes_.size(); }
  std::string read(std::uint64_t offset, std::uint64_t n) const override {
    return bytes_.substr(offset, n);
  }

 private:
  std::string bytes_;
};

class FileSource final : public Container::Source {
 public:
  explicit FileSource(std::filesystem::path path) : path_(std::move(path)) {
    std::error_code ec;
    size_ = std::filesystem::file_size(path_, ec);
    if (ec) {
      throw ContainerError(Kind::kIo, "cannot stat container '" + path_.string() +
                                          "': " + ec.message());
    }
  }
  std::uint64_t size() const override { return size_; }
  std::string read(std::uint64_t offset, std::uint64_t n) const override {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw ContainerError(Kind::kIo, "cannot open container '" + path_.string() + "'");
    std::string out(n, '\0');
    in.seekg(static_cast<std::streamoff>(offset));
    in.read(out.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::uint64_t>(in.gcount()) != n) {
      throw ContainerError(Kind::kTruncated,
                           "short read of " + std::to_string(n) + " bytes at offset " +
                               std::to_string(offset) + " in '" + path_.string() + "'",
                           static_cast<std::int64_t>(offset));
    }
    return out;
  }

 private:
  std::filesystem::path path_;
  std::uint64_t size_ = 0;
};

std::uint64_t read_u64_le(const std::string& bytes) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) {
    v = (v << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
  }
  return v;
}

Dtype parse_dtype(const std::string& name, const std::string& tensor) {
  if (name == "F32") return Dtype::kF32;
  if (name == "F16") return Dtype::kF16;
  if (name == "BF16") return Dtype::kBF16;
  throw ContainerError(Kind::kUnsupportedDtype,
                       "tensor '" + tensor + "' has unsupported dtype '" + name + "'", 8);
}

std::uint64_t require_count(const json& v, const std::string& what) {
  if (!v.is_number_unsigned()) {
    throw ContainerError(Kind::kBadEntry, what + " must be a non-negative integer", 8);
  }
  return v.get<std::uint64_t>();
}

TensorEntry parse_entry(const std::string& name, const json& j) {
  if (!j.is_object()) {
    throw ContainerError(Kind::kBadEntry, "entry '" + name + "' is not an object", 8);
  }
  for (const char* key : {"dtype", "shape", "data_offsets"}) {
    if (!j.contains(key)) {
      throw ContainerError(Kind::kBadEntry,
                           "entry '" + name + "' lacks '" + key + "'", 8);
    }
  }
  if (!j.at("dtype").is_string()) {
    throw ContainerError(Kind::kBadEntry, "entry '" + name + "' dtype is not a string", 8);
  }
  TensorEntry e;
  e.dtype = parse_dtype(j.at("dtype").get<std::string>(), name);
  const json& shape = j.at("shape");
  if (!shape.is_array()) {
    throw ContainerError(Kind::kBadEntry, "entry '" + name + "' shape is not an array", 8);
  }
  std::uint64_t numel = 1;
  for (const json& d : shape) {
    const std::uint64_t dim = require_count(d, "entry '" + name + "' shape dimension");
    if (dim != 0 && numel > (1ULL << 60) / dim) {
      throw ContainerError(Kind::kBadEntry, "entry '" + name + "' shape overflows", 8);
    }
    numel *= dim;
    e.shape.push_back(static_cast<std::size_t>(dim));
  }
  const json& offsets = j.at("data_offsets");
  if (!offsets.is_array() || offsets.size() != 2) {
    throw ContainerError(Kind::kBadEntry,
                         "entry '" + name + "' data_offsets is not a [begin, end] pair", 8);
  }
  e.begin = require_count(offsets[0], "entry '" + name + "' data_offsets[0]");
  e.end = require_count(offsets[1], "entry '" + name + "' data_offsets[1]");
  if (e.end < e.begin) {
    throw ContainerError(Kind::kBadEntry,
                         "entry '" + name + "' has end offset before begin", 8);
  }
  if (e.end - e.begin != numel * dtype_size(e.dtype)) {
    throw ContainerError(Kind::kSizeMismatch,
                         "entry '" + name + "' spans " + std::to_string(e.end - e.begin) +
                             " bytes but shape " + shape_string(e.shape) + " of " +
                             std::string(dtype_name(e.dtype)) + " needs " +
                             std::to_string(numel * dtype_size(e.dtype)),
                         8);
  }
  return e;
}

}  // namespace

std::string_view dtype_name(Dtype dtype) {
  switch (dtype) {
    case Dtype::kF32:
      return "F32";
    case Dtype::kF16:
      return "F16";
    case Dtype::kBF16:
      return "BF16";
  }
  return "?";
}

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::kF32 ? 4 : 2; }

Container::Container(std::shared_ptr<const Source> source, ContainerIndex index,
                     std::map<std::string, std::string> metadata,
                     std::uint64_t payload_offset)
    : source_(std::move(source)),
      index_(std::move(index)),
      metadata_(std::move(metadata)),
      payload_offset_(payload_offset) {}

Container Container::open(const std::filesystem::path& path) {
  return parse(std::make_shared<FileSource>(path));
}

Container Container::from_bytes(std::string bytes) {
  return parse(std::make_shared<MemorySource>(std::move(bytes)));
}

Container Container::parse(std::shared_ptr<const Source> source) {
  const std::uint64_t size = source->size();
  if (size < 8) {
    throw ContainerError(Kind::kTruncated,
                         "container of " + std::to_string(size) +
                             " bytes is shorter than the 8-byte header length",
                         static_cast<std::int64_t>(size));
  }
  const std::uint64_t header_len = read_u64_le(source->read(0, 8));
  if (header_len > size - 8) {
    throw ContainerError(Kind::kTruncated,
                         "header length " + std::to_string(header_len) +
                             " exceeds the " + std::to_string(size - 8) +
                             " bytes that follow it",
                         8);
  }
  if (header_len > kMaxHeaderBytes) {
    throw ContainerError(Kind::kMalformedHeader,
                         "header length " + std::to_string(header_len) + " is implausibly large",
                         0);
  }
  const std::string header_text = source->read(8, header_len);
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::parse_error& e) {
    const auto pos = static_cast<std::int64_t>(8 + (e.byte > 0 ? e.byte - 1 : 0));
    throw ContainerError(Kind::kMalformedHeader,
                         "malformed header JSON at byte " + std::to_string(pos) + ": " +
                             e.what(),
                         pos);
  }
  if (!header.is_object()) {
    throw ContainerError(Kind::kMalformedHeader, "header JSON is not an object", 8);
  }

  const std::uint64_t payload_offset = 8 + header_len;
  const std::uint64_t payload_size = size - payload_offset;
  ContainerIndex index;
  std::map<std::string, std::string> metadata;
  for (const auto& [name, value] : header.items()) {
    if (name == "__metadata__") {
      if (!value.is_object()) {
        throw ContainerError(Kind::kBadEntry, "__metadata__ is not an object", 8);
      }
      for (const auto& [k, v] : value.items()) {
        if (!v.is_string()) {
          throw ContainerError(Kind::kBadEntry,
                               "__metadata__ value for '" + k + "' is not a string", 8);
        }
        metadata[k] = v.get<std::string>();
      }
      continue;
    }
    TensorEntry e = parse_entry(name, value);
    if (e.end > payload_size) {
      throw ContainerError(Kind::kOffsetOutOfRange,
                           "tensor '" + name + "' ends at payload byte " +
                               std::to_string(e.end) + " but the payload has " +
                               std::to_string(payload_size) + " bytes",
                           static_cast<std::int64_t>(payload_offset + e.begin));
    }
    index.emplace(name, std::move(e));
  }

  std::vector<std::pair<const std::string*, const TensorEntry*>> by_offset;
  for (const auto& [name, e] : index) {
    if (e.end > e.begin) by_offset.emplace_back(&name, &e);
  }
  std::sort(by_offset.begin(), by_offset.end(), [](const auto& a, const auto& b) {
    return a.second->begin < b.second->begin;
  });
  for (std::size_t i = 1; i < by_offset.size(); ++i) {
    if (by_offset[i].second->begin < by_offset[i - 1].second->end) {
      throw ContainerError(Kind::kOverlappingRanges,
                           "tensor '" + *by_offset[i].first + "' overlaps '" +
                               *by_offset[i - 1].first + "'",
                           static_cast<std::int64_t>(payload_offset + by_offset[i].second->begin));
    }
  }
  return Container(std::move(source), std::move(index), std::move(metadata), payload_offset);
}

const TensorEntry& Container::entry(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContainerError(Kind::kUnknownTensor,
                         "container has no tensor '" + std::string(name) + "'");
  }
  return it->second;
}

Tensor Container::read(std::string_view name) const {
  const TensorEntry& e = entry(name);
  const std::string raw = source_->read(payload_offset_ + e.begin, e.end - e.begin);
  const std::size_t n = shape_numel(e.shape);
  std::vector<float> values(n);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  switch (e.dtype) {
    case Dtype::kF32:
      for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | bytes[i * 4 + static_cast<std::size_t>(b)];
        values[i] = std::bit_cast<float>(bits);
      }
      break;
    case Dtype::kF16:
    case Dtype::kBF16:
      for (std::size_t i = 0; i < n; ++i) {
        const auto bits = static_cast<std::uint16_t>(bytes[i * 2] | (bytes[i * 2 + 1] << 8));
        values[i] = e.dtype == Dtype::kF16 ? f16_to_f32(bits) : bf16_to_f32(bits);
      }
      break;
  }
  return Tensor(e.shape, std::move(values));
}

ContainerTensor encode_tensor(std::string name, const Tensor& tensor, Dtype dtype) {
  ContainerTensor out{std::move(name), dtype, tensor.shape(), {}};
  out.bytes.reserve(tensor.numel() * dtype_size(dtype));
  for (float v : tensor.data()) {
    if (dtype == Dtype::kF32) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) out.bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    } else {
      const std::uint16_t bits = dtype == Dtype::kF16 ? f32_to_f16(v) : f32_to_bf16(v);
      out.bytes.push_back(static_cast<std::uint8_t>(bits & 0xFF));
      out.bytes.push_back(static_cast<std::uint8_t>(bits >> 8));
    }
  }
  return out;
}

std::string container_bytes(std::span<const ContainerTensor> tensors,
                            const std::map<std::string, std::string>& metadata) {
  std::vector<const ContainerTensor*> sorted;
  for (const auto& t : tensors) sorted.push_back(&t);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->name < b->name; });

  json header = json::object();
  if (!metadata.empty()) header["__metadata__"] = metadata;
  std::uint64_t offset = 0;
  for (const ContainerTensor* t : sorted) {
    header[t->name] = {{"dtype", dtype_name(t->dtype)},
                       {"shape", t->shape},
                       {"data_offsets", {offset, offset + t->bytes.size()}}};
    offset += t->bytes.size();
  }
  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::string out;
  out.reserve(8 + text.size() + offset);
  const std::uint64_t n = text.size();
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((n >> (8 * b)) & 0xFF));
  out += text;
  for (const ContainerTensor* t : sorted) {
    out.append(reinterpret_cast<const char*>(t->bytes.data()), t->bytes.size());
  }
  return out;
}

void write_container(const std::filesystem::path& path,
                     std::span<const ContainerTensor> tensors,
                     const std::map<std::string, std::string>& metadata) {
  const std::string bytes = container_bytes(tensors, metadata);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContainerError(Kind::kIo, "cannot write container '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContainerError(Kind::kIo, "short write to '" + path.string() + "'");
}

float f16_to_f32(std::uint16_t h) {
  const std::uint32_t sign = static_cast<std::uint32_t>(h & 0x8000) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1F;
  const std::uint32_t mant = h & 0x3FF;
  if (exp == 0) {
    const float mag = std::ldexp(static_cast<float>(mant), -24);
    return sign ? -mag : mag;
  }
  if (exp == 31) {
    return std::bit_cast<float>(sign | 0x7F800000U | (mant << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 112) << 23) | (mant << 13));
}

float bf16_to_f32(std::uint16_t bits) {
  return std::bit_cast<float>(static_cast<std::uint32_t>(bits) << 16);
}

std::uint16_t f32_to_f16(float value) {
  std::uint32_t f = std::bit_cast<std::uint32_t>(value);
  const auto sign = static_cast<std::uint16_t>((f >> 16) & 0x8000);
  f &= 0x7FFFFFFF;
  if (f >= 0x7F800000) return sign | (f > 0x7F800000 ? 0x7E00 : 0x7C00);
  if (f >= 0x477FF000) return sign | 0x7C00;  // rounds past 65504
  if (f < 0x38800000) {                       // below the smallest normal half
    const float scaled = std::bit_cast<float>(f) * 16777216.0F;
    return sign | static_cast<std::uint16_t>(std::nearbyint(scaled));
  }
  std::uint32_t h = ((((f >> 23) - 112) << 10) | ((f & 0x7FFFFF) >> 13));
  const std::uint32_t rem = f & 0x1FFF;
  if (rem > 0x1000 || (rem == 0x1000 && (h & 1))) ++h;
  return sign | static_cast<std::uint16_t>(h);
}

std::uint16_t f32_to_bf16(float value) {
  const std::uint32_t f = std::bit_cast<std::uint32_t>(value);
  if ((f & 0x7FFFFFFF) > 0x7F800000) return static_cast<std::uint16_t>((f >> 16) | 0x40);
  const std::uint32_t rounding = 0x7FFF + ((f >> 16) & 1);
  return static_cast<std::uint16_t>((f + rounding) >> 16);
}

}  // namespace lensforge
