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

#include <cmath>
#include <cstring>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "lensforge/errors.h"
#include "test_support.h"

namespace lensforge {
namespace {

std::string u64_le(std::uint64_t v) {
  std::string out(8, '\0');
  for (int i = 0; i < 8; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  return out;
}

std::string f32_le(std::initializer_list<float> values) {
  std::string out;
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  return out;
}

std::string assemble(const std::string& header, const std::string& payload) {
  return u64_le(header.size()) + header + payload;
}

ContainerErrorKind kind_of(const std::string& bytes) {
  try {
    const Container c = Container::from_bytes(bytes);
    for (const auto& [name, entry] : c.index()) (void)c.read(name);
  } catch (const ContainerError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ContainerErrorKind::kIo;
}

TEST(ContainerTest, HandAssembled2x2F32) {
  const std::string header =
      R"({"w":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}})";
  const Container c = Container::from_bytes(assemble(header, f32_le({1, 2, 3, 4})));
  ASSERT_EQ(c.index().size(), 1u);
  EXPECT_EQ(c.entry("w"), (TensorEntry{Dtype::kF32, {2, 2}, 0, 16}));
  EXPECT_EQ(c.read("w"), Tensor::matrix({{1, 2}, {3, 4}}));
}

TEST(ContainerTest, WriterReproducesHandAssembledLayout) {
  const Tensor w = Tensor::matrix({{1, 2}, {3, 4}});
  const std::vector<ContainerTensor> tensors = {encode_tensor("w", w)};
  const std::string bytes = container_bytes(tensors);
  ASSERT_EQ(bytes.size() % 8, 0u);
  const Container c = Container::from_bytes(bytes);
  EXPECT_EQ(c.read("w"), w);
  EXPECT_EQ(bytes.substr(bytes.size() - 16), f32_le({1, 2, 3, 4}));
}

TEST(ContainerTest, RoundTripPreservesIndexAndMetadata) {
  std::mt19937 rng(1);
  const std::vector<ContainerTensor> tensors = {
      encode_tensor("b.bias", testing::random_tensor({7}, rng)),
      encode_tensor("a.weight", testing::random_tensor({3, 5}, rng)),
      encode_tensor("c.half", testing::random_tensor({4, 2}, rng), Dtype::kF16),
      encode_tensor("d.brain", testing::random_tensor({2, 3, 2}, rng), Dtype::kBF16),
      encode_tensor("e.empty", Tensor({0, 4})),
  };
  const std::map<std::string, std::string> meta = {{"format", "pt"}};
  const Container first = Container::from_bytes(container_bytes(tensors, meta));
  EXPECT_EQ(first.metadata(), meta);
  std::vector<ContainerTensor> again;
  for (const auto& [name, entry] : first.index()) {
    again.push_back(encode_tensor(name, first.read(name), entry.dtype));
  }
  const Container second = Container::from_bytes(container_bytes(again, meta));
  EXPECT_EQ(second.index(), first.index());
  for (const auto& [name, entry] : first.index()) {
    EXPECT_EQ(second.read(name), first.read(name)) << name;
    EXPECT_EQ(first.read(name).numel(), shape_numel(entry.shape));
  }
  EXPECT_EQ(first.read("a.weight"), Container::from_bytes(container_bytes(tensors)).read("a.weight"));
}

TEST(ContainerTest, FileRoundTrip) {
  testing::TempDir dir;
  const Tensor t = Tensor::vector({0.5F, -2.0F, 8.0F});
  const std::vector<ContainerTensor> tensors = {encode_tensor("t", t)};
  write_container(dir.path() / "x.tensors", tensors);
  const Container c = Container::open(dir.path() / "x.tensors");
  EXPECT_EQ(c.read("t"), t);
  EXPECT_THROW(Container::open(dir.path() / "missing.tensors"), ContainerError);
}

TEST(ContainerTest, HalfPrecisionConversions) {
  EXPECT_EQ(f16_to_f32(0x3C00), 1.0F);
  EXPECT_EQ(f16_to_f32(0xC000), -2.0F);
  EXPECT_EQ(f16_to_f32(0x7BFF), 65504.0F);
  EXPECT_EQ(f16_to_f32(0x0001), std::ldexp(1.0F, -24));  // smallest subnormal
  EXPECT_TRUE(std::isinf(f16_to_f32(0x7C00)));
  EXPECT_TRUE(std::isnan(f16_to_f32(0x7E00)));
  EXPECT_EQ(bf16_to_f32(0x3F80), 1.0F);
  EXPECT_EQ(bf16_to_f32(0xC040), -3.0F);
  EXPECT_EQ(f32_to_f16(1.0F), 0x3C00);
  EXPECT_EQ(f32_to_bf16(1.0F), 0x3F80);
  // Every finite half round-trips exactly through f32.
  for (std::uint32_t bits = 0; bits < 0x10000; ++bits) {
    const float f = f16_to_f32(static_cast<std::uint16_t>(bits));
    if (std::isfinite(f)) {
      ASSERT_EQ(f32_to_f16(f), bits) << bits;
    }
  }
  for (std::uint32_t bits = 0; bits < 0x10000; ++bits) {
    const float f = bf16_to_f32(static_cast<std::uint16_t>(bits));
    if (std::isfinite(f)) {
      ASSERT_EQ(f32_to_bf16(f), bits) << bits;
    }
  }
}

TEST(ContainerTest, HalfPayloadsWidenOnRead) {
  std::string payload;
  for (std::uint16_t bits : {0x3C00, 0xC000}) {
    payload.push_back(static_cast<char>(bits & 0xFF));
    payload.push_back(static_cast<char>(bits >> 8));
  }
  const std::string header =
      R"({"h":{"dtype":"F16","shape":[1],"data_offsets":[0,2]},)"
      R"("b":{"dtype":"BF16","shape":[1],"data_offsets":[2,4]}})";
  const Container c = Container::from_bytes(assemble(header, payload));
  EXPECT_EQ(c.read("h"), Tensor::vector({1.0F}));
  EXPECT_EQ(c.read("b"), Tensor::vector({bf16_to_f32(0xC000)}));
}

TEST(ContainerTest, TypedErrors) {
  const std::string ok_entry = R"("w":{"dtype":"F32","shape":[2],"data_offsets":[0,8]})";
  const std::string payload = f32_le({1, 2});
  EXPECT_EQ(kind_of(""), ContainerErrorKind::kTruncated);
  EXPECT_EQ(kind_of("abc"), ContainerErrorKind::kTruncated);
  EXPECT_EQ(kind_of(u64_le(1000) + "{}"), ContainerErrorKind::kTruncated);
  EXPECT_EQ(kind_of(assemble("{\"w\":", payload)), ContainerErrorKind::kMalformedHeader);
  EXPECT_EQ(kind_of(assemble("[]", payload)), ContainerErrorKind::kMalformedHeader);
  EXPECT_EQ(kind_of(assemble(R"({"w":{"dtype":"I8","shape":[2],"data_offsets":[0,2]}})", payload)),
            ContainerErrorKind::kUnsupportedDtype);
  EXPECT_EQ(kind_of(assemble(R"({"w":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}})", payload)),
            ContainerErrorKind::kOffsetOutOfRange);
  EXPECT_EQ(kind_of(assemble(R"({"w":{"dtype":"F32","shape":[3],"data_offsets":[0,8]}})", payload)),
            ContainerErrorKind::kSizeMismatch);
  EXPECT_EQ(kind_of(assemble("{" + ok_entry +
                                 R"(,"v":{"dtype":"F32","shape":[1],"data_offsets":[4,8]}})",
                             payload)),
            ContainerErrorKind::kOverlappingRanges);
  EXPECT_EQ(kind_of(assemble(R"({"w":{"dtype":"F32","shape":[2]}})", payload)),
            ContainerErrorKind::kBadEntry);
  EXPECT_EQ(kind_of(assemble(R"({"w":{"dtype":"F32","shape":[-2],"data_offsets":[0,8]}})", payload)),
            ContainerErrorKind::kBadEntry);
  EXPECT_EQ(kind_of(assemble(R"({"__metadata__":{"a":1}})", payload)),
            ContainerErrorKind::kBadEntry);
  const Container c = Container::from_bytes(assemble("{" + ok_entry + "}", payload));
  try {
    (void)c.read("missing");
    FAIL();
  } catch (const ContainerError& e) {
    EXPECT_EQ(e.kind(), ContainerErrorKind::kUnknownTensor);
  }
}

TEST(ContainerTest, ParseErrorsCarryBytePositions) {
  try {
    (void)Container::from_bytes(assemble(R"({"w": tru})", ""));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.byte_position(), 8);
    EXPECT_LE(e.byte_position(), 8 + 10);
  }
}

}  // namespace
}  // namespace lensforge
