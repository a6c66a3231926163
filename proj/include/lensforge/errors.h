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

#ifndef LENSFORGE_ERRORS_H_
#define LENSFORGE_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lensforge {

// Root of every error the library throws. Callers that only need a message
// catch this; callers that map errors to exit codes or HTTP statuses catch
// the concrete subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A scalar argument is outside its documented domain (k > vocab, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Sequence does not fit in the model's context window.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Bad user input: unknown token id, empty prompt.
class InputError : public Error {
 public:
  using Error::Error;
};

// ModelConfig violates one of its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Weight tensors missing or shaped inconsistently with the config.
class WeightsError : public Error {
 public:
  using Error::Error;
};

// CaptureSpec refers to layers, positions or K values that do not exist.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Heatmap requested over cells the trace has no lens data for.
class HeatmapError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes in an on-disk artifact. `byte_position` is the absolute
// file offset closest to the defect, or -1 when no single offset applies.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::int64_t byte_position)
      : Error(what), byte_position_(byte_position) {}

  std::int64_t byte_position() const { return byte_position_; }

 private:
  std::int64_t byte_position_;
};

enum class ContainerErrorKind {
  kIo,
  kTruncated,
  kMalformedHeader,
  kBadEntry,
  kUnsupportedDtype,
  kOffsetOutOfRange,
  kOverlappingRanges,
  kSizeMismatch,
  kUnknownTensor,
};

class ContainerError : public ParseError {
 public:
  ContainerError(ContainerErrorKind kind, const std::string& what,
                 std::int64_t byte_position = -1)
      : ParseError(what, byte_position), kind_(kind) {}

  ContainerErrorKind kind() const { return kind_; }

 private:
  ContainerErrorKind kind_;
};

enum class TokenizerErrorKind {
  kIo,
  kMalformedJson,
  kBadVocab,
  kNonDenseIds,
  kBadMerge,
};

class TokenizerError : public ParseError {
 public:
  TokenizerError(TokenizerErrorKind kind, const std::string& what,
                 std::int64_t byte_position = -1)
      : ParseError(what, byte_position), kind_(kind) {}

  TokenizerErrorKind kind() const { return kind_; }

 private:
  TokenizerErrorKind kind_;
};

}  // namespace lensforge

#endif  // LENSFORGE_ERRORS_H_
