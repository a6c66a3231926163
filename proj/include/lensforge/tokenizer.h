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

// Byte-level BPE tokenizer.
//
// Files: tokenizer.json {"vocab": {token: id}, "special_tokens": {token: id},
// "pretokenizer": "gpt2" | "none"} and an optional merges.txt with one
// "left right" pair per line in rank order (a leading "#version" line is
// skipped). Without merges the vocabulary degenerates to single bytes.

#ifndef LENSFORGE_TOKENIZER_H_
#define LENSFORGE_TOKENIZER_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lensforge/tensor.h"

namespace lensforge {

// Copies `bytes`, replacing each invalid UTF-8 sequence with U+FFFD.
std::string sanitize_utf8(std::string_view bytes);

class Tokenizer {
 public:
  // Throws TokenizerError for malformed files or inconsistent vocabularies.
  static Tokenizer load(const std::filesystem::path& tokenizer_json,
                        const std::optional<std::filesystem::path>& merges_txt);
  static Tokenizer from_strings(std::string_view tokenizer_json,
                                std::string_view merges_txt);
  // 256 single-byte tokens, id == byte value, no merges.
  static Tokenizer byte_level();

  std::size_t size() const { return id_to_token_.size(); }

  std::vector<TokenId> encode(std::string_view text) const;
  // Exact inverse of encode. Throws InputError for ids outside the vocab.
  std::string decode(std::span<const TokenId> ids) const;
  // Display text for one id: decoded bytes with invalid UTF-8 replaced by
  // U+FFFD. Ids beyond the vocabulary render as "<|id|>".
  std::string token_text(TokenId id) const;

  // Serialized forms, as written by the synthetic-model tool.
  std::string to_json() const;
  std::string merges_text() const;

 private:
  Tokenizer() = default;
  void finalize();
  void bpe(std::string_view piece, std::vector<TokenId>& out) const;
  void encode_plain(std::string_view text, std::vector<TokenId>& out) const;

  struct PairHash {
    std::size_t operator()(const std::pair<TokenId, TokenId>& p) const {
      return std::hash<long long>()((static_cast<long long>(p.first) << 32) ^ p.second);
    }
  };

  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<bool> is_special_;
  std::vector<std::pair<std::string, TokenId>> specials_;  // longest first
  std::vector<std::pair<std::string, std::string>> merges_;
  // (left id, right id) -> (rank, merged id)
  std::unordered_map<std::pair<TokenId, TokenId>, std::pair<int, TokenId>, PairHash> merge_ranks_;
  TokenId byte_ids_[256] = {};
  bool gpt2_pretokenize_ = true;
};

// Splits text into pre-tokens with the GPT-2 pattern
// 's|'t|'re|'ve|'m|'ll|'d| ?\p{L}+| ?\p{N}+| ?[^\s\p{L}\p{N}]+|\s+(?!\S)|\s+
std::vector<std::string_view> gpt2_pretokenize(std::string_view text);

}  // namespace lensforge

#endif  // LENSFORGE_TOKENIZER_H_
