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

#include "lensforge/tokenizer.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lensforge/errors.h"

namespace lensforge {
namespace {

using nlohmann::json;
using Kind = TokenizerErrorKind;

struct CodepointRange {
  char32_t first;
  char32_t last;
};

#include "unicode_tables.inc"

template <std::size_t N>
bool in_ranges(const CodepointRange (&ranges)[N], char32_t cp) {
  const auto it = std::upper_bound(
      std::begin(ranges), std::end(ranges), cp,
      [](char32_t c, const CodepointRange& r) { return c < r.first; });
  return it != std::begin(ranges) && cp <= std::prev(it)->last;
}

// Sentinel for bytes that do not start a valid UTF-8 sequence; classified
// as neither letter, number nor space.
constexpr char32_t kInvalid = 0xFFFFFFFF;

bool is_letter(char32_t cp) { return cp != kInvalid && in_ranges(kLetterRanges, cp); }
bool is_number(char32_t cp) { return cp != kInvalid && in_ranges(kNumberRanges, cp); }
bool is_space(char32_t cp) { return cp != kInvalid && in_ranges(kSpaceRanges, cp); }

// Decodes the code point starting at text[i]; returns its byte length.
std::size_t next_codepoint(std::string_view text, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t value = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, value = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, value = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, value = b0 & 0x07, min = 0x10000;
  } else {
    cp = kInvalid;
    return 1;
  }
  if (i + len > text.size()) {
    cp = kInvalid;
    return 1;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) {
      cp = kInvalid;
      return 1;
    }
    value = (value << 6) | (b & 0x3F);
  }
  if (value < min || value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF)) {
    cp = kInvalid;
    return 1;
  }
  cp = value;
  return len;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// GPT-2 reversible byte <-> printable code point mapping.
struct ByteMap {
  std::array<char32_t, 256> to_cp{};
  std::array<std::string, 256> to_symbol;
  std::map<char32_t, unsigned char> from_cp;

  ByteMap() {
    std::array<bool, 256> direct{};
    for (int b = '!'; b <= '~'; ++b) direct[b] = true;
    for (int b = 0xA1; b <= 0xAC; ++b) direct[b] = true;
    for (int b = 0xAE; b <= 0xFF; ++b) direct[b] = true;
    char32_t extra = 0;
    for (int b = 0; b < 256; ++b) {
      to_cp[b] = direct[b] ? static_cast<char32_t>(b) : 256 + extra++;
      append_utf8(to_symbol[b], to_cp[b]);
      from_cp[to_cp[b]] = static_cast<unsigned char>(b);
    }
  }
};

const ByteMap& byte_map() {
  static const ByteMap map;
  return map;
}


std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TokenizerError(Kind::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TokenId to_id(const json& v, const std::string& token) {
  if (!v.is_number_unsigned() ||
      v.get<std::uint64_t>() > static_cast<std::uint64_t>(std::numeric_limits<TokenId>::max())) {
    throw TokenizerError(Kind::kBadVocab,
                         "id of token '" + sanitize_utf8(token) + "' is not a valid id");
  }
  return static_cast<TokenId>(v.get<std::uint64_t>());
}

}  // namespace

std::string sanitize_utf8(std::string_view bytes) {
  std::string out;
  for (std::size_t i = 0; i < bytes.size();) {
    char32_t cp = 0;
    const std::size_t len = next_codepoint(bytes, i, cp);
    if (cp == kInvalid) {
      append_utf8(out, 0xFFFD);
    } else {
      out.append(bytes.substr(i, len));
    }
    i += len;
  }
  return out;
}

std::vector<std::string_view> gpt2_pretokenize(std::string_view text) {
  std::vector<std::string_view> pieces;
  const std::size_t n = text.size();
  const auto cp_at = [&](std::size_t i, char32_t& cp) { return next_codepoint(text, i, cp); };
  // Consumes a run of code points satisfying pred starting at i.
  const auto run = [&](std::size_t i, auto pred) {
    while (i < n) {
      char32_t cp = 0;
      const std::size_t len = cp_at(i, cp);
      if (!pred(cp)) break;
      i += len;
    }
    return i;
  };
  const auto is_other = [](char32_t cp) {
    return !is_space(cp) && !is_letter(cp) && !is_number(cp);
  };

  std::size_t i = 0;
  while (i < n) {
    char32_t c0 = 0;
    const std::size_t len0 = cp_at(i, c0);
    std::size_t end = i;

    if (c0 == '\'') {
      for (std::string_view suffix : {"s", "t", "re", "ve", "m", "ll", "d"}) {
        if (text.substr(i + 1, suffix.size()) == suffix) {
          end = i + 1 + suffix.size();
          break;
        }
      }
    }
    if (end == i) {
      const std::size_t j = c0 == ' ' ? i + 1 : i;
      char32_t c1 = kInvalid;
      if (j < n) cp_at(j, c1);
      if (j < n && is_letter(c1)) {
        end = run(j, is_letter);
      } else if (j < n && is_number(c1)) {
        end = run(j, is_number);
      } else if (j < n && is_other(c1)) {
        end = run(j, is_other);
      }
    }
    if (end == i) {
      // Whitespace: leave the last space of a run for the next word.
      const std::size_t ws_end = run(i, is_space);
      if (ws_end == n) {
        end = n;
      } else {
        std::size_t last = i;
        for (std::size_t k = i; k < ws_end;) {
          char32_t cp = 0;
          last = k;
          k += cp_at(k, cp);
        }
        end = last > i ? last : ws_end;
      }
      if (end == i) end = i + len0;
    }
    pieces.push_back(text.substr(i, end - i));
    i = end;
  }
  return pieces;
}

Tokenizer Tokenizer::byte_level() {
  Tokenizer t;
  for (int b = 0; b < 256; ++b) t.id_to_token_.push_back(byte_map().to_symbol[b]);
  t.is_special_.assign(256, false);
  t.finalize();
  return t;
}

Tokenizer Tokenizer::load(const std::filesystem::path& tokenizer_json,
                          const std::optional<std::filesystem::path>& merges_txt) {
  const std::string text = read_file(tokenizer_json);
  const std::string merges = merges_txt ? read_file(*merges_txt) : std::string();
  return from_strings(text, merges);
}

Tokenizer Tokenizer::from_strings(std::string_view tokenizer_json,
                                  std::string_view merges_txt) {
  json j;
  try {
    j = json::parse(tokenizer_json);
  } catch (const json::parse_error& e) {
    throw TokenizerError(Kind::kMalformedJson,
                         std::string("malformed tokenizer JSON: ") + e.what(),
                         static_cast<std::int64_t>(e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!j.is_object() || !j.contains("vocab") || !j.at("vocab").is_object()) {
    throw TokenizerError(Kind::kBadVocab, "tokenizer JSON needs an object 'vocab'");
  }

  std::map<TokenId, std::string> by_id;
  std::map<std::string, TokenId> specials;
  const auto add = [&](const std::string& token, TokenId id) {
    const auto [it, inserted] = by_id.emplace(id, token);
    if (!inserted && it->second != token) {
      throw TokenizerError(Kind::kBadVocab, "id " + std::to_string(id) +
                                                " assigned to both '" + sanitize_utf8(it->second) +
                                                "' and '" + sanitize_utf8(token) + "'");
    }
  };
  for (const auto& [token, v] : j.at("vocab").items()) add(token, to_id(v, token));
  if (j.contains("special_tokens")) {
    const json& s = j.at("special_tokens");
    if (!s.is_object()) {
      throw TokenizerError(Kind::kBadVocab, "'special_tokens' must map token to id");
    }
    for (const auto& [token, v] : s.items()) {
      const TokenId id = to_id(v, token);
      if (const auto it = j.at("vocab").find(token);
          it != j.at("vocab").end() && to_id(*it, token) != id) {
        throw TokenizerError(Kind::kBadVocab, "special token '" + sanitize_utf8(token) +
                                                  "' has a different id in 'vocab'");
      }
      add(token, id);
      specials[token] = id;
    }
  }
  if (by_id.empty()) throw TokenizerError(Kind::kBadVocab, "vocabulary is empty");
  if (static_cast<std::size_t>(by_id.rbegin()->first) + 1 != by_id.size()) {
    throw TokenizerError(Kind::kNonDenseIds,
                         "token ids are not dense: " + std::to_string(by_id.size()) +
                             " tokens but max id " + std::to_string(by_id.rbegin()->first));
  }
  std::map<std::string, TokenId> seen;
  Tokenizer t;
  for (auto& [id, token] : by_id) {
    if (!seen.emplace(token, id).second) {
      throw TokenizerError(Kind::kBadVocab,
                           "token '" + sanitize_utf8(token) + "' appears with two ids");
    }
    t.id_to_token_.push_back(token);
    t.is_special_.push_back(specials.contains(token));
  }
  if (j.contains("pretokenizer")) {
    const json& p = j.at("pretokenizer");
    if (!p.is_string() || (p != "gpt2" && p != "none")) {
      throw TokenizerError(Kind::kBadVocab, "'pretokenizer' must be \"gpt2\" or \"none\"");
    }
    t.gpt2_pretokenize_ = p == "gpt2";
  }

  std::size_t offset = 0;
  std::size_t line_no = 0;
  while (offset < merges_txt.size()) {
    std::size_t nl = merges_txt.find('\n', offset);
    if (nl == std::string_view::npos) nl = merges_txt.size();
    std::string_view line = merges_txt.substr(offset, nl - offset);
    const std::size_t line_offset = offset;
    offset = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || (line_no == 1 && line.starts_with("#version"))) continue;
    const std::size_t sp = line.find(' ');
    if (sp == std::string_view::npos || sp == 0 || sp + 1 == line.size() ||
        line.find(' ', sp + 1) != std::string_view::npos) {
      throw TokenizerError(Kind::kBadMerge,
                           "merges line " + std::to_string(line_no) + " is not a 'left right' pair",
                           static_cast<std::int64_t>(line_offset));
    }
    t.merges_.emplace_back(std::string(line.substr(0, sp)), std::string(line.substr(sp + 1)));
  }

  t.finalize();
  return t;
}

void Tokenizer::finalize() {
  token_to_id_.clear();
  for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
    token_to_id_.emplace(id_to_token_[id], static_cast<TokenId>(id));
  }
  const ByteMap& bm = byte_map();
  for (int b = 0; b < 256; ++b) {
    const auto it = token_to_id_.find(bm.to_symbol[b]);
    if (it == token_to_id_.end() || is_special_[static_cast<std::size_t>(it->second)]) {
      throw TokenizerError(Kind::kBadVocab,
                           "vocabulary lacks the symbol for byte " + std::to_string(b));
    }
    byte_ids_[b] = it->second;
  }
  specials_.clear();
  for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
    if (is_special_[id] && !id_to_token_[id].empty()) {
      specials_.emplace_back(id_to_token_[id], static_cast<TokenId>(id));
    }
  }
  std::stable_sort(specials_.begin(), specials_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
  merge_ranks_.clear();
  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto& [left, right] = merges_[rank];
    const auto l = token_to_id_.find(left);
    const auto r = token_to_id_.find(right);
    const auto m = token_to_id_.find(left + right);
    if (l == token_to_id_.end() || r == token_to_id_.end() || m == token_to_id_.end()) {
      throw TokenizerError(Kind::kBadMerge, "merge " + std::to_string(rank) + " ('" +
                                                sanitize_utf8(left) + "' '" +
                                                sanitize_utf8(right) +
                                                "') refers to tokens missing from the vocabulary");
    }
    merge_ranks_.try_emplace({l->second, r->second}, static_cast<int>(rank), m->second);
  }
}

void Tokenizer::bpe(std::string_view piece, std::vector<TokenId>& out) const {
  std::vector<TokenId> syms;
  syms.reserve(piece.size());
  for (char c : piece) syms.push_back(byte_ids_[static_cast<unsigned char>(c)]);
  if (!merge_ranks_.empty()) {
    while (syms.size() > 1) {
      int best_rank = std::numeric_limits<int>::max();
      std::pair<TokenId, TokenId> best{};
      TokenId merged = 0;
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
        const auto it = merge_ranks_.find({syms[i], syms[i + 1]});
        if (it != merge_ranks_.end() && it->second.first < best_rank) {
          best_rank = it->second.first;
          best = {syms[i], syms[i + 1]};
          merged = it->second.second;
        }
      }
      if (best_rank == std::numeric_limits<int>::max()) break;
      std::vector<TokenId> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == best.first && syms[i + 1] == best.second) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(syms[i++]);
        }
      }
      syms.swap(next);
    }
  }
  out.insert(out.end(), syms.begin(), syms.end());
}

void Tokenizer::encode_plain(std::string_view text, std::vector<TokenId>& out) const {
  if (text.empty()) return;
  if (!gpt2_pretokenize_) {
    bpe(text, out);
    return;
  }
  for (std::string_view piece : gpt2_pretokenize(text)) bpe(piece, out);
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> out;
  while (!text.empty()) {
    std::size_t best_pos = std::string_view::npos;
    const std::pair<std::string, TokenId>* best = nullptr;
    for (const auto& special : specials_) {
      const std::size_t pos = text.find(special.first);
      if (pos != std::string_view::npos && pos < best_pos) {
        best_pos = pos;
        best = &special;
      }
    }
    if (best == nullptr) {
      encode_plain(text, out);
      break;
    }
    encode_plain(text.substr(0, best_pos), out);
    out.push_back(best->second);
    text.remove_prefix(best_pos + best->first.size());
  }
  return out;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  const ByteMap& bm = byte_map();
  std::string out;
  for (TokenId id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(id_to_token_.size()));
    }
    const std::string& token = id_to_token_[static_cast<std::size_t>(id)];
    if (is_special_[static_cast<std::size_t>(id)]) {
      out += token;
      continue;
    }
    for (std::size_t i = 0; i < token.size();) {
      char32_t cp = 0;
      const std::size_t len = next_codepoint(token, i, cp);
      const auto it = bm.from_cp.find(cp);
      if (it != bm.from_cp.end()) {
        out.push_back(static_cast<char>(it->second));
      } else {
        out.append(token, i, len);
      }
      i += len;
    }
  }
  return out;
}

std::string Tokenizer::token_text(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    return "<|" + std::to_string(id) + "|>";
  }
  const TokenId one[1] = {id};
  return sanitize_utf8(decode(one));
}

std::string Tokenizer::to_json() const {
  json vocab = json::object();
  json specials = json::object();
  for (std::size_t id = 0; id < id_to_token_.size(); ++id) {
    (is_special_[id] ? specials : vocab)[id_to_token_[id]] = id;
  }
  json j = {{"vocab", vocab},
            {"special_tokens", specials},
            {"pretokenizer", gpt2_pretokenize_ ? "gpt2" : "none"}};
  return j.dump();
}

std::string Tokenizer::merges_text() const {
  std::string out;
  for (const auto& [l, r] : merges_) out += l + " " + r + "\n";
  return out;
}

}  // namespace lensforge
