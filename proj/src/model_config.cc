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

#include "lensforge/model_config.h"

#include <cstdio>
#include <cstdlib>
#include <string>

#include "lensforge/errors.h"

namespace lensforge {

std::string_view family_name(Family family) {
  return family == Family::kGpt2 ? "gpt2" : "llama";
}

Family parse_family(std::string_view name) {
  if (name == "gpt2") return Family::kGpt2;
  if (name == "llama" || name == "qwen2") return Family::kLlama;
  throw ConfigError("unknown model family '" + std::string(name) +
                    "' (expected gpt2 or llama)");
}

void ModelConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (n_layers < 1) fail("n_layers must be >= 1");
  if (vocab_size < 2) fail("vocab_size must be >= 2");
  if (d_model == 0 || n_heads == 0) fail("d_model and n_heads must be positive");
  if (max_seq_len == 0) fail("max_seq_len must be positive");
  if (d_ff == 0) fail("d_ff must be positive");
  if (n_heads * d_head != d_model) {
    fail("n_heads (" + std::to_string(n_heads) + ") x d_head (" +
         std::to_string(d_head) + ") != d_model (" + std::to_string(d_model) +
         ")");
  }
  if (n_kv_heads == 0 || n_heads % n_kv_heads != 0) {
    fail("n_heads (" + std::to_string(n_heads) +
         ") is not a multiple of n_kv_heads (" + std::to_string(n_kv_heads) +
         ")");
  }
  if (family == Family::kGpt2 && n_kv_heads != n_heads) {
    fail("gpt2 family requires n_kv_heads == n_heads");
  }
  if (family == Family::kLlama && d_head % 2 != 0) {
    fail("rotary embedding needs an even d_head, got " + std::to_string(d_head));
  }
  if (!(norm_eps >= 0.0F)) fail("norm_eps must be non-negative");
  if (!(rope_theta > 0.0)) fail("rope_theta must be positive");
}

ModelConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config.json must be a JSON object");
  const auto count = [&](const char* key) -> std::size_t {
    if (!j.contains(key)) throw ConfigError(std::string("config.json missing '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(std::string("config.json '") + key +
                        "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  ModelConfig c;
  if (!j.contains("family") || !j.at("family").is_string()) {
    throw ConfigError("config.json missing string 'family'");
  }
  c.family = parse_family(j.at("family").get<std::string>());
  c.n_layers = count("n_layers");
  c.d_model = count("d_model");
  c.n_heads = count("n_heads");
  c.n_kv_heads = j.contains("n_kv_heads") && !j.at("n_kv_heads").is_null()
                     ? count("n_kv_heads")
                     : c.n_heads;
  c.d_ff = count("d_ff");
  c.vocab_size = count("vocab_size");
  c.max_seq_len = count("max_seq_len");
  if (c.n_heads == 0) throw ConfigError("n_heads must be positive");
  if (c.d_model % c.n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(c.d_model) +
                      ") is not divisible by n_heads (" +
                      std::to_string(c.n_heads) + ")");
  }
  c.d_head = c.d_model / c.n_heads;
  const auto number = [&](const char* key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_number()) {
      throw ConfigError(std::string("config.json '") + key + "' must be a number");
    }
    return j.at(key).get<double>();
  };
  c.rope_theta = number("rope_theta", 10000.0);
  c.norm_eps = static_cast<float>(number("norm_eps", 1e-5));
  if (j.contains("tie_word_embeddings")) {
    if (!j.at("tie_word_embeddings").is_boolean()) {
      throw ConfigError("config.json 'tie_word_embeddings' must be a boolean");
    }
    c.tie_word_embeddings = j.at("tie_word_embeddings").get<bool>();
  }
  c.validate();
  return c;
}

namespace {

// The shortest decimal that reads back as `v`, so 1e-5f is written as 1e-05.
double shortest_decimal(float v) {
  char buf[32];
  for (int precision = 1; precision <= 9; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, static_cast<double>(v));
    if (std::strtof(buf, nullptr) == v) break;
  }
  return std::strtod(buf, nullptr);
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return {
      {"family", family_name(c.family)},
      {"n_layers", c.n_layers},
      {"d_model", c.d_model},
      {"n_heads", c.n_heads},
      {"n_kv_heads", c.n_kv_heads},
      {"d_ff", c.d_ff},
      {"vocab_size", c.vocab_size},
      {"max_seq_len", c.max_seq_len},
      {"rope_theta", c.rope_theta},
      {"norm_eps", shortest_decimal(c.norm_eps)},
      {"tie_word_embeddings", c.tie_word_embeddings},
  };
}

}  // namespace lensforge
