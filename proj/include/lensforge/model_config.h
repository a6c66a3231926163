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

#ifndef LENSFORGE_MODEL_CONFIG_H_
#define LENSFORGE_MODEL_CONFIG_H_

#include <cstddef>
#include <string>
#include <string_view>

#include <json.hpp>

namespace lensforge {

// kGpt2: learned positions, LayerNorm, GELU MLP, biased projections.
// kLlama: RoPE, RMSNorm, SwiGLU MLP, grouped-query attention. Qwen-style
// checkpoints are kLlama plus optional q/k/v biases.
enum class Family { kGpt2, kLlama };

std::string_view family_name(Family family);
Family parse_family(std::string_view name);

struct ModelConfig {
  Family family = Family::kGpt2;
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t n_kv_heads = 0;
  std::size_t d_head = 0;
  std::size_t d_ff = 0;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 0;
  double rope_theta = 10000.0;
  float norm_eps = 1e-5F;
  bool tie_word_embeddings = false;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  std::size_t kv_dim() const { return n_kv_heads * d_head; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// config.json schema: {family, n_layers, d_model, n_heads, n_kv_heads, d_ff,
// vocab_size, max_seq_len, rope_theta, norm_eps, tie_word_embeddings}.
// d_head is derived as d_model / n_heads. The result is validated.
ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& config);

}  // namespace lensforge

#endif  // LENSFORGE_MODEL_CONFIG_H_
