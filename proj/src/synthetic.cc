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


#include "lensforge/synthetic.h"

#include <cmath>
#include <string>

namespace lensforge {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

Tensor synthetic_tensor(const Shape& shape, std::uint64_t seed, std::string_view name,
                        float mean, float stddev) {
  const std::uint64_t key = splitmix64(seed ^ fnv1a(name));
  const std::size_t n = shape_numel(shape);
  // A uniform variable on [-a, a) has standard deviation a / sqrt(3).
  const float half_width = stddev * std::sqrt(3.0F);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto bits = static_cast<std::uint32_t>(splitmix64(key + i) >> 40);  // 24 bits
    const float u = static_cast<float>(bits) * (1.0F / 16777216.0F);
    data[i] = mean + (2.0F * u - 1.0F) * half_width;
  }
  return Tensor(shape, std::move(data));
}

Weights synthetic_weights(const ModelConfig& c, std::uint64_t seed, const SyntheticScales& s) {
  c.validate();
  const bool gpt2 = c.family == Family::kGpt2;
  const std::size_t d = c.d_model;
  const std::size_t kv = c.kv_dim();
  const auto gen = [&](const std::string& name, const Shape& shape, float mean, float stddev) {
    return synthetic_tensor(shape, seed, name, mean, stddev);
  };
  Weights w;
  w.token_embedding = gen("token_embedding", {c.vocab_size, d}, 0.0F, s.embedding);
  if (gpt2) w.position_embedding = gen("position_embedding", {c.max_seq_len, d}, 0.0F, s.position);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layers." + std::to_string(l) + ".";
    LayerWeights lw;
    lw.attn_norm_gain = gen(p + "attn_norm_gain", {d}, 1.0F, s.gain_jitter);
    lw.wq = gen(p + "wq", {d, d}, 0.0F, s.attn_in);
    lw.wk = gen(p + "wk", {kv, d}, 0.0F, s.attn_in);
    lw.wv = gen(p + "wv", {kv, d}, 0.0F, s.attn_in);
    lw.wo = gen(p + "wo", {d, d}, 0.0F, s.attn_out);
    lw.mlp_norm_gain = gen(p + "mlp_norm_gain", {d}, 1.0F, s.gain_jitter);
    lw.w_up = gen(p + "w_up", {c.d_ff, d}, 0.0F, s.mlp_in);
    lw.w_down = gen(p + "w_down", {d, c.d_ff}, 0.0F, s.mlp_out);
    if (gpt2) {
      lw.attn_norm_bias = gen(p + "attn_norm_bias", {d}, 0.0F, s.bias);
      lw.bo = gen(p + "bo", {d}, 0.0F, s.bias);
      lw.mlp_norm_bias = gen(p + "mlp_norm_bias", {d}, 0.0F, s.bias);
      lw.b_up = gen(p + "b_up", {c.d_ff}, 0.0F, s.bias);
      lw.b_down = gen(p + "b_down", {d}, 0.0F, s.bias);
    } else {
      lw.w_gate = gen(p + "w_gate", {c.d_ff, d}, 0.0F, s.mlp_in);
    }
    if (gpt2 || s.qkv_bias) {
      lw.bq = gen(p + "bq", {d}, 0.0F, s.bias);
      lw.bk = gen(p + "bk", {kv}, 0.0F, s.bias);
      lw.bv = gen(p + "bv", {kv}, 0.0F, s.bias);
    }
    w.layers.push_back(std::move(lw));
  }
  w.final_norm_gain = gen("final_norm_gain", {d}, 1.0F, s.gain_jitter);
  if (gpt2) w.final_norm_bias = gen("final_norm_bias", {d}, 0.0F, s.bias);
  w.tied = c.tie_word_embeddings;
  if (!w.tied) w.untied_lm_head = gen("lm_head", {c.vocab_size, d}, 0.0F, s.embedding);
  validate_weights(c, w);
  return w;
}

}  // namespace lensforge
