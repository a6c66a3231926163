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

#include "lensforge/model.h"

#include <cmath>
#include <string>
#include <utility>

#include "lensforge/errors.h"
#include "lensforge/ops.h"

namespace lensforge {
namespace {

const Tensor* opt(const std::optional<Tensor>& t) {
  return t.has_value() ? &*t : nullptr;
}

Tensor family_norm(const Tensor& h, const Tensor& gain,
                   const std::optional<Tensor>& bias, const ModelConfig& config) {
  if (config.family == Family::kGpt2) {
    if (!bias) throw WeightsError("layer norm bias missing for gpt2 family");
    return layer_norm_rows(h, gain, *bias, config.norm_eps);
  }
  return rms_norm_rows(h, gain, config.norm_eps);
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("residual add of " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  }
  Tensor out(a.shape());
  const auto x = a.data();
  const auto y = b.data();
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
  return out;
}

// cos/sin for every (position, pair) of one attention call.
struct RopeTable {
  std::size_t half = 0;
  std::vector<float> cos, sin;
};

double rope_inv_freq(std::size_t pair, std::size_t d_head, double theta) {
  return std::pow(theta, -2.0 * static_cast<double>(pair) / static_cast<double>(d_head));
}

RopeTable make_rope_table(std::size_t t, std::size_t position_base,
                          std::size_t d_head, double theta) {
  RopeTable table;
  table.half = d_head / 2;
  table.cos.resize(t * table.half);
  table.sin.resize(t * table.half);
  for (std::size_t p = 0; p < t; ++p) {
    for (std::size_t i = 0; i < table.half; ++i) {
      const double angle =
          static_cast<double>(position_base + p) * rope_inv_freq(i, d_head, theta);
      table.cos[p * table.half + i] = static_cast<float>(std::cos(angle));
      table.sin[p * table.half + i] = static_cast<float>(std::sin(angle));
    }
  }
  return table;
}

void rotate(std::span<float> head, const float* cos, const float* sin) {
  for (std::size_t i = 0; 2 * i + 1 < head.size(); ++i) {
    const float x0 = head[2 * i];
    const float x1 = head[2 * i + 1];
    head[2 * i] = x0 * cos[i] - x1 * sin[i];
    head[2 * i + 1] = x0 * sin[i] + x1 * cos[i];
  }
}

}  // namespace

void apply_rope(std::span<float> head, std::size_t position, double theta) {
  const RopeTable table = make_rope_table(1, position, head.size(), theta);
  rotate(head, table.cos.data(), table.sin.data());
}

void check_tokens(std::span<const TokenId> tokens, const ModelConfig& config) {
  if (tokens.empty()) throw InputError("token sequence is empty");
  if (tokens.size() > config.max_seq_len) {
    throw CapacityError("sequence of " + std::to_string(tokens.size()) +
                        " tokens exceeds max_seq_len " +
                        std::to_string(config.max_seq_len));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= config.vocab_size) {
      throw InputError("token id " + std::to_string(tokens[i]) + " at position " +
                       std::to_string(i) + " outside vocabulary of " +
                       std::to_string(config.vocab_size));
    }
  }
}

Tensor embed_tokens(std::span<const TokenId> tokens, const ModelConfig& config,
                    const Weights& weights, std::size_t position_base) {
  const std::size_t t = tokens.size();
  Tensor h({t, config.d_model});
  for (std::size_t i = 0; i < t; ++i) {
    const auto src = weights.token_embedding.row(static_cast<std::size_t>(tokens[i]));
    auto dst = h.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    if (config.family == Family::kGpt2) {
      const auto pos = weights.position_embedding.row(position_base + i);
      for (std::size_t d = 0; d < config.d_model; ++d) dst[d] += pos[d];
    }
  }
  return h;
}

Tensor attention_forward(const Tensor& h, const LayerWeights& layer,
                         const ModelConfig& config, std::size_t position_base,
                         std::vector<Tensor>* head_probs) {
  const std::size_t t = h.rows();
  if (t == 0) throw InputError("attention over an empty sequence");
  if (t + position_base > config.max_seq_len) {
    throw CapacityError("attention over positions [" + std::to_string(position_base) +
                        ", " + std::to_string(position_base + t) +
                        ") exceeds max_seq_len " + std::to_string(config.max_seq_len));
  }
  const std::size_t dh = config.d_head;
  const std::size_t group = config.n_heads / config.n_kv_heads;

  const Tensor x = family_norm(h, layer.attn_norm_gain, layer.attn_norm_bias, config);
  Tensor q = linear(x, layer.wq, opt(layer.bq));
  Tensor k = linear(x, layer.wk, opt(layer.bk));
  const Tensor v = linear(x, layer.wv, opt(layer.bv));

  if (config.family == Family::kLlama) {
    const RopeTable table = make_rope_table(t, position_base, dh, config.rope_theta);
    for (std::size_t i = 0; i < t; ++i) {
      const float* c = table.cos.data() + i * table.half;
      const float* s = table.sin.data() + i * table.half;
      for (std::size_t hd = 0; hd < config.n_heads; ++hd) {
        rotate(q.row(i).subspan(hd * dh, dh), c, s);
      }
      for (std::size_t hd = 0; hd < config.n_kv_heads; ++hd) {
        rotate(k.row(i).subspan(hd * dh, dh), c, s);
      }
    }
  }

  if (head_probs != nullptr) {
    head_probs->assign(config.n_heads, Tensor({t, t}));
  }
  const float scale = 1.0F / std::sqrt(static_cast<float>(dh));
  Tensor context({t, config.d_model});
  std::vector<float> scores(t);
  for (std::size_t hq = 0; hq < config.n_heads; ++hq) {
    const std::size_t kv = hq / group;
    for (std::size_t i = 0; i < t; ++i) {
      const auto qi = q.row(i).subspan(hq * dh, dh);
      for (std::size_t j = 0; j < t; ++j) {
        scores[j] = j <= i ? dot(qi, k.row(j).subspan(kv * dh, dh)) * scale
                           : kAttentionMaskValue;
      }
      softmax_inplace(scores);
      if (head_probs != nullptr) {
        auto dst = (*head_probs)[hq].row(i);
        std::copy(scores.begin(), scores.end(), dst.begin());
      }
      auto out = context.row(i).subspan(hq * dh, dh);
      for (std::size_t j = 0; j <= i; ++j) {
        const float p = scores[j];
        const auto vj = v.row(j).subspan(kv * dh, dh);
        for (std::size_t d = 0; d < dh; ++d) out[d] += p * vj[d];
      }
    }
  }
  return linear(context, layer.wo, opt(layer.bo));
}

Tensor mlp_forward(const Tensor& x, const LayerWeights& layer,
                   const ModelConfig& config) {
  const Tensor xn = family_norm(x, layer.mlp_norm_gain, layer.mlp_norm_bias, config);
  if (config.family == Family::kGpt2) {
    Tensor up = linear(xn, layer.w_up, opt(layer.b_up));
    for (float& u : up.data()) u = gelu(u);
    return linear(up, layer.w_down, opt(layer.b_down));
  }
  Tensor gate = linear(xn, layer.w_gate);
  const Tensor up = linear(xn, layer.w_up);
  auto g = gate.data();
  const auto u = up.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = silu(g[i]) * u[i];
  return linear(gate, layer.w_down);
}

BlockParts block_forward(const Tensor& h, const LayerWeights& layer,
                         const ModelConfig& config, std::size_t position_base) {
  BlockParts parts;
  parts.post_attention = attention_forward(h, layer, config, position_base);
  parts.intermediate_residual = add(h, parts.post_attention);
  parts.mlp_output = mlp_forward(parts.intermediate_residual, layer, config);
  parts.block_output = add(parts.intermediate_residual, parts.mlp_output);
  return parts;
}

Tensor output_logits(const Tensor& hidden, const ModelConfig& config,
                     const Weights& weights) {
  const Tensor normed =
      family_norm(hidden, weights.final_norm_gain, weights.final_norm_bias, config);
  return linear(normed, weights.lm_head());
}

Tensor model_forward(std::span<const TokenId> tokens, const ModelConfig& config,
                     const Weights& weights, const BlockObserver& observer) {
  check_tokens(tokens, config);
  Tensor h = embed_tokens(tokens, config, weights);
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    BlockParts parts = block_forward(h, weights.layers[l], config);
    if (observer) observer(l, parts);
    h = std::move(parts.block_output);
  }
  return output_logits(h, config, weights);
}

}  // namespace lensforge
