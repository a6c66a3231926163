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

// Decoder-only forward pass for the gpt2 and llama families.
//
// A block is decomposed as
//
//   post_attention        = attn(h)              (input norm included)
//   intermediate_residual = h + post_attention
//   mlp_output            = mlp(intermediate_residual)  (input norm included)
//   block_output          = intermediate_residual + mlp_output
//
// so the four tensors are distinct and the residual identities hold by
// construction. Sublayer functions never add their own residual.

#ifndef LENSFORGE_MODEL_H_
#define LENSFORGE_MODEL_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lensforge/model_config.h"
#include "lensforge/tensor.h"
#include "lensforge/weights.h"

namespace lensforge {

// Substitute for -inf on masked attention scores.
inline constexpr float kAttentionMaskValue = -1e9F;

struct BlockParts {
  Tensor post_attention;
  Tensor intermediate_residual;
  Tensor mlp_output;
  Tensor block_output;
};

// Rotates (2i, 2i+1) pairs of one head vector by pos / theta^(2i/d_head).
void apply_rope(std::span<float> head, std::size_t position, double theta);

// Token (+ learned position) embedding, [t x d_model].
Tensor embed_tokens(std::span<const TokenId> tokens, const ModelConfig& config,
                    const Weights& weights, std::size_t position_base = 0);

// When `head_probs` is non-null it receives one [t x t] causal attention
// matrix per query head.
Tensor attention_forward(const Tensor& h, const LayerWeights& layer,
                         const ModelConfig& config, std::size_t position_base,
                         std::vector<Tensor>* head_probs = nullptr);

Tensor mlp_forward(const Tensor& x, const LayerWeights& layer,
                   const ModelConfig& config);

BlockParts block_forward(const Tensor& h, const LayerWeights& layer,
                         const ModelConfig& config,
                         std::size_t position_base = 0);

// Final normalization followed by the LM head, row-wise over [n x d_model].
// The lens decodes captured states through exactly this function.
Tensor output_logits(const Tensor& hidden, const ModelConfig& config,
                     const Weights& weights);

// Read-only view of every block's intermediate tensors, in layer order.
using BlockObserver = std::function<void(std::size_t layer, const BlockParts&)>;

// Logits [t x vocab]. Throws InputError for empty input or unknown token
// ids and CapacityError when t exceeds max_seq_len.
Tensor model_forward(std::span<const TokenId> tokens, const ModelConfig& config,
                     const Weights& weights,
                     const BlockObserver& observer = nullptr);

void check_tokens(std::span<const TokenId> tokens, const ModelConfig& config);

}  // namespace lensforge

#endif  // LENSFORGE_MODEL_H_
