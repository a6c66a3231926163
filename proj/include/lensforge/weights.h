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

#ifndef LENSFORGE_WEIGHTS_H_
#define LENSFORGE_WEIGHTS_H_

#include <optional>
#include <vector>

#include "lensforge/model_config.h"
#include "lensforge/tensor.h"

namespace lensforge {

// Projection matrices are stored [out_features x in_features].
struct LayerWeights {
  Tensor attn_norm_gain;
  std::optional<Tensor> attn_norm_bias;  // gpt2 only
  Tensor wq, wk, wv, wo;
  std::optional<Tensor> bq, bk, bv, bo;

  Tensor mlp_norm_gain;
  std::optional<Tensor> mlp_norm_bias;  // gpt2 only
  Tensor w_gate;                        // llama only
  Tensor w_up, w_down;
  std::optional<Tensor> b_up, b_down;  // gpt2 only
};

struct Weights {
  Tensor token_embedding;      // [vocab x d_model]
  Tensor position_embedding;   // [max_seq_len x d_model], gpt2 only
  std::vector<LayerWeights> layers;
  Tensor final_norm_gain;
  std::optional<Tensor> final_norm_bias;  // gpt2 only
  bool tied = false;
  Tensor untied_lm_head;  // empty when tied

  // With tying this is the token embedding object itself, not a copy.
  const Tensor& lm_head() const { return tied ? token_embedding : untied_lm_head; }
};

// Throws WeightsError naming the first tensor whose shape disagrees with
// the config.
void validate_weights(const ModelConfig& config, const Weights& weights);

}  // namespace lensforge

#endif  // LENSFORGE_WEIGHTS_H_
