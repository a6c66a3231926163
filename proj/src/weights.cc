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

#include "lensforge/weights.h"

#include <string>

#include "lensforge/errors.h"

namespace lensforge {
namespace {

void expect(const std::string& name, const Tensor& t, const Shape& want) {
  if (t.shape() != want) {
    throw WeightsError("tensor '" + name + "' has shape " +
                       shape_string(t.shape()) + ", expected " +
                       shape_string(want));
  }
}

void expect(const std::string& name, const std::optional<Tensor>& t,
            const Shape& want, bool required) {
  if (!t) {
    if (required) throw WeightsError("tensor '" + name + "' is missing");
    return;
  }
  expect(name, *t, want);
}

}  // namespace

void validate_weights(const ModelConfig& c, const Weights& w) {
  const bool gpt2 = c.family == Family::kGpt2;
  const std::size_t d = c.d_model;
  const std::size_t kv = c.kv_dim();
  expect("token_embedding", w.token_embedding, {c.vocab_size, d});
  if (gpt2) expect("position_embedding", w.position_embedding, {c.max_seq_len, d});
  if (w.layers.size() != c.n_layers) {
    throw WeightsError("weights hold " + std::to_string(w.layers.size()) +
                       " layers, config says " + std::to_string(c.n_layers));
  }
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const LayerWeights& lw = w.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    expect(p + "attn_norm_gain", lw.attn_norm_gain, {d});
    expect(p + "attn_norm_bias", lw.attn_norm_bias, {d}, gpt2);
    expect(p + "wq", lw.wq, {d, d});
    expect(p + "wk", lw.wk, {kv, d});
    expect(p + "wv", lw.wv, {kv, d});
    expect(p + "wo", lw.wo, {d, d});
    expect(p + "bq", lw.bq, {d}, gpt2);
    expect(p + "bk", lw.bk, {kv}, gpt2);
    expect(p + "bv", lw.bv, {kv}, gpt2);
    expect(p + "bo", lw.bo, {d}, gpt2);
    expect(p + "mlp_norm_gain", lw.mlp_norm_gain, {d});
    expect(p + "mlp_norm_bias", lw.mlp_norm_bias, {d}, gpt2);
    if (!gpt2) expect(p + "w_gate", lw.w_gate, {c.d_ff, d});
    expect(p + "w_up", lw.w_up, {c.d_ff, d});
    expect(p + "w_down", lw.w_down, {d, c.d_ff});
    expect(p + "b_up", lw.b_up, {c.d_ff}, gpt2);
    expect(p + "b_down", lw.b_down, {d}, gpt2);
  }
  expect("final_norm_gain", w.final_norm_gain, {d});
  expect("final_norm_bias", w.final_norm_bias, {d}, gpt2);
  if (!w.tied) expect("lm_head", w.untied_lm_head, {c.vocab_size, d});
}

}  // namespace lensforge
