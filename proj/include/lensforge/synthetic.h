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


// Seeded synthetic weights for tests and benchmark-scale models. Each
// element is a pure function of (seed, tensor name, element index) built
// from integer hashing, so the values are identical on every platform.

#ifndef LENSFORGE_SYNTHETIC_H_
#define LENSFORGE_SYNTHETIC_H_

#include <cstdint>
#include <string_view>

#include "lensforge/model_config.h"
#include "lensforge/weights.h"

namespace lensforge {

// Standard deviations of the generated tensors (uniform distributions).
struct SyntheticScales {
  float embedding = 0.2F;
  float position = 0.02F;
  float attn_in = 0.05F;   // q, k, v
  float attn_out = 0.02F;  // o
  float mlp_in = 0.036F;   // gate, up
  float mlp_out = 0.02F;   // down
  float gain_jitter = 0.1F;  // norm gains are 1 +- jitter
  float bias = 0.02F;
  bool qkv_bias = false;  // llama family only; gpt2 always has biases
};

// Uniform values with the given mean and standard deviation.
Tensor synthetic_tensor(const Shape& shape, std::uint64_t seed, std::string_view name,
                        float mean, float stddev);

Weights synthetic_weights(const ModelConfig& config, std::uint64_t seed,
                          const SyntheticScales& scales = {});

}  // namespace lensforge

#endif  // LENSFORGE_SYNTHETIC_H_
