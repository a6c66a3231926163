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

// Logit lens: softmax(lm_head * final_norm(h)) for any hidden state h,
// using the model's learned final-norm parameters.

#ifndef LENSFORGE_LENS_H_
#define LENSFORGE_LENS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "lensforge/model_config.h"
#include "lensforge/ops.h"
#include "lensforge/tensor.h"
#include "lensforge/weights.h"

namespace lensforge {

// Probabilities below this are floored before taking logarithms.
inline constexpr double kProbFloor = 1e-12;

struct LensDistribution {
  std::vector<TokenProb> topk;
  double entropy = 0.0;  // nats
  std::optional<Tensor> full_probs;
};

double entropy_nats(std::span<const float> probs);

// Softmax + top-k + entropy of one logit row.
LensDistribution distribution_from_logits(std::span<const float> logits,
                                          std::size_t k, bool keep_full_probs);

LensDistribution lens_project(std::span<const float> hidden,
                              const ModelConfig& config, const Weights& weights,
                              std::size_t k, bool keep_full_probs = false);

// One distribution per row of `hidden` [n x d_model]. Row results are
// bit-identical to lens_project on that row alone.
std::vector<LensDistribution> lens_project_rows(const Tensor& hidden,
                                                const ModelConfig& config,
                                                const Weights& weights,
                                                std::size_t k,
                                                bool keep_full_probs = false);

// KL(final || layer) in nats. Both arguments need full_probs over the same
// vocabulary; throws ArgumentError otherwise.
double kl_to_final(const LensDistribution& layer, const LensDistribution& final);

}  // namespace lensforge

#endif  // LENSFORGE_LENS_H_
