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

#include "lensforge/lens.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "lensforge/errors.h"
#include "lensforge/model.h"

namespace lensforge {
namespace {

void check_k(std::size_t k, const ModelConfig& config) {
  if (k == 0 || k > config.vocab_size) {
    throw ArgumentError("lens top-k " + std::to_string(k) + " outside [1, " +
                        std::to_string(config.vocab_size) + "]");
  }
}

}  // namespace

double entropy_nats(std::span<const float> probs) {
  double h = 0.0;
  for (float p : probs) {
    h -= static_cast<double>(p) * std::log(std::max<double>(p, kProbFloor));
  }
  return h;
}

LensDistribution distribution_from_logits(std::span<const float> logits,
                                          std::size_t k, bool keep_full_probs) {
  // Same arithmetic as softmax_inplace. The entropy sums over the stored
  // probabilities as entropy_nats does, with log p_i taken exactly as
  // (x_i - max) - log Z instead of from the rounded p_i.
  Tensor probs = tensor_from_span(logits);
  const std::span<float> values = probs.data();
  const float max = *std::max_element(values.begin(), values.end());
  double z = 0.0;
  for (float& v : values) {
    v = std::exp(v - max);
    z += v;
  }
  const double log_z = std::log(z);
  const double log_floor = std::log(kProbFloor);
  double entropy = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(static_cast<double>(values[i]) / z);
    const double log_p = static_cast<double>(logits[i] - max) - log_z;
    entropy -= static_cast<double>(values[i]) * std::max(log_p, log_floor);
  }
  LensDistribution dist;
  dist.topk = top_k(values, k);
  dist.entropy = entropy;
  if (keep_full_probs) dist.full_probs = std::move(probs);
  return dist;
}

std::vector<LensDistribution> lens_project_rows(const Tensor& hidden,
                                                const ModelConfig& config,
                                                const Weights& weights,
                                                std::size_t k,
                                                bool keep_full_probs) {
  if (hidden.rank() != 2 || hidden.cols() != config.d_model) {
    throw ShapeError("lens input " + shape_string(hidden.shape()) +
                     " is not [n x " + std::to_string(config.d_model) + "]");
  }
  check_k(k, config);
  const Tensor logits = output_logits(hidden, config, weights);
  std::vector<LensDistribution> out;
  out.reserve(hidden.rows());
  for (std::size_t i = 0; i < hidden.rows(); ++i) {
    out.push_back(distribution_from_logits(logits.row(i), k, keep_full_probs));
  }
  return out;
}

LensDistribution lens_project(std::span<const float> hidden,
                              const ModelConfig& config, const Weights& weights,
                              std::size_t k, bool keep_full_probs) {
  if (hidden.size() != config.d_model) {
    throw ShapeError("lens input has " + std::to_string(hidden.size()) +
                     " values, expected d_model=" + std::to_string(config.d_model));
  }
  const Tensor row({1, hidden.size()},
                   std::vector<float>(hidden.begin(), hidden.end()));
  return std::move(lens_project_rows(row, config, weights, k, keep_full_probs).front());
}

double kl_to_final(const LensDistribution& layer, const LensDistribution& final) {
  if (!layer.full_probs || !final.full_probs) {
    throw ArgumentError("kl_to_final needs full_probs on both distributions");
  }
  const auto p = final.full_probs->data();
  const auto q = layer.full_probs->data();
  if (p.size() != q.size()) {
    throw ArgumentError("kl_to_final over vocabularies of " +
                        std::to_string(p.size()) + " and " +
                        std::to_string(q.size()));
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0F) continue;
    const double pf = std::max<double>(p[i], kProbFloor);
    const double ql = std::max<double>(q[i], kProbFloor);
    kl += pf * (std::log(pf) - std::log(ql));
  }
  return std::max(kl, 0.0);
}

}  // namespace lensforge
