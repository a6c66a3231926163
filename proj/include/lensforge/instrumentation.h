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

// Declarative activation capture. The capture path only observes the
// tensors block_forward already produces and copies the selected rows out;
// the logits it returns come from the same forward pass as model_forward.

#ifndef LENSFORGE_INSTRUMENTATION_H_
#define LENSFORGE_INSTRUMENTATION_H_

#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/lens.h"
#include "lensforge/model_config.h"
#include "lensforge/ops.h"
#include "lensforge/tensor.h"
#include "lensforge/weights.h"

namespace lensforge {

enum class InterceptPoint {
  kPostAttention,
  kIntermediateResidual,
  kMlpOutput,
  kBlockOutput,
};

inline constexpr std::array<InterceptPoint, 4> kAllInterceptPoints = {
    InterceptPoint::kPostAttention, InterceptPoint::kIntermediateResidual,
    InterceptPoint::kMlpOutput, InterceptPoint::kBlockOutput};

// "post_attention", "intermediate_residual", "mlp_output", "block_output".
std::string_view point_name(InterceptPoint point);
// Throws SpecError for unknown names.
InterceptPoint parse_point(std::string_view name);

struct PositionSelection {
  enum class Kind { kAll, kLastOnly, kExplicit };
  Kind kind = Kind::kAll;
  std::set<std::size_t> explicit_positions;

  static PositionSelection all() { return {}; }
  static PositionSelection last_only() { return {Kind::kLastOnly, {}}; }
  static PositionSelection at(std::set<std::size_t> positions) {
    return {Kind::kExplicit, std::move(positions)};
  }

  // Resolved, ascending positions for a sequence of length t.
  std::vector<std::size_t> resolve(std::size_t t) const;
};

struct CaptureSpec {
  // nullopt selects every layer.
  std::optional<std::set<std::size_t>> layers;
  std::set<InterceptPoint> points = {InterceptPoint::kBlockOutput};
  PositionSelection positions;
  // 0 disables lens decoding; then retain_hidden must be set.
  std::size_t decode_top_k = 10;
  bool retain_hidden = false;

  static CaptureSpec empty();
  static CaptureSpec everything(std::size_t k);

  // Throws SpecError. `seq_len` is checked against explicit positions.
  void validate(const ModelConfig& config, std::size_t seq_len) const;
  std::vector<std::size_t> resolve_layers(const ModelConfig& config) const;
};

class TraceRecord {
 public:
  // Throws SpecError when neither hidden nor lens is present.
  TraceRecord(std::size_t layer, InterceptPoint point, std::size_t position,
              std::optional<Tensor> hidden, std::optional<LensDistribution> lens);

  std::size_t layer() const { return layer_; }
  InterceptPoint point() const { return point_; }
  std::size_t position() const { return position_; }
  const std::optional<Tensor>& hidden() const { return hidden_; }
  const std::optional<LensDistribution>& lens() const { return lens_; }

 private:
  std::size_t layer_;
  InterceptPoint point_;
  std::size_t position_;
  std::optional<Tensor> hidden_;
  std::optional<LensDistribution> lens_;
};

// Immutable result of one instrumented pass.
class ForwardTrace {
 public:
  ForwardTrace(std::string model_id, ModelConfig config,
               std::vector<TokenId> prompt_tokens,
               std::vector<TraceRecord> records, Tensor final_logits,
               TokenProb final_prediction);

  const std::string& model_id() const { return model_id_; }
  const ModelConfig& config() const { return config_; }
  std::span<const TokenId> prompt_tokens() const { return prompt_tokens_; }
  std::span<const TraceRecord> records() const { return records_; }
  // [t x vocab]; empty for traces rebuilt from JSON.
  const Tensor& final_logits() const { return final_logits_; }
  // Argmax of the last row of final_logits with its probability.
  const TokenProb& final_prediction() const { return final_prediction_; }

  // nullptr when the trace holds no such record.
  const TraceRecord* find(std::size_t layer, InterceptPoint point,
                          std::size_t position) const;

 private:
  std::string model_id_;
  ModelConfig config_;
  std::vector<TokenId> prompt_tokens_;
  std::vector<TraceRecord> records_;
  Tensor final_logits_;
  TokenProb final_prediction_;
};

ForwardTrace instrumented_forward(std::span<const TokenId> tokens,
                                  const ModelConfig& config,
                                  const Weights& weights,
                                  const CaptureSpec& spec,
                                  std::string model_id = "");

// Greedy continuation: step i analyses the prompt plus the first i argmax
// tokens. Returns `steps` traces. Throws CapacityError up front if the
// final step would exceed max_seq_len.
std::vector<ForwardTrace> instrumented_generate(std::span<const TokenId> tokens,
                                                const ModelConfig& config,
                                                const Weights& weights,
                                                const CaptureSpec& spec,
                                                std::size_t steps,
                                                std::string model_id = "");

// Median wall time of instrumented_forward over median wall time of
// model_forward, `repetitions` runs each, interleaved.
double trace_overhead_ratio(std::span<const TokenId> tokens,
                            const ModelConfig& config, const Weights& weights,
                            const CaptureSpec& spec, std::size_t repetitions = 5);

}  // namespace lensforge

#endif  // LENSFORGE_INSTRUMENTATION_H_
