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

#include "lensforge/instrumentation.h"

#include <algorithm>
#include <chrono>
#include <string>
#include <tuple>
#include <utility>

#include "lensforge/errors.h"
#include "lensforge/model.h"

namespace lensforge {
namespace {

// Rows decoded per output_logits call; bounds the [rows x vocab] buffer.
constexpr std::size_t kLensChunkRows = 64;

const Tensor& select(const BlockParts& parts, InterceptPoint point) {
  switch (point) {
    case InterceptPoint::kPostAttention:
      return parts.post_attention;
    case InterceptPoint::kIntermediateResidual:
      return parts.intermediate_residual;
    case InterceptPoint::kMlpOutput:
      return parts.mlp_output;
    case InterceptPoint::kBlockOutput:
      return parts.block_output;
  }
  throw SpecError("unknown intercept point");
}

TokenProb final_prediction_of(const Tensor& logits) {
  const auto last = logits.row(logits.rows() - 1);
  return distribution_from_logits(last, 1, false).topk.front();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::string_view point_name(InterceptPoint point) {
  switch (point) {
    case InterceptPoint::kPostAttention:
      return "post_attention";
    case InterceptPoint::kIntermediateResidual:
      return "intermediate_residual";
    case InterceptPoint::kMlpOutput:
      return "mlp_output";
    case InterceptPoint::kBlockOutput:
      return "block_output";
  }
  return "unknown";
}

InterceptPoint parse_point(std::string_view name) {
  for (InterceptPoint p : kAllInterceptPoints) {
    if (point_name(p) == name) return p;
  }
  throw SpecError("unknown intercept point '" + std::string(name) +
                  "' (expected post_attention, intermediate_residual, "
                  "mlp_output or block_output)");
}

std::vector<std::size_t> PositionSelection::resolve(std::size_t t) const {
  switch (kind) {
    case Kind::kAll: {
      std::vector<std::size_t> out(t);
      for (std::size_t i = 0; i < t; ++i) out[i] = i;
      return out;
    }
    case Kind::kLastOnly:
      return t == 0 ? std::vector<std::size_t>{} : std::vector<std::size_t>{t - 1};
    case Kind::kExplicit:
      return {explicit_positions.begin(), explicit_positions.end()};
  }
  return {};
}

CaptureSpec CaptureSpec::empty() {
  CaptureSpec spec;
  spec.layers = std::set<std::size_t>{};
  return spec;
}

CaptureSpec CaptureSpec::everything(std::size_t k) {
  CaptureSpec spec;
  spec.points = {kAllInterceptPoints.begin(), kAllInterceptPoints.end()};
  spec.decode_top_k = k;
  spec.retain_hidden = k == 0;
  return spec;
}

void CaptureSpec::validate(const ModelConfig& config, std::size_t seq_len) const {
  if (layers) {
    for (std::size_t l : *layers) {
      if (l >= config.n_layers) {
        throw SpecError("layer " + std::to_string(l) + " out of range [0, " +
                        std::to_string(config.n_layers) + ")");
      }
    }
  }
  if (decode_top_k > config.vocab_size) {
    throw SpecError("decode_top_k " + std::to_string(decode_top_k) +
                    " exceeds vocab_size " + std::to_string(config.vocab_size));
  }
  if (decode_top_k == 0 && !retain_hidden) {
    throw SpecError("capture spec records nothing: decode_top_k is 0 and "
                    "hidden states are not retained");
  }
  if (positions.kind == PositionSelection::Kind::kExplicit) {
    for (std::size_t p : positions.explicit_positions) {
      if (p >= seq_len) {
        throw SpecError("position " + std::to_string(p) +
                        " out of range for a sequence of " +
                        std::to_string(seq_len) + " tokens");
      }
    }
  }
}

std::vector<std::size_t> CaptureSpec::resolve_layers(const ModelConfig& config) const {
  if (layers) return {layers->begin(), layers->end()};
  std::vector<std::size_t> out(config.n_layers);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

TraceRecord::TraceRecord(std::size_t layer, InterceptPoint point,
                         std::size_t position, std::optional<Tensor> hidden,
                         std::optional<LensDistribution> lens)
    : layer_(layer),
      point_(point),
      position_(position),
      hidden_(std::move(hidden)),
      lens_(std::move(lens)) {
  if (!hidden_ && !lens_) {
    throw SpecError("trace record needs a hidden state or a lens decode");
  }
}

ForwardTrace::ForwardTrace(std::string model_id, ModelConfig config,
                           std::vector<TokenId> prompt_tokens,
                           std::vector<TraceRecord> records, Tensor final_logits,
                           TokenProb final_prediction)
    : model_id_(std::move(model_id)),
      config_(config),
      prompt_tokens_(std::move(prompt_tokens)),
      records_(std::move(records)),
      final_logits_(std::move(final_logits)),
      final_prediction_(final_prediction) {}

const TraceRecord* ForwardTrace::find(std::size_t layer, InterceptPoint point,
                                      std::size_t position) const {
  const auto key = [](const TraceRecord& r) {
    return std::make_tuple(r.layer(), static_cast<int>(r.point()), r.position());
  };
  const auto want = std::make_tuple(layer, static_cast<int>(point), position);
  const auto it = std::lower_bound(
      records_.begin(), records_.end(), want,
      [&](const TraceRecord& r, const auto& w) { return key(r) < w; });
  if (it == records_.end() || key(*it) != want) return nullptr;
  return &*it;
}

ForwardTrace instrumented_forward(std::span<const TokenId> tokens,
                                  const ModelConfig& config,
                                  const Weights& weights,
                                  const CaptureSpec& spec, std::string model_id) {
  check_tokens(tokens, config);
  spec.validate(config, tokens.size());

  std::vector<bool> layer_selected(config.n_layers, false);
  for (std::size_t l : spec.resolve_layers(config)) layer_selected[l] = true;
  const std::vector<std::size_t> positions = spec.positions.resolve(tokens.size());
  const std::size_t d = config.d_model;

  struct Slot {
    std::size_t layer;
    InterceptPoint point;
    std::size_t position;
  };
  std::vector<Slot> slots;
  std::vector<float> rows;  // captured hidden states, one row per slot

  const BlockObserver observer = [&](std::size_t layer, const BlockParts& parts) {
    if (layer >= layer_selected.size() || !layer_selected[layer]) return;
    for (InterceptPoint point : spec.points) {
      const Tensor& src = select(parts, point);
      for (std::size_t pos : positions) {
        const auto row = src.row(pos);
        rows.insert(rows.end(), row.begin(), row.end());
        slots.push_back({layer, point, pos});
      }
    }
  };
  Tensor logits = model_forward(tokens, config, weights,
                                spec.points.empty() || positions.empty() ? nullptr : observer);

  std::vector<std::optional<LensDistribution>> lenses(slots.size());
  if (spec.decode_top_k > 0) {
    for (std::size_t begin = 0; begin < slots.size(); begin += kLensChunkRows) {
      const std::size_t n = std::min(kLensChunkRows, slots.size() - begin);
      Tensor chunk({n, d}, std::vector<float>(rows.begin() + static_cast<std::ptrdiff_t>(begin * d),
                                              rows.begin() + static_cast<std::ptrdiff_t>((begin + n) * d)));
      auto decoded = lens_project_rows(chunk, config, weights, spec.decode_top_k);
      for (std::size_t i = 0; i < n; ++i) lenses[begin + i] = std::move(decoded[i]);
    }
  }

  std::vector<TraceRecord> records;
  records.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    std::optional<Tensor> hidden;
    if (spec.retain_hidden) {
      hidden = Tensor({d}, std::vector<float>(rows.begin() + static_cast<std::ptrdiff_t>(i * d),
                                              rows.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
    }
    records.emplace_back(slots[i].layer, slots[i].point, slots[i].position,
                         std::move(hidden), std::move(lenses[i]));
  }

  const TokenProb prediction = final_prediction_of(logits);
  return ForwardTrace(std::move(model_id), config,
                      std::vector<TokenId>(tokens.begin(), tokens.end()),
                      std::move(records), std::move(logits), prediction);
}

std::vector<ForwardTrace> instrumented_generate(std::span<const TokenId> tokens,
                                                const ModelConfig& config,
                                                const Weights& weights,
                                                const CaptureSpec& spec,
                                                std::size_t steps,
                                                std::string model_id) {
  if (steps == 0) throw ArgumentError("steps must be >= 1");
  if (tokens.size() + steps - 1 > config.max_seq_len) {
    throw CapacityError("prompt of " + std::to_string(tokens.size()) +
                        " tokens plus " + std::to_string(steps - 1) +
                        " generated tokens exceeds max_seq_len " +
                        std::to_string(config.max_seq_len));
  }
  std::vector<TokenId> context(tokens.begin(), tokens.end());
  std::vector<ForwardTrace> traces;
  traces.reserve(steps);
  for (std::size_t step = 0; step < steps; ++step) {
    traces.push_back(instrumented_forward(context, config, weights, spec, model_id));
    context.push_back(traces.back().final_prediction().token_id);
  }
  return traces;
}

double trace_overhead_ratio(std::span<const TokenId> tokens,
                            const ModelConfig& config, const Weights& weights,
                            const CaptureSpec& spec, std::size_t repetitions) {
  using Clock = std::chrono::steady_clock;
  const auto seconds = [](Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
  };
  repetitions = std::max<std::size_t>(repetitions, 1);
  // Warm-up so first-touch page faults are not charged to either side.
  (void)model_forward(tokens, config, weights);
  (void)instrumented_forward(tokens, config, weights, spec);
  std::vector<double> plain, instrumented;
  for (std::size_t r = 0; r < repetitions; ++r) {
    auto t0 = Clock::now();
    (void)model_forward(tokens, config, weights);
    auto t1 = Clock::now();
    (void)instrumented_forward(tokens, config, weights, spec);
    auto t2 = Clock::now();
    plain.push_back(seconds(t0, t1));
    instrumented.push_back(seconds(t1, t2));
  }
  return median(instrumented) / median(plain);
}

}  // namespace lensforge
