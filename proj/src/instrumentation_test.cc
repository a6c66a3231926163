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

#include <random>
#include <tuple>
#include <type_traits>

#include <gtest/gtest.h>

#include "lensforge/errors.h"
#include "lensforge/model.h"
#include "lensforge/synthetic.h"
#include "test_support.h"

namespace lensforge {
namespace {

// Records are reachable only as const values.
static_assert(std::is_same_v<decltype(std::declval<ForwardTrace>().records()),
                             std::span<const TraceRecord>>);
static_assert(!std::is_assignable_v<decltype(std::declval<TraceRecord&>().hidden()),
                                    std::optional<Tensor>>);

class InstrumentationTest : public ::testing::TestWithParam<Family> {
 protected:
  ModelConfig config_ = testing::small_config(GetParam(), 4, 16, 4, 2, 32, 37, 24);
  Weights weights_ = synthetic_weights(config_, 2026);
  std::vector<TokenId> tokens_ = {5, 1, 36, 7, 20, 11};
};

TEST_P(InstrumentationTest, EmptySpecHasNoRecordsAndSameLogits) {
  const ForwardTrace trace =
      instrumented_forward(tokens_, config_, weights_, CaptureSpec::empty(), "m");
  EXPECT_TRUE(trace.records().empty());
  EXPECT_EQ(trace.final_logits(), model_forward(tokens_, config_, weights_));
  EXPECT_EQ(trace.model_id(), "m");
  EXPECT_EQ(trace.config(), config_);
  EXPECT_EQ(std::vector<TokenId>(trace.prompt_tokens().begin(), trace.prompt_tokens().end()),
            tokens_);
}

TEST_P(InstrumentationTest, LastPositionBlockOutputGivesOneRecordPerLayer) {
  CaptureSpec spec;
  spec.positions = PositionSelection::last_only();
  const ForwardTrace trace = instrumented_forward(tokens_, config_, weights_, spec);
  ASSERT_EQ(trace.records().size(), config_.n_layers);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const TraceRecord& r = trace.records()[l];
    EXPECT_EQ(r.layer(), l);
    EXPECT_EQ(r.point(), InterceptPoint::kBlockOutput);
    EXPECT_EQ(r.position(), tokens_.size() - 1);
    EXPECT_FALSE(r.hidden().has_value());
    ASSERT_TRUE(r.lens().has_value());
    EXPECT_EQ(r.lens()->topk.size(), 10u);
  }
}

TEST_P(InstrumentationTest, CapturedStatesAreTheBlockTensors) {
  std::vector<BlockParts> parts;
  const Tensor logits = model_forward(
      tokens_, config_, weights_,
      [&](std::size_t, const BlockParts& p) { parts.push_back(p); });
  CaptureSpec spec = CaptureSpec::everything(3);
  spec.retain_hidden = true;
  const ForwardTrace trace = instrumented_forward(tokens_, config_, weights_, spec);
  EXPECT_EQ(trace.final_logits(), logits);
  ASSERT_EQ(trace.records().size(), config_.n_layers * 4 * tokens_.size());
  for (const TraceRecord& r : trace.records()) {
    const BlockParts& p = parts[r.layer()];
    const Tensor* src = nullptr;
    switch (r.point()) {
      case InterceptPoint::kPostAttention: src = &p.post_attention; break;
      case InterceptPoint::kIntermediateResidual: src = &p.intermediate_residual; break;
      case InterceptPoint::kMlpOutput: src = &p.mlp_output; break;
      case InterceptPoint::kBlockOutput: src = &p.block_output; break;
    }
    const auto row = src->row(r.position());
    ASSERT_TRUE(r.hidden().has_value());
    EXPECT_TRUE(std::equal(row.begin(), row.end(), r.hidden()->data().begin()));
    // The lens is a pure function of the state, wherever it came from.
    const LensDistribution direct = lens_project(row, config_, weights_, 3);
    EXPECT_EQ(direct.topk, r.lens()->topk);
    EXPECT_EQ(direct.entropy, r.lens()->entropy);
  }
}

TEST_P(InstrumentationTest, HiddenOnlyCaptureSkipsLens) {
  CaptureSpec spec = CaptureSpec::everything(0);
  const ForwardTrace trace = instrumented_forward(tokens_, config_, weights_, spec);
  for (const TraceRecord& r : trace.records()) {
    EXPECT_TRUE(r.hidden().has_value());
    EXPECT_FALSE(r.lens().has_value());
  }
}

TEST_P(InstrumentationTest, RandomSpecsAreCompleteOrderedAndNonInterfering) {
  const Tensor reference = model_forward(tokens_, config_, weights_);
  std::mt19937 rng(42);
  std::bernoulli_distribution coin(0.5);
  for (int trial = 0; trial < 200; ++trial) {
    CaptureSpec spec;
    if (coin(rng)) {
      spec.layers.emplace();
      for (std::size_t l = 0; l < config_.n_layers; ++l) {
        if (coin(rng)) spec.layers->insert(l);
      }
    }
    spec.points.clear();
    for (InterceptPoint p : kAllInterceptPoints) {
      if (coin(rng)) spec.points.insert(p);
    }
    switch (rng() % 3) {
      case 0: spec.positions = PositionSelection::all(); break;
      case 1: spec.positions = PositionSelection::last_only(); break;
      default: {
        std::set<std::size_t> at;
        for (std::size_t p = 0; p < tokens_.size(); ++p) {
          if (coin(rng)) at.insert(p);
        }
        spec.positions = PositionSelection::at(at);
      }
    }
    spec.decode_top_k = rng() % 6;
    spec.retain_hidden = spec.decode_top_k == 0 || coin(rng);

    const ForwardTrace trace = instrumented_forward(tokens_, config_, weights_, spec);
    ASSERT_EQ(trace.final_logits(), reference) << "trial " << trial;

    const std::size_t n_layers = spec.layers ? spec.layers->size() : config_.n_layers;
    const std::size_t n_positions = spec.positions.resolve(tokens_.size()).size();
    ASSERT_EQ(trace.records().size(), n_layers * spec.points.size() * n_positions);
    for (std::size_t i = 1; i < trace.records().size(); ++i) {
      const auto key = [](const TraceRecord& r) {
        return std::make_tuple(r.layer(), static_cast<int>(r.point()), r.position());
      };
      ASSERT_LT(key(trace.records()[i - 1]), key(trace.records()[i]));
    }
    for (const TraceRecord& r : trace.records()) {
      ASSERT_EQ(trace.find(r.layer(), r.point(), r.position()), &r);
      ASSERT_EQ(r.hidden().has_value(), spec.retain_hidden);
      ASSERT_EQ(r.lens().has_value(), spec.decode_top_k > 0);
    }
  }
}

TEST_P(InstrumentationTest, SpecErrorsBeforeCompute) {
  CaptureSpec spec;
  spec.layers = std::set<std::size_t>{config_.n_layers};
  EXPECT_THROW(instrumented_forward(tokens_, config_, weights_, spec), SpecError);
  spec = CaptureSpec();
  spec.positions = PositionSelection::at({tokens_.size()});
  EXPECT_THROW(instrumented_forward(tokens_, config_, weights_, spec), SpecError);
  spec = CaptureSpec();
  spec.decode_top_k = config_.vocab_size + 1;
  EXPECT_THROW(instrumented_forward(tokens_, config_, weights_, spec), SpecError);
  spec = CaptureSpec();
  spec.decode_top_k = 0;
  EXPECT_THROW(instrumented_forward(tokens_, config_, weights_, spec), SpecError);
}

TEST_P(InstrumentationTest, GenerateExtendsGreedily) {
  CaptureSpec spec;
  spec.positions = PositionSelection::last_only();
  const auto traces = instrumented_generate(tokens_, config_, weights_, spec, 3);
  ASSERT_EQ(traces.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(traces[i].prompt_tokens().size(), tokens_.size() + i);
    if (i > 0) {
      EXPECT_EQ(traces[i].prompt_tokens().back(), traces[i - 1].final_prediction().token_id);
    }
  }
  EXPECT_THROW(instrumented_generate(tokens_, config_, weights_, spec, 0), ArgumentError);
  EXPECT_THROW(instrumented_generate(tokens_, config_, weights_, spec, config_.max_seq_len),
               CapacityError);
}

TEST_P(InstrumentationTest, FinalPredictionIsArgmaxOfLastRow) {
  const ForwardTrace trace =
      instrumented_forward(tokens_, config_, weights_, CaptureSpec::empty());
  const auto dist = distribution_from_logits(trace.final_logits().row(tokens_.size() - 1), 1, false);
  EXPECT_EQ(trace.final_prediction().token_id, dist.topk[0].token_id);
  EXPECT_FLOAT_EQ(trace.final_prediction().prob, dist.topk[0].prob);
}

INSTANTIATE_TEST_SUITE_P(Families, InstrumentationTest,
                         ::testing::Values(Family::kGpt2, Family::kLlama),
                         [](const auto& info) { return std::string(family_name(info.param)); });

TEST(InterceptPointTest, NamesRoundTrip) {
  ASSERT_EQ(kAllInterceptPoints.size(), 4u);
  for (InterceptPoint p : kAllInterceptPoints) EXPECT_EQ(parse_point(point_name(p)), p);
  EXPECT_EQ(point_name(InterceptPoint::kIntermediateResidual), "intermediate_residual");
  EXPECT_THROW(parse_point("attention"), SpecError);
}

TEST(TraceRecordTest, NeedsHiddenOrLens) {
  EXPECT_THROW(TraceRecord(0, InterceptPoint::kBlockOutput, 0, std::nullopt, std::nullopt),
               SpecError);
}

TEST(PositionSelectionTest, Resolves) {
  EXPECT_EQ(PositionSelection::all().resolve(3), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(PositionSelection::last_only().resolve(3), (std::vector<std::size_t>{2}));
  EXPECT_EQ(PositionSelection::at({2, 0}).resolve(3), (std::vector<std::size_t>{0, 2}));
}

}  // namespace
}  // namespace lensforge
