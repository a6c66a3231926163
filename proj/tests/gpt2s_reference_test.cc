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


// Parity with a frozen reference logit-lens run over the GPT-2-architecture
// fixture model (see tools/reference/make_gpt2_golden.py).

#include <cmath>

#include <gtest/gtest.h>

#include "lensforge/analysis.h"
#include "lensforge/container.h"
#include "lensforge/instrumentation.h"
#include "lensforge/lens.h"
#include "lensforge/model.h"
#include "lensforge/model_loader.h"
#include "test_support.h"

namespace lensforge {
namespace {

const LoadedModel& gpt2s() {
  static const std::shared_ptr<const LoadedModel> model = load_model(testing::gpt2s_dir());
  return *model;
}

const nlohmann::json& golden() {
  static const nlohmann::json j =
      testing::read_json(testing::source_path("tests/golden/gpt2s_reference.json"));
  return j;
}

TEST(Gpt2sReferenceTest, CheckpointMatchesShapeManifest) {
  const Container c = Container::open(testing::gpt2s_dir() / "model.tensors");
  const nlohmann::json& manifest = golden()["manifest"];
  ASSERT_EQ(manifest.size(), 148u);
  EXPECT_EQ(c.index().size(), 148u);
  for (const auto& [name, shape] : manifest.items()) {
    ASSERT_TRUE(c.contains(name)) << name;
    EXPECT_EQ(c.entry(name).shape, shape.get<Shape>()) << name;
  }
  const LoadedModel& m = gpt2s();
  EXPECT_EQ(m.config.n_layers, 12u);
  EXPECT_EQ(m.config.d_model, 768u);
  EXPECT_EQ(m.config.vocab_size, 50257u);
  EXPECT_EQ(&m.weights.lm_head(), &m.weights.token_embedding);
}

TEST(Gpt2sReferenceTest, PromptTokenizationMatches) {
  for (const auto& p : golden()["prompts"]) {
    EXPECT_EQ(gpt2s().tokenizer.encode(p["text"].get<std::string>()),
              p["ids"].get<std::vector<TokenId>>())
        << p["id"];
  }
}

TEST(Gpt2sReferenceTest, PerLayerTopOneMatchesReference) {
  const LoadedModel& m = gpt2s();
  for (const auto& p : golden()["prompts"]) {
    const auto ids = p["ids"].get<std::vector<TokenId>>();
    CaptureSpec spec;
    spec.positions = PositionSelection::last_only();
    const ForwardTrace t = instrumented_forward(ids, m.config, m.weights, spec);
    ASSERT_EQ(t.records().size(), 12u);
    for (std::size_t l = 0; l < 12; ++l) {
      const auto& want = p["lens_last"][l];
      const TokenProb& got = t.records()[l].lens()->topk.front();
      EXPECT_EQ(got.token_id, want[0].get<TokenId>()) << p["id"] << " layer " << l;
      EXPECT_NEAR(got.prob, want[1].get<double>(), 1e-3) << p["id"] << " layer " << l;
    }
    const LensDistribution final_dist =
        distribution_from_logits(t.final_logits().row(ids.size() - 1), 5, false);
    for (std::size_t r = 0; r < 5; ++r) {
      EXPECT_EQ(final_dist.topk[r].token_id, p["final_top5"][r][0].get<TokenId>()) << p["id"];
      EXPECT_NEAR(final_dist.topk[r].prob, p["final_top5"][r][1].get<double>(), 1e-3) << p["id"];
    }
  }
}

TEST(Gpt2sReferenceTest, CapitalPromptGridMatchesReference) {
  const LoadedModel& m = gpt2s();
  AnalysisRequest r;
  r.prompt = "The capital of France is";
  const AnalysisResult result = run_analysis(m, r);
  const HeatmapGrid& g = result.steps[0].grid;
  const nlohmann::json& want = golden()["paris_grid"];
  ASSERT_EQ(g.rows.size(), 12u);
  ASSERT_EQ(g.cols.size(), 5u);
  EXPECT_EQ(g.cols, (std::vector<std::string>{"The", " capital", " of", " France", " is"}));
  for (std::size_t l = 0; l < 12; ++l) {
    for (std::size_t p = 0; p < 5; ++p) {
      EXPECT_EQ(g.cells[l][p].token_id, want[l][p][0].get<TokenId>()) << l << "," << p;
      EXPECT_NEAR(g.cells[l][p].value, want[l][p][1].get<double>(), 1e-3) << l << "," << p;
      EXPECT_EQ(g.cells[l][p].token_text, m.tokenizer.token_text(g.cells[l][p].token_id));
    }
  }
}

TEST(Gpt2sReferenceTest, InterceptTensorsMatchReferenceHooks) {
  const LoadedModel& m = gpt2s();
  const Container hooks =
      Container::open(testing::source_path("tests/golden/gpt2s_paris_hooks.tensors"));
  const std::vector<TokenId> ids = m.tokenizer.encode("The capital of France is");
  CaptureSpec spec = CaptureSpec::everything(0);
  const ForwardTrace t = instrumented_forward(ids, m.config, m.weights, spec);
  double worst = 0.0;
  for (std::size_t l = 0; l < 12; ++l) {
    for (InterceptPoint point : kAllInterceptPoints) {
      const Tensor want =
          hooks.read("layer." + std::to_string(l) + "." + std::string(point_name(point)));
      ASSERT_EQ(want.shape(), (Shape{ids.size(), 768}));
      for (std::size_t pos = 0; pos < ids.size(); ++pos) {
        const auto got = t.find(l, point, pos)->hidden()->data();
        for (std::size_t i = 0; i < 768; ++i) {
          worst = std::max(worst, std::abs(double{got[i]} - want(pos, i)));
        }
      }
    }
  }
  EXPECT_LE(worst, 1e-4);
  RecordProperty("max_abs_diff", std::to_string(worst));
}

}  // namespace
}  // namespace lensforge
