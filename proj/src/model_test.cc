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


#include "lensforge/model.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lensforge/errors.h"
#include "lensforge/ops.h"
#include "lensforge/synthetic.h"
#include "test_support.h"

namespace lensforge {
namespace {

using testing::small_config;
using Mat = std::vector<std::vector<double>>;

// Scalar double-precision reference for both families, written directly
// from the architecture definitions.
class NaiveModel {
 public:
  NaiveModel(const ModelConfig& c, const Weights& w) : c_(c), w_(w) {}

  Mat norm(const Mat& x, const Tensor& gain, const std::optional<Tensor>& bias) const {
    Mat out = x;
    for (auto& row : out) {
      const double n = static_cast<double>(row.size());
      if (c_.family == Family::kGpt2) {
        double mean = 0.0, var = 0.0;
        for (double v : row) mean += v;
        mean /= n;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= n;
        for (std::size_t i = 0; i < row.size(); ++i) {
          row[i] = (row[i] - mean) / std::sqrt(var + c_.norm_eps) * gain(i) + (*bias)(i);
        }
      } else {
        double ms = 0.0;
        for (double v : row) ms += v * v;
        ms /= n;
        for (std::size_t i = 0; i < row.size(); ++i) {
          row[i] = row[i] / std::sqrt(ms + c_.norm_eps) * gain(i);
        }
      }
    }
    return out;
  }

  static Mat proj(const Mat& x, const Tensor& w, const std::optional<Tensor>& b) {
    Mat out(x.size(), std::vector<double>(w.rows(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (std::size_t o = 0; o < w.rows(); ++o) {
        double s = b ? double{(*b)(o)} : 0.0;
        for (std::size_t k = 0; k < w.cols(); ++k) s += x[i][k] * w(o, k);
        out[i][o] = s;
      }
    }
    return out;
  }

  void rope(std::vector<double>& row, std::size_t heads, std::size_t pos) const {
    const std::size_t dh = c_.d_head;
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < dh / 2; ++i) {
        const double angle = pos / std::pow(c_.rope_theta, 2.0 * i / dh);
        double& a = row[h * dh + 2 * i];
        double& b = row[h * dh + 2 * i + 1];
        const double x = a, y = b;
        a = x * std::cos(angle) - y * std::sin(angle);
        b = x * std::sin(angle) + y * std::cos(angle);
      }
    }
  }

  Mat attention(const Mat& h, const LayerWeights& lw) const {
    const Mat xn = norm(h, lw.attn_norm_gain, lw.attn_norm_bias);
    Mat q = proj(xn, lw.wq, lw.bq), k = proj(xn, lw.wk, lw.bk), v = proj(xn, lw.wv, lw.bv);
    if (c_.family == Family::kLlama) {
      for (std::size_t p = 0; p < h.size(); ++p) {
        rope(q[p], c_.n_heads, p);
        rope(k[p], c_.n_kv_heads, p);
      }
    }
    const std::size_t dh = c_.d_head;
    const std::size_t group = c_.n_heads / c_.n_kv_heads;
    Mat out(h.size(), std::vector<double>(c_.d_model, 0.0));
    for (std::size_t head = 0; head < c_.n_heads; ++head) {
      const std::size_t kvh = head / group;
      for (std::size_t i = 0; i < h.size(); ++i) {
        std::vector<double> s(i + 1);
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          double d = 0.0;
          for (std::size_t e = 0; e < dh; ++e) d += q[i][head * dh + e] * k[j][kvh * dh + e];
          s[j] = d / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j <= i; ++j) {
          for (std::size_t e = 0; e < dh; ++e) {
            out[i][head * dh + e] += s[j] / z * v[j][kvh * dh + e];
          }
        }
      }
    }
    return proj(out, lw.wo, lw.bo);
  }

  Mat mlp(const Mat& x, const LayerWeights& lw) const {
    const Mat xn = norm(x, lw.mlp_norm_gain, lw.mlp_norm_bias);
    Mat up = proj(xn, lw.w_up, lw.b_up);
    if (c_.family == Family::kGpt2) {
      for (auto& row : up) {
        for (double& u : row) {
          u = 0.5 * u * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (u + 0.044715 * u * u * u)));
        }
      }
    } else {
      const Mat gate = proj(xn, lw.w_gate, std::nullopt);
      for (std::size_t i = 0; i < up.size(); ++i) {
        for (std::size_t j = 0; j < up[i].size(); ++j) {
          up[i][j] *= gate[i][j] / (1.0 + std::exp(-gate[i][j]));
        }
      }
    }
    return proj(up, lw.w_down, lw.b_down);
  }

  Mat embed(const std::vector<TokenId>& tokens) const {
    Mat h;
    for (std::size_t p = 0; p < tokens.size(); ++p) {
      std::vector<double> row(c_.d_model);
      for (std::size_t i = 0; i < c_.d_model; ++i) {
        row[i] = w_.token_embedding(static_cast<std::size_t>(tokens[p]), i);
        if (c_.family == Family::kGpt2) row[i] += w_.position_embedding(p, i);
      }
      h.push_back(row);
    }
    return h;
  }

  Mat forward(const std::vector<TokenId>& tokens) const {
    Mat h = embed(tokens);
    for (const LayerWeights& lw : w_.layers) {
      const Mat a = attention(h, lw);
      for (std::size_t i = 0; i < h.size(); ++i) {
        for (std::size_t j = 0; j < c_.d_model; ++j) h[i][j] += a[i][j];
      }
      const Mat m = mlp(h, lw);
      for (std::size_t i = 0; i < h.size(); ++i) {
        for (std::size_t j = 0; j < c_.d_model; ++j) h[i][j] += m[i][j];
      }
    }
    return proj(norm(h, w_.final_norm_gain, w_.final_norm_bias), w_.lm_head(), std::nullopt);
  }

 private:
  const ModelConfig& c_;
  const Weights& w_;
};

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t(i, j);
  }
  return m;
}

void expect_near(const Tensor& got, const Mat& want, double tol) {
  ASSERT_EQ(got.rows(), want.size());
  for (std::size_t i = 0; i < got.rows(); ++i) {
    for (std::size_t j = 0; j < got.cols(); ++j) {
      ASSERT_NEAR(got(i, j), want[i][j], tol) << "at (" << i << ", " << j << ")";
    }
  }
}

SyntheticScales lively_scales() {
  SyntheticScales s;
  s.attn_in = 0.4F;
  s.attn_out = 0.3F;
  s.mlp_in = 0.4F;
  s.mlp_out = 0.3F;
  s.bias = 0.1F;
  s.embedding = 1.0F;
  s.position = 0.3F;
  s.qkv_bias = true;
  return s;
}

void zero_layer(LayerWeights& lw) {
  for (Tensor* t : {&lw.wq, &lw.wk, &lw.wv, &lw.wo, &lw.w_gate, &lw.w_up, &lw.w_down}) {
    for (float& v : t->data()) v = 0.0F;
  }
  for (auto* b : {&lw.bq, &lw.bk, &lw.bv, &lw.bo, &lw.b_up, &lw.b_down}) {
    if (*b) {
      for (float& v : (*b)->data()) v = 0.0F;
    }
  }
}

class BothFamilies : public ::testing::TestWithParam<Family> {};

TEST_P(BothFamilies, AttentionMatchesNaivePerHeadLoop) {
  const ModelConfig c = small_config(GetParam(), 2, 8, 2, 1, 16, 11, 16);
  const Weights w = synthetic_weights(c, 3, lively_scales());
  std::mt19937 rng(1);
  const Tensor h = testing::random_tensor({3, 8}, rng);
  const NaiveModel naive(c, w);
  for (const LayerWeights& lw : w.layers) {
    expect_near(attention_forward(h, lw, c, 0), naive.attention(to_mat(h), lw), 1e-5);
  }
}

TEST_P(BothFamilies, MlpMatchesDirectFormula) {
  const ModelConfig c = small_config(GetParam(), 1, 8, 2, 2, 16, 11, 16);
  const Weights w = synthetic_weights(c, 4, lively_scales());
  std::mt19937 rng(2);
  const Tensor x = testing::random_tensor({4, 8}, rng);
  expect_near(mlp_forward(x, w.layers[0], c), NaiveModel(c, w).mlp(to_mat(x), w.layers[0]), 1e-5);
}

TEST_P(BothFamilies, ForwardMatchesNaiveModel) {
  const ModelConfig c = small_config(GetParam(), 3, 16, 4, 2, 32, 23, 16);
  const Weights w = synthetic_weights(c, 5, lively_scales());
  const std::vector<TokenId> tokens = {3, 17, 0, 22, 5, 9};
  expect_near(model_forward(tokens, c, w), NaiveModel(c, w).forward(tokens), 1e-4);
}

TEST_P(BothFamilies, SingleTokenAttendsToItself) {
  const ModelConfig c = small_config(GetParam(), 1, 8, 2, 1, 16, 11, 16);
  const Weights w = synthetic_weights(c, 6, lively_scales());
  std::mt19937 rng(3);
  std::vector<Tensor> probs;
  attention_forward(testing::random_tensor({1, 8}, rng), w.layers[0], c, 0, &probs);
  ASSERT_EQ(probs.size(), 2u);
  for (const Tensor& p : probs) EXPECT_EQ(p, Tensor::matrix({{1.0F}}));
}

TEST_P(BothFamilies, CausalRowsSumToOne) {
  const ModelConfig c = small_config(GetParam(), 1, 8, 2, 1, 16, 11, 16);
  const Weights w = synthetic_weights(c, 6, lively_scales());
  std::mt19937 rng(3);
  std::vector<Tensor> probs;
  attention_forward(testing::random_tensor({5, 8}, rng), w.layers[0], c, 0, &probs);
  for (const Tensor& p : probs) {
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        if (j > i) {
          EXPECT_EQ(p(i, j), 0.0F);
        }
        sum += p(i, j);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST_P(BothFamilies, ZeroSublayersPassResidualThrough) {
  const ModelConfig c = small_config(GetParam(), 1, 8, 2, 2, 16, 11, 16);
  Weights w = synthetic_weights(c, 7, lively_scales());
  zero_layer(w.layers[0]);
  std::mt19937 rng(4);
  const Tensor h = testing::random_tensor({3, 8}, rng);
  const BlockParts parts = block_forward(h, w.layers[0], c);
  EXPECT_EQ(parts.block_output, h);
  for (float v : parts.mlp_output.data()) EXPECT_EQ(v, 0.0F);
  for (float v : parts.post_attention.data()) EXPECT_EQ(v, 0.0F);
}

TEST_P(BothFamilies, BlockPartsSatisfyResidualIdentities) {
  const ModelConfig c = small_config(GetParam(), 1, 16, 4, 2, 32, 11, 16);
  const Weights w = synthetic_weights(c, 8, lively_scales());
  std::mt19937 rng(5);
  const Tensor h = testing::random_tensor({6, 16}, rng);
  const BlockParts p = block_forward(h, w.layers[0], c);
  for (std::size_t i = 0; i < h.numel(); ++i) {
    EXPECT_LE(std::abs(double{p.block_output(i)} - p.intermediate_residual(i) - p.mlp_output(i)),
              1e-6);
    EXPECT_LE(std::abs(double{p.intermediate_residual(i)} - h(i) - p.post_attention(i)), 1e-6);
  }
  EXPECT_EQ(p.post_attention, attention_forward(h, w.layers[0], c, 0));
  EXPECT_EQ(p.mlp_output, mlp_forward(p.intermediate_residual, w.layers[0], c));
}

TEST_P(BothFamilies, PrefixInvariance) {
  const ModelConfig c = small_config(GetParam(), 2, 16, 4, 2, 32, 23, 32);
  const Weights w = synthetic_weights(c, 9, lively_scales());
  const std::vector<TokenId> full = {1, 5, 9, 13, 17, 21, 2, 6};
  const Tensor all = model_forward(full, c, w);
  for (std::size_t t = 1; t < full.size(); ++t) {
    const Tensor prefix = model_forward(std::span(full).first(t), c, w);
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < c.vocab_size; ++j) ASSERT_EQ(prefix(i, j), all(i, j));
    }
  }
}

TEST_P(BothFamilies, DeterministicAcrossRuns) {
  const ModelConfig c = small_config(GetParam(), 2, 16, 4, 2, 32, 23, 32);
  const Weights w = synthetic_weights(c, 10, lively_scales());
  const std::vector<TokenId> tokens = {4, 8, 15, 16, 23 % 23, 42 % 23};
  EXPECT_EQ(model_forward(tokens, c, w), model_forward(tokens, c, w));
}

TEST_P(BothFamilies, ZeroLayersAppliesNormAndHeadToEmbedding) {
  ModelConfig c = small_config(GetParam(), 1, 8, 2, 2, 16, 11, 16);
  Weights w = synthetic_weights(c, 11, lively_scales());
  w.layers.clear();
  c.n_layers = 0;
  const std::vector<TokenId> tokens = {1, 2, 3};
  const Tensor logits = model_forward(tokens, c, w);
  const Tensor expected = output_logits(embed_tokens(tokens, c, w), c, w);
  EXPECT_EQ(logits, expected);
}

TEST_P(BothFamilies, InputValidation) {
  const ModelConfig c = small_config(GetParam(), 1, 8, 2, 2, 16, 11, 4);
  const Weights w = synthetic_weights(c, 12);
  EXPECT_THROW(model_forward(std::vector<TokenId>{}, c, w), InputError);
  EXPECT_THROW(model_forward(std::vector<TokenId>{11}, c, w), InputError);
  EXPECT_THROW(model_forward(std::vector<TokenId>{-1}, c, w), InputError);
  EXPECT_THROW(model_forward(std::vector<TokenId>{1, 2, 3, 4, 5}, c, w), CapacityError);
  std::mt19937 rng(6);
  EXPECT_THROW(attention_forward(testing::random_tensor({3, 8}, rng), w.layers[0], c, 2),
               CapacityError);
}

INSTANTIATE_TEST_SUITE_P(Families, BothFamilies, ::testing::Values(Family::kGpt2, Family::kLlama),
                         [](const auto& info) { return std::string(family_name(info.param)); });

TEST(GqaTest, GroupedHeadsEqualMhaWithRepeatedKvWeights) {
  const ModelConfig gqa = small_config(Family::kLlama, 1, 32, 8, 2, 32, 19, 16);
  const Weights wg = synthetic_weights(gqa, 13, lively_scales());
  ModelConfig mha = gqa;
  mha.n_kv_heads = mha.n_heads;
  Weights wm = wg;
  LayerWeights& lm = wm.layers[0];
  const LayerWeights& lg = wg.layers[0];
  const std::size_t dh = gqa.d_head;
  const std::size_t group = gqa.n_heads / gqa.n_kv_heads;
  lm.wk = Tensor({32, 32});
  lm.wv = Tensor({32, 32});
  lm.bk = Tensor({32});
  lm.bv = Tensor({32});
  for (std::size_t h = 0; h < mha.n_heads; ++h) {
    for (std::size_t e = 0; e < dh; ++e) {
      const std::size_t src = (h / group) * dh + e;
      const std::size_t dst = h * dh + e;
      for (std::size_t k = 0; k < 32; ++k) {
        lm.wk(dst, k) = lg.wk(src, k);
        lm.wv(dst, k) = lg.wv(src, k);
      }
      (*lm.bk)(dst) = (*lg.bk)(src);
      (*lm.bv)(dst) = (*lg.bv)(src);
    }
  }
  std::mt19937 rng(7);
  const Tensor h = testing::random_tensor({5, 32}, rng);
  EXPECT_EQ(attention_forward(h, lg, gqa, 0), attention_forward(h, lm, mha, 0));
}

TEST(GqaTest, FullKvHeadsMatchNaiveMultiHead) {
  const ModelConfig c = small_config(Family::kLlama, 1, 16, 4, 4, 32, 19, 16);
  const Weights w = synthetic_weights(c, 14, lively_scales());
  std::mt19937 rng(8);
  const Tensor h = testing::random_tensor({4, 16}, rng);
  expect_near(attention_forward(h, w.layers[0], c, 0),
              NaiveModel(c, w).attention(to_mat(h), w.layers[0]), 1e-5);
}

TEST(RopeTest, PreservesPairNorms) {
  std::mt19937 rng(9);
  for (std::size_t pos : {0u, 1u, 7u, 100u, 1000u}) {
    Tensor head = testing::random_tensor({16}, rng);
    const Tensor before = head;
    apply_rope(head.data(), pos, 10000.0);
    for (std::size_t i = 0; i < 16; i += 2) {
      EXPECT_NEAR(std::hypot(head(i), head(i + 1)), std::hypot(before(i), before(i + 1)), 1e-6);
    }
    if (pos == 0) {
      EXPECT_EQ(head, before);
    }
  }
}

TEST(RopeTest, RotatesPairsByPositionScaledAngles) {
  Tensor head = Tensor::vector({1, 0, 1, 0});
  apply_rope(head.data(), 3, 100.0);
  EXPECT_NEAR(head(0), std::cos(3.0), 1e-6);
  EXPECT_NEAR(head(1), std::sin(3.0), 1e-6);
  EXPECT_NEAR(head(2), std::cos(3.0 / 10.0), 1e-6);  // 100^(2/4) = 10
  EXPECT_NEAR(head(3), std::sin(3.0 / 10.0), 1e-6);
}

TEST(TyingTest, LmHeadIsTheEmbeddingObject) {
  const ModelConfig c = small_config(Family::kGpt2, 1, 8, 2, 2, 16, 11, 16, true);
  const Weights w = synthetic_weights(c, 15);
  EXPECT_EQ(&w.lm_head(), &w.token_embedding);
  EXPECT_TRUE(w.untied_lm_head.empty());
}

}  // namespace
}  // namespace lensforge
