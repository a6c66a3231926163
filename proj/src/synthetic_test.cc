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


#include "lensforge/synthetic.h"

#include <cmath>

#include <gtest/gtest.h>

#include "test_support.h"

namespace lensforge {
namespace {

TEST(SyntheticTest, SameSeedSameValues) {
  EXPECT_EQ(synthetic_tensor({4, 5}, 1, "a", 0.0F, 1.0F),
            synthetic_tensor({4, 5}, 1, "a", 0.0F, 1.0F));
  EXPECT_NE(synthetic_tensor({4, 5}, 1, "a", 0.0F, 1.0F),
            synthetic_tensor({4, 5}, 2, "a", 0.0F, 1.0F));
  EXPECT_NE(synthetic_tensor({4, 5}, 1, "a", 0.0F, 1.0F),
            synthetic_tensor({4, 5}, 1, "b", 0.0F, 1.0F));
}

TEST(SyntheticTest, MomentsMatchRequest) {
  const Tensor t = synthetic_tensor({100000}, 5, "moments", 0.5F, 0.1F);
  double mean = 0.0, var = 0.0;
  for (float v : t.data()) mean += v;
  mean /= t.numel();
  for (float v : t.data()) var += (v - mean) * (v - mean);
  var /= t.numel();
  EXPECT_NEAR(mean, 0.5, 2e-3);
  EXPECT_NEAR(std::sqrt(var), 0.1, 2e-3);
  // Uniform with std s spans mean +- s*sqrt(3).
  for (float v : t.data()) EXPECT_LE(std::abs(v - 0.5F), 0.1F * std::sqrt(3.0F) + 1e-6F);
}

TEST(SyntheticTest, WeightsValidateForBothFamilies) {
  for (Family f : {Family::kGpt2, Family::kLlama}) {
    for (bool tied : {false, true}) {
      const ModelConfig c = testing::small_config(f, 2, 16, 4, 2, 24, 50, 12, tied);
      const Weights w = synthetic_weights(c, 7);
      EXPECT_NO_THROW(validate_weights(c, w));
      EXPECT_EQ(w.tied, tied);
      EXPECT_EQ(w.layers[0].bq.has_value(), f == Family::kGpt2);
    }
  }
}

}  // namespace
}  // namespace lensforge
