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

// Numeric kernels. All functions are pure and thread-safe.
//
// Every output element of matmul/linear is produced by exactly one dot
// product whose accumulation order depends only on the inner dimension, so
// results are bit-identical regardless of how rows are batched or how many
// kernel threads run. Prefix invariance and the lens/forward consistency
// checks rely on this.

#ifndef LENSFORGE_OPS_H_
#define LENSFORGE_OPS_H_

#include <cstddef>
#include <span>
#include <vector>

#include "lensforge/tensor.h"

namespace lensforge {

struct TokenProb {
  TokenId token_id = 0;
  float prob = 0.0F;

  friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

float dot(std::span<const float> a, std::span<const float> b);

// a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// x[m x k] * w[n x k]^T (+ bias[n]). Weight rows are output features, the
// layout every projection in the model uses.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr);

Tensor softmax(const Tensor& logits);
void softmax_inplace(std::span<float> values);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps);
Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps);

// Row-wise variants over a [t x d] matrix.
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       float eps);
Tensor rms_norm_rows(const Tensor& x, const Tensor& gain, float eps);

// Sorted by probability descending, ties by ascending token id.
std::vector<TokenProb> top_k(std::span<const float> probs, std::size_t k);
std::vector<TokenProb> top_k(const Tensor& probs, std::size_t k);

// tanh approximation, as used by GPT-2.
float gelu(float x);
float silu(float x);

// Kernel thread count; read once from LENSFORGE_THREADS, defaulting to the
// hardware concurrency.
std::size_t kernel_threads();

}  // namespace lensforge

#endif  // LENSFORGE_OPS_H_
