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

#include "lensforge/ops.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <numeric>
#include <string>
#include <thread>

#include "lensforge/errors.h"
#include "parallel.h"

namespace lensforge {
namespace {

constexpr std::size_t kLanes = 8;
// Output columns computed together so one pass over `a` feeds several
// weight rows.
constexpr std::size_t kColBlock = 4;
// Input rows computed together against one column block.
constexpr std::size_t kRowBlock = 4;
// Column blocks handed to one parallel work item.
constexpr std::size_t kBlocksPerTask = 16;

inline float reduce_lanes(const float* acc) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

using Lanes = float __attribute__((vector_size(kLanes * sizeof(float))));

inline Lanes load_lanes(const float* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// out[r * out_stride + c] = dot(a[r], b[c]) for r < kRows, c < kCols. The
// arithmetic applied to each output element is the same for every tile
// shape.
template <std::size_t kRows, std::size_t kCols>
inline void dot_tile(const float* const* a, const float* const* b, std::size_t n,
                     float* out, std::size_t out_stride) {
  Lanes acc[kRows][kCols] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    Lanes bv[kCols];
    for (std::size_t c = 0; c < kCols; ++c) bv[c] = load_lanes(b[c] + i);
    for (std::size_t r = 0; r < kRows; ++r) {
      const Lanes av = load_lanes(a[r] + i);
      for (std::size_t c = 0; c < kCols; ++c) acc[r][c] += av * bv[c];
    }
  }
  for (std::size_t r = 0; r < kRows; ++r) {
    for (std::size_t c = 0; c < kCols; ++c) {
      float lanes[kLanes];
      std::memcpy(lanes, &acc[r][c], sizeof lanes);
      float s = reduce_lanes(lanes);
      for (std::size_t t = i; t < n; ++t) s += a[r][t] * b[c][t];
      out[r * out_stride + c] = s;
    }
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got " +
                     shape_string(t.shape()));
  }
}

}  // namespace

namespace internal {

tbb::task_arena& kernel_arena() {
  static tbb::task_arena arena(static_cast<int>(kernel_threads()));
  return arena;
}

}  // namespace internal

std::size_t kernel_threads() {
  static const std::size_t threads = [] {
    std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LENSFORGE_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && v >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(v));
    }
    return n;
  }();
  return threads;
}

float dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot of lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  const float* rows[1] = {a.data()};
  const float* cols[1] = {b.data()};
  float out = 0.0F;
  dot_tile<1, 1>(rows, cols, a.size(), &out, 1);
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor* bias) {
  require_rank(x, 2, "linear input");
  require_rank(w, 2, "linear weight");
  if (x.cols() != w.cols()) {
    throw ShapeError("linear: input " + shape_string(x.shape()) +
                     " incompatible with weight " + shape_string(w.shape()));
  }
  const std::size_t m = x.rows();
  const std::size_t n = w.rows();
  const std::size_t k = x.cols();
  if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != n)) {
    throw ShapeError("linear: bias " + shape_string(bias->shape()) +
                     " does not match weight " + shape_string(w.shape()));
  }
  Tensor out({m, n});
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  float* od = out.data().data();
  const std::size_t n_blocks = (n + kColBlock - 1) / kColBlock;
  const std::size_t n_tasks = (n_blocks + kBlocksPerTask - 1) / kBlocksPerTask;

  internal::parallel_for(n_tasks, [&](std::size_t task) {
    const std::size_t j_begin = task * kBlocksPerTask * kColBlock;
    const std::size_t j_end = std::min(n, j_begin + kBlocksPerTask * kColBlock);
    std::size_t j = j_begin;
    for (; j + kColBlock <= j_end; j += kColBlock) {
      const float* cols[kColBlock];
      for (std::size_t c = 0; c < kColBlock; ++c) cols[c] = wd + (j + c) * k;
      std::size_t i = 0;
      for (; i + kRowBlock <= m; i += kRowBlock) {
        const float* rows[kRowBlock];
        for (std::size_t r = 0; r < kRowBlock; ++r) rows[r] = xd + (i + r) * k;
        dot_tile<kRowBlock, kColBlock>(rows, cols, k, od + i * n + j, n);
      }
      for (; i < m; ++i) {
        const float* rows[1] = {xd + i * k};
        dot_tile<1, kColBlock>(rows, cols, k, od + i * n + j, n);
      }
    }
    for (; j < j_end; ++j) {
      const float* cols[1] = {wd + j * k};
      for (std::size_t i = 0; i < m; ++i) {
        const float* rows[1] = {xd + i * k};
        dot_tile<1, 1>(rows, cols, k, od + i * n + j, n);
      }
    }
  });

  if (bias != nullptr) {
    const auto b = bias->data();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) od[i * n + j] += b[j];
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul lhs");
  require_rank(b, 2, "matmul rhs");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  Tensor bt({b.cols(), b.rows()});
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) bt(j, i) = b(i, j);
  }
  return linear(a, bt);
}

void softmax_inplace(std::span<float> values) {
  if (values.empty()) return;
  const float max = *std::max_element(values.begin(), values.end());
  double sum = 0.0;
  for (float& v : values) {
    v = std::exp(v - max);
    sum += v;
  }
  for (float& v : values) v = static_cast<float>(static_cast<double>(v) / sum);
}

Tensor softmax(const Tensor& logits) {
  require_rank(logits, 1, "softmax input");
  Tensor out = logits;
  softmax_inplace(out.data());
  return out;
}

namespace {

void layer_norm_span(std::span<const float> x, std::span<const float> gain,
                     std::span<const float> bias, float eps,
                     std::span<float> out) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (float v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>((x[i] - mean) * inv * gain[i] + bias[i]);
  }
}

void rms_norm_span(std::span<const float> x, std::span<const float> gain,
                   float eps, std::span<float> out) {
  double ms = 0.0;
  for (float v : x) ms += static_cast<double>(v) * v;
  ms /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(ms + eps);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<float>(x[i] * inv * gain[i]);
  }
}

void check_norm_params(std::size_t d, const Tensor& gain, const Tensor* bias) {
  if (d == 0) throw ShapeError("normalization over an empty vector");
  if (gain.numel() != d) {
    throw ShapeError("norm gain " + shape_string(gain.shape()) +
                     " does not match width " + std::to_string(d));
  }
  if (bias != nullptr && bias->numel() != d) {
    throw ShapeError("norm bias " + shape_string(bias->shape()) +
                     " does not match width " + std::to_string(d));
  }
}

}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  float eps) {
  require_rank(x, 1, "layer_norm input");
  check_norm_params(x.numel(), gain, &bias);
  Tensor out(x.shape());
  layer_norm_span(x.data(), gain.data(), bias.data(), eps, out.data());
  return out;
}

Tensor rms_norm(const Tensor& x, const Tensor& gain, float eps) {
  require_rank(x, 1, "rms_norm input");
  check_norm_params(x.numel(), gain, nullptr);
  Tensor out(x.shape());
  rms_norm_span(x.data(), gain.data(), eps, out.data());
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       float eps) {
  require_rank(x, 2, "layer_norm input");
  check_norm_params(x.cols(), gain, &bias);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    layer_norm_span(x.row(i), gain.data(), bias.data(), eps, out.row(i));
  }
  return out;
}

Tensor rms_norm_rows(const Tensor& x, const Tensor& gain, float eps) {
  require_rank(x, 2, "rms_norm input");
  check_norm_params(x.cols(), gain, nullptr);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    rms_norm_span(x.row(i), gain.data(), eps, out.row(i));
  }
  return out;
}

std::vector<TokenProb> top_k(std::span<const float> probs, std::size_t k) {
  if (k == 0 || k > probs.size()) {
    throw ArgumentError("top_k: k=" + std::to_string(k) +
                        " outside [1, " + std::to_string(probs.size()) + "]");
  }
  std::vector<TokenId> ids(probs.size());
  std::iota(ids.begin(), ids.end(), 0);
  const auto before = [&](TokenId a, TokenId b) {
    return probs[a] > probs[b] || (probs[a] == probs[b] && a < b);
  };
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k),
                    ids.end(), before);
  std::vector<TokenProb> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back({ids[i], probs[ids[i]]});
  return out;
}

std::vector<TokenProb> top_k(const Tensor& probs, std::size_t k) {
  require_rank(probs, 1, "top_k input");
  return top_k(probs.data(), k);
}

float gelu(float x) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  const double xd = x;
  return static_cast<float>(
      0.5 * xd * (1.0 + std::tanh(kSqrt2OverPi * (xd + 0.044715 * xd * xd * xd))));
}

float silu(float x) {
  return static_cast<float>(static_cast<double>(x) / (1.0 + std::exp(-static_cast<double>(x))));
}

}  // namespace lensforge
