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

#ifndef LENSFORGE_SRC_PARALLEL_H_
#define LENSFORGE_SRC_PARALLEL_H_

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>
#include <tbb/task_arena.h>

#include <cstddef>

#include "lensforge/ops.h"

namespace lensforge::internal {

tbb::task_arena& kernel_arena();

// Runs body(i) for i in [0, n). Work items must write disjoint outputs; the
// partitioning never changes what any single item computes.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  if (n < 2 || kernel_threads() <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  kernel_arena().execute([&] {
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (std::size_t i = r.begin(); i != r.end(); ++i) {
                          body(i);
                        }
                      });
  });
}

}  // namespace lensforge::internal

#endif  // LENSFORGE_SRC_PARALLEL_H_
