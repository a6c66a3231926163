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


// The analysis pipeline shared by the command line and the HTTP service:
// prompt -> tokens -> instrumented pass(es) -> trace and grid documents.

#ifndef LENSFORGE_ANALYSIS_H_
#define LENSFORGE_ANALYSIS_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lensforge/heatmap.h"
#include "lensforge/instrumentation.h"
#include "lensforge/model_loader.h"

namespace lensforge {

// Layer spec grammar: comma-separated indices and inclusive ranges a-b,
// e.g. "0,3,5-8". "all" selects every layer. Throws SpecError naming the
// valid range.
std::set<std::size_t> parse_layer_spec(std::string_view spec, std::size_t n_layers);
// "all", "last" or a comma-separated index list.
PositionSelection parse_positions(std::string_view spec);
// Comma-separated intercept point names, or "all".
std::set<InterceptPoint> parse_points(std::string_view spec);
// NAME=ITEM|ITEM|..., where ITEM is "#<id>" or text that encodes to exactly
// one token. Throws SpecError.
TokenSet parse_token_set(std::string_view spec, const Tokenizer& tokenizer);

struct AnalysisRequest {
  std::string prompt;
  std::optional<std::set<std::size_t>> layers;
  // block_output is always captured in addition, since grids are built
  // from it.
  std::set<InterceptPoint> points = {InterceptPoint::kBlockOutput};
  PositionSelection positions;
  std::size_t top_k = 10;
  std::size_t steps = 1;
  bool hidden = false;
  HeatmapMode mode = HeatmapMode::kTopOnePerPosition;
  std::vector<TokenSet> token_sets;
};

struct AnalysisStep {
  std::string prompt_text;
  ForwardTrace trace;
  HeatmapGrid grid;
};

struct AnalysisResult {
  std::vector<AnalysisStep> steps;
  // {trace, grid} for the first step; with several steps also
  // "steps": [{trace, grid}...] and "generated_tokens".
  nlohmann::json document;
};

// Throws InputError (empty prompt), CapacityError (prompt plus generated
// tokens exceed max_seq_len), SpecError or HeatmapError.
AnalysisResult run_analysis(const LoadedModel& model, const AnalysisRequest& request);

TokenTextFn text_fn(const Tokenizer& tokenizer);

// KL(final || lens of layer l's block output) at the last position, for
// every layer l.
std::vector<double> layer_kl_to_final(const LoadedModel& model,
                                      std::span<const TokenId> tokens);

struct BatchOptions {
  std::size_t top_k = 10;
  std::size_t jobs = 1;
};

struct BatchSummary {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
};

// Reads {"id", "prompt"} JSON lines and writes <id>.trace.json,
// <id>.grid.json and summary.json into `out_dir`. Line failures are
// recorded in summary.json and do not stop other lines. Output does not
// depend on `jobs`.
BatchSummary run_batch(const LoadedModel& model, std::istream& prompts,
                       const std::filesystem::path& out_dir, const BatchOptions& options);

}  // namespace lensforge

#endif  // LENSFORGE_ANALYSIS_H_
