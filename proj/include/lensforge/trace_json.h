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


// Trace documents:
//
//   {model_id, prompt_tokens, prompt_token_texts, prompt_text, config,
//    records: [{layer, point, position,
//               topk: [{token_id, token_text, prob}], entropy, hidden?}],
//    final_prediction: {token_id, token_text, prob}}
//
// `entropy` is null and `topk` empty for hidden-only records. Probabilities
// and hidden values are f32 and survive a JSON round trip exactly.

#ifndef LENSFORGE_TRACE_JSON_H_
#define LENSFORGE_TRACE_JSON_H_

#include <map>
#include <string>

#include <json.hpp>

#include "lensforge/heatmap.h"
#include "lensforge/instrumentation.h"

namespace lensforge {

nlohmann::json trace_to_json(const ForwardTrace& trace, const std::string& prompt_text,
                             const TokenTextFn& token_text);

struct ParsedTrace {
  ForwardTrace trace;
  std::string prompt_text;
  std::map<TokenId, std::string> token_text;  // every id the document names

  TokenTextFn text_fn() const;
};

// Throws SpecError for documents that do not describe a trace.
ParsedTrace trace_from_json(const nlohmann::json& j);

nlohmann::json token_prob_json(const TokenProb& tp, const TokenTextFn& token_text);

}  // namespace lensforge

#endif  // LENSFORGE_TRACE_JSON_H_
