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


#include "lensforge/trace_json.h"

#include <utility>

#include "lensforge/errors.h"
#include "lensforge/model_config.h"

namespace lensforge {

using nlohmann::json;

json token_prob_json(const TokenProb& tp, const TokenTextFn& token_text) {
  return {{"token_id", tp.token_id}, {"token_text", token_text(tp.token_id)}, {"prob", tp.prob}};
}

json trace_to_json(const ForwardTrace& trace, const std::string& prompt_text,
                   const TokenTextFn& token_text) {
  json records = json::array();
  for (const TraceRecord& r : trace.records()) {
    json jr = {{"layer", r.layer()},
               {"point", point_name(r.point())},
               {"position", r.position()}};
    json topk = json::array();
    if (r.lens()) {
      for (const TokenProb& tp : r.lens()->topk) topk.push_back(token_prob_json(tp, token_text));
      jr["topk"] = std::move(topk);
      jr["entropy"] = r.lens()->entropy;
    } else {
      jr["topk"] = std::move(topk);
      jr["entropy"] = nullptr;
    }
    if (r.hidden()) {
      const auto values = r.hidden()->data();
      jr["hidden"] = std::vector<float>(values.begin(), values.end());
    }
    records.push_back(std::move(jr));
  }
  json prompt_texts = json::array();
  for (TokenId id : trace.prompt_tokens()) prompt_texts.push_back(token_text(id));
  return {{"model_id", trace.model_id()},
          {"prompt_tokens", std::vector<TokenId>(trace.prompt_tokens().begin(),
                                                 trace.prompt_tokens().end())},
          {"prompt_token_texts", std::move(prompt_texts)},
          {"prompt_text", prompt_text},
          {"config", config_to_json(trace.config())},
          {"records", std::move(records)},
          {"final_prediction", token_prob_json(trace.final_prediction(), token_text)}};
}

TokenTextFn ParsedTrace::text_fn() const {
  return [this](TokenId id) {
    const auto it = token_text.find(id);
    return it == token_text.end() ? "<|" + std::to_string(id) + "|>" : it->second;
  };
}

ParsedTrace trace_from_json(const json& j) {
  try {
    std::map<TokenId, std::string> texts;
    const auto read_tp = [&](const json& jt) {
      TokenProb tp{jt.at("token_id").get<TokenId>(), jt.at("prob").get<float>()};
      texts[tp.token_id] = jt.at("token_text").get<std::string>();
      return tp;
    };
    std::vector<TraceRecord> records;
    for (const json& jr : j.at("records")) {
      std::optional<LensDistribution> lens;
      if (!jr.at("entropy").is_null()) {
        LensDistribution d;
        for (const json& jt : jr.at("topk")) d.topk.push_back(read_tp(jt));
        d.entropy = jr.at("entropy").get<double>();
        lens = std::move(d);
      }
      std::optional<Tensor> hidden;
      if (jr.contains("hidden")) {
        auto values = jr.at("hidden").get<std::vector<float>>();
        const std::size_t n = values.size();
        hidden = Tensor({n}, std::move(values));
      }
      records.emplace_back(jr.at("layer").get<std::size_t>(),
                           parse_point(jr.at("point").get<std::string>()),
                           jr.at("position").get<std::size_t>(), std::move(hidden),
                           std::move(lens));
    }
    const TokenProb final_prediction = read_tp(j.at("final_prediction"));
    auto prompt_tokens = j.at("prompt_tokens").get<std::vector<TokenId>>();
    if (j.contains("prompt_token_texts")) {
      const auto prompt_texts = j.at("prompt_token_texts").get<std::vector<std::string>>();
      if (prompt_texts.size() != prompt_tokens.size()) {
        throw SpecError("malformed trace JSON: prompt_token_texts and prompt_tokens differ in length");
      }
      for (std::size_t i = 0; i < prompt_tokens.size(); ++i) texts[prompt_tokens[i]] = prompt_texts[i];
    }
    ForwardTrace trace(j.at("model_id").get<std::string>(), config_from_json(j.at("config")),
                       std::move(prompt_tokens), std::move(records),
                       Tensor(), final_prediction);
    return {std::move(trace), j.at("prompt_text").get<std::string>(), std::move(texts)};
  } catch (const json::exception& e) {
    throw SpecError(std::string("malformed trace JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw SpecError(std::string("malformed trace JSON config: ") + e.what());
  }
}

}  // namespace lensforge
