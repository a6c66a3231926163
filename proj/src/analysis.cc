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


#include "lensforge/analysis.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <map>
#include <thread>
#include <utility>

#include "lensforge/errors.h"
#include "lensforge/lens.h"
#include "lensforge/trace_json.h"

namespace lensforge {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto at = s.find(sep);
    out.push_back(trim(s.substr(0, at)));
    if (at == std::string_view::npos) break;
    s.remove_prefix(at + 1);
  }
  return out;
}

std::optional<std::size_t> parse_index(std::string_view s) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

bool valid_batch_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.' || id == "summary") return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '-';
  });
}

}  // namespace

std::set<std::size_t> parse_layer_spec(std::string_view spec, std::size_t n_layers) {
  const std::string range = n_layers == 0 ? "none (the model has no layers)"
                                          : "0-" + std::to_string(n_layers - 1);
  const auto bad = [&](const std::string& why) {
    return SpecError("invalid layer spec '" + std::string(spec) + "': " + why +
                     "; valid layers are " + range);
  };
  spec = trim(spec);
  std::set<std::size_t> out;
  if (spec == "all") {
    for (std::size_t l = 0; l < n_layers; ++l) out.insert(l);
    return out;
  }
  if (spec.empty()) throw bad("empty");
  for (std::string_view item : split(spec, ',')) {
    const auto dash = item.find('-');
    const auto lo = parse_index(trim(item.substr(0, dash)));
    const auto hi = dash == std::string_view::npos ? lo : parse_index(trim(item.substr(dash + 1)));
    if (!lo || !hi) throw bad("'" + std::string(item) + "' is not an index or a-b range");
    if (*lo > *hi) throw bad("range '" + std::string(item) + "' is descending");
    if (*hi >= n_layers) throw bad("layer " + std::to_string(*hi) + " is out of range");
    for (std::size_t l = *lo; l <= *hi; ++l) out.insert(l);
  }
  return out;
}

PositionSelection parse_positions(std::string_view spec) {
  spec = trim(spec);
  if (spec == "all") return PositionSelection::all();
  if (spec == "last") return PositionSelection::last_only();
  std::set<std::size_t> positions;
  for (std::string_view item : split(spec, ',')) {
    const auto p = parse_index(item);
    if (!p) {
      throw SpecError("invalid positions '" + std::string(spec) +
                      "' (expected all, last or a comma-separated index list)");
    }
    positions.insert(*p);
  }
  return PositionSelection::at(std::move(positions));
}

std::set<InterceptPoint> parse_points(std::string_view spec) {
  if (trim(spec) == "all") return {kAllInterceptPoints.begin(), kAllInterceptPoints.end()};
  std::set<InterceptPoint> points;
  for (std::string_view item : split(spec, ',')) points.insert(parse_point(item));
  return points;
}

TokenSet parse_token_set(std::string_view spec, const Tokenizer& tokenizer) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw SpecError("invalid token set '" + std::string(spec) + "' (expected NAME=ITEM|ITEM)");
  }
  TokenSet set{std::string(spec.substr(0, eq)), {}};
  std::string_view rest = spec.substr(eq + 1);
  while (true) {
    const auto bar = rest.find('|');
    const std::string_view item = rest.substr(0, bar);
    if (item.size() > 1 && item.front() == '#') {
      const auto id = parse_index(item.substr(1));
      if (!id || *id >= tokenizer.size()) {
        throw SpecError("token set '" + set.name + "': '" + std::string(item) +
                        "' is not a token id below " + std::to_string(tokenizer.size()));
      }
      set.ids.insert(static_cast<TokenId>(*id));
    } else {
      const auto ids = tokenizer.encode(item);
      if (ids.size() != 1) {
        throw SpecError("token set '" + set.name + "': '" + std::string(item) + "' encodes to " +
                        std::to_string(ids.size()) + " tokens, expected exactly one");
      }
      set.ids.insert(ids.front());
    }
    if (bar == std::string_view::npos) break;
    rest.remove_prefix(bar + 1);
  }
  return set;
}

TokenTextFn text_fn(const Tokenizer& tokenizer) {
  return [&tokenizer](TokenId id) { return tokenizer.token_text(id); };
}

AnalysisResult run_analysis(const LoadedModel& model, const AnalysisRequest& request) {
  if (request.prompt.empty()) throw InputError("prompt is empty");
  if (request.top_k == 0) throw SpecError("top_k must be at least 1");
  if (request.steps == 0) throw SpecError("steps must be at least 1");
  const std::vector<TokenId> tokens = model.tokenizer.encode(request.prompt);

  CaptureSpec spec;
  spec.layers = request.layers;
  spec.points = request.points;
  spec.points.insert(InterceptPoint::kBlockOutput);
  spec.positions = request.positions;
  spec.decode_top_k = request.top_k;
  spec.retain_hidden = request.hidden;
  std::vector<ForwardTrace> traces = instrumented_generate(
      tokens, model.config, model.weights, spec, request.steps, model.id);

  const TokenTextFn texts = text_fn(model.tokenizer);
  HeatmapOptions options;
  options.mode = request.mode;
  options.k = request.top_k;
  options.token_sets = request.token_sets;

  AnalysisResult result;
  json steps = json::array();
  for (ForwardTrace& trace : traces) {
    // Generated tokens may end inside a multi-byte character.
    std::string text = sanitize_utf8(result.steps.empty() ? request.prompt
                                         : model.tokenizer.decode(trace.prompt_tokens()));
    HeatmapGrid grid = build_heatmap(trace, options, texts);
    steps.push_back({{"trace", trace_to_json(trace, text, texts)}, {"grid", grid_to_json(grid)}});
    result.steps.push_back({std::move(text), std::move(trace), std::move(grid)});
  }
  result.document = steps.front();
  if (request.steps > 1) {
    json generated = json::array();
    for (const AnalysisStep& step : result.steps) {
      generated.push_back(token_prob_json(step.trace.final_prediction(), texts));
    }
    result.document["steps"] = std::move(steps);
    result.document["generated_tokens"] = std::move(generated);
  }
  return result;
}

std::vector<double> layer_kl_to_final(const LoadedModel& model,
                                      std::span<const TokenId> tokens) {
  CaptureSpec spec;
  spec.positions = PositionSelection::last_only();
  spec.decode_top_k = 0;
  spec.retain_hidden = true;
  const ForwardTrace trace =
      instrumented_forward(tokens, model.config, model.weights, spec, model.id);
  const std::size_t d = model.config.d_model;
  const auto records = trace.records();
  std::vector<float> rows;
  rows.reserve(records.size() * d);
  for (const TraceRecord& r : records) {
    rows.insert(rows.end(), r.hidden()->data().begin(), r.hidden()->data().end());
  }
  const std::vector<double> empty;
  if (records.empty()) return empty;
  const Tensor hidden({records.size(), d}, std::move(rows));
  const auto lenses = lens_project_rows(hidden, model.config, model.weights, 1, true);
  const Tensor& logits = trace.final_logits();
  const LensDistribution final =
      distribution_from_logits(logits.row(logits.rows() - 1), 1, true);
  std::vector<double> kl;
  for (const LensDistribution& lens : lenses) kl.push_back(kl_to_final(lens, final));
  return kl;
}

BatchSummary run_batch(const LoadedModel& model, std::istream& prompts,
                       const std::filesystem::path& out_dir, const BatchOptions& options) {
  struct Task {
    std::size_t line;
    std::string id;
    std::string prompt;
  };
  struct Outcome {
    std::optional<std::string> error;
    json final_prediction;
    std::size_t n_tokens = 0;
    std::vector<double> kl;
  };
  std::map<std::size_t, std::string> errors;  // line -> message
  std::vector<Task> tasks;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t line_no = 1; std::getline(prompts, line); ++line_no) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      errors[line_no] = "malformed JSON";
      continue;
    }
    if (!j.is_object() || !j.contains("prompt") || !j.at("prompt").is_string() ||
        !j.contains("id") || !(j.at("id").is_string() || j.at("id").is_number_integer())) {
      errors[line_no] = "expected an object with string 'id' and 'prompt'";
      continue;
    }
    std::string id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    if (!valid_batch_id(id)) {
      errors[line_no] = "id must be 1-128 characters of [A-Za-z0-9._-] and not start with '.'";
      continue;
    }
    if (!ids.insert(id).second) {
      errors[line_no] = "duplicate id '" + id + "'";
      continue;
    }
    tasks.push_back({line_no, std::move(id), j.at("prompt").get<std::string>()});
  }

  std::filesystem::create_directories(out_dir);
  std::vector<Outcome> outcomes(tasks.size());
  const TokenTextFn texts = text_fn(model.tokenizer);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const Task& task = tasks[i];
      Outcome& out = outcomes[i];
      try {
        AnalysisRequest request;
        request.prompt = task.prompt;
        request.top_k = options.top_k;
        const AnalysisResult result = run_analysis(model, request);
        const ForwardTrace& trace = result.steps.front().trace;
        write_file(out_dir / (task.id + ".trace.json"), result.document.at("trace").dump(2) + "\n");
        write_file(out_dir / (task.id + ".grid.json"), result.document.at("grid").dump(2) + "\n");
        out.final_prediction = token_prob_json(trace.final_prediction(), texts);
        out.n_tokens = trace.prompt_tokens().size();
        out.kl = layer_kl_to_final(model, trace.prompt_tokens());
      } catch (const Error& e) {
        out.error = e.what();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(options.jobs, 1, std::max<std::size_t>(tasks.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
  }

  BatchSummary summary;
  json prompt_docs = json::array();
  std::vector<double> mean_kl(model.config.n_layers, 0.0);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const Outcome& out = outcomes[i];
    if (out.error) {
      errors[tasks[i].line] = "'" + tasks[i].id + "': " + *out.error;
      continue;
    }
    ++summary.succeeded;
    prompt_docs.push_back({{"id", tasks[i].id},
                           {"n_tokens", out.n_tokens},
                           {"final_prediction", out.final_prediction},
                           {"kl_to_final", out.kl}});
    for (std::size_t l = 0; l < mean_kl.size(); ++l) mean_kl[l] += out.kl[l];
  }
  summary.failed = errors.size();
  if (summary.succeeded == 0) {
    mean_kl.clear();
  } else {
    for (double& v : mean_kl) v /= static_cast<double>(summary.succeeded);
  }
  json error_docs = json::array();
  for (const auto& [line_no, message] : errors) {
    error_docs.push_back({{"line", line_no}, {"error", message}});
  }
  const json doc = {{"model_id", model.id},
                    {"count", summary.succeeded},
                    {"prompts", std::move(prompt_docs)},
                    {"per_layer_mean_kl", mean_kl},
                    {"errors", std::move(error_docs)}};
  write_file(out_dir / "summary.json", doc.dump(2) + "\n");
  return summary;
}

}  // namespace lensforge
