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


#include "lensforge/server.h"

#include <sys/socket.h>

#include <chrono>
#include <cstdint>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "lensforge/analysis.h"
#include "lensforge/errors.h"
#include "lensforge/lens.h"
#include "lensforge/model.h"
#include "lensforge/trace_json.h"

namespace lensforge {
namespace {

using nlohmann::json;

// Request rejected with a status and {error, detail} body.
struct Rejection {
  int status;
  std::string error;
  std::string detail;
};

ApiResponse reply(int status, const json& body) { return {status, body.dump()}; }

ApiResponse reject(const Rejection& r) {
  return reply(r.status, {{"error", r.error}, {"detail", r.detail}});
}

Rejection invalid(std::string detail) { return {400, "invalid_request", std::move(detail)}; }

class GateHold {
 public:
  explicit GateHold(std::counting_semaphore<1024>& gate) : gate_(gate) { gate_.acquire(); }
  ~GateHold() { gate_.release(); }
  GateHold(const GateHold&) = delete;
  GateHold& operator=(const GateHold&) = delete;

 private:
  std::counting_semaphore<1024>& gate_;
};

std::size_t count_field(const json& body, const char* key, std::size_t fallback) {
  if (!body.contains(key)) return fallback;
  const json& v = body.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw invalid(std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

AnalysisRequest parse_analyze(const json& body, const LoadedModel& model) {
  AnalysisRequest request;
  if (!body.contains("prompt") || !body.at("prompt").is_string()) {
    throw invalid("'prompt' must be a string");
  }
  request.prompt = body.at("prompt").get<std::string>();
  if (request.prompt.empty()) throw invalid("'prompt' is empty");
  if (body.contains("layers")) {
    const json& v = body.at("layers");
    if (v.is_string()) {
      request.layers = parse_layer_spec(v.get<std::string>(), model.config.n_layers);
    } else if (v.is_array()) {
      std::string spec;
      for (const json& e : v) {
        if (!e.is_number_integer()) throw invalid("'layers' entries must be integers");
        spec += (spec.empty() ? "" : ",") + e.dump();
      }
      request.layers = parse_layer_spec(spec, model.config.n_layers);
    } else {
      throw invalid("'layers' must be a layer spec string or an integer array");
    }
  }
  if (body.contains("points")) {
    const json& v = body.at("points");
    if (v.is_string()) {
      request.points = parse_points(v.get<std::string>());
    } else if (v.is_array()) {
      request.points.clear();
      for (const json& e : v) {
        if (!e.is_string()) throw invalid("'points' entries must be strings");
        request.points.insert(parse_point(e.get<std::string>()));
      }
    } else {
      throw invalid("'points' must be a string or a string array");
    }
  }
  if (body.contains("positions")) {
    const json& v = body.at("positions");
    if (v.is_string()) {
      request.positions = parse_positions(v.get<std::string>());
    } else if (v.is_array()) {
      std::set<std::size_t> positions;
      for (const json& e : v) {
        if (!e.is_number_unsigned()) throw invalid("'positions' entries must be indices");
        positions.insert(e.get<std::size_t>());
      }
      request.positions = PositionSelection::at(std::move(positions));
    } else {
      throw invalid("'positions' must be \"all\", \"last\" or an index array");
    }
  }
  request.top_k = count_field(body, "top_k", 10);
  if (request.top_k == 0 || request.top_k > model.config.vocab_size) {
    throw invalid("'top_k' must be between 1 and " + std::to_string(model.config.vocab_size));
  }
  request.steps = count_field(body, "steps", 1);
  if (request.steps == 0) throw invalid("'steps' must be at least 1");
  if (body.contains("mode")) {
    if (!body.at("mode").is_string()) throw invalid("'mode' must be a string");
    request.mode = parse_mode(body.at("mode").get<std::string>());
  }
  if (body.contains("token_sets")) {
    // An object orders sets by name; an array of {name, ids} keeps the
    // caller's column order.
    const json& v = body.at("token_sets");
    const auto add = [&](const std::string& name, const json& ids) {
      TokenSet set{name, {}};
      if (!ids.is_array()) throw invalid("token set '" + name + "' must be an id array");
      for (const json& id : ids) {
        if (!id.is_number_unsigned() || id.get<std::size_t>() >= model.config.vocab_size) {
          throw invalid("token set '" + name + "' holds an invalid token id");
        }
        set.ids.insert(id.get<TokenId>());
      }
      request.token_sets.push_back(std::move(set));
    };
    if (v.is_object()) {
      for (const auto& [name, ids] : v.items()) add(name, ids);
    } else if (v.is_array()) {
      for (const json& set : v) {
        if (!set.is_object() || !set.contains("name") || !set.at("name").is_string() ||
            !set.contains("ids")) {
          throw invalid("each token set must be {name, ids}");
        }
        add(set.at("name").get<std::string>(), set.at("ids"));
      }
    } else {
      throw invalid("'token_sets' must be an object or an array of {name, ids}");
    }
  }
  return request;
}

// Runs `fn`, mapping library errors onto HTTP statuses.
template <typename Fn>
ApiResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const Rejection& r) {
    return reject(r);
  } catch (const CapacityError& e) {
    return reject({422, "prompt_too_long", e.what()});
  } catch (const Error& e) {
    return reject(invalid(e.what()));
  }
}

}  // namespace

ApiService::ApiService(std::vector<std::shared_ptr<const LoadedModel>> models,
                       std::size_t max_concurrent)
    : gate_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_concurrent, 1, 1024))) {
  for (auto& m : models) {
    const std::string id = m->id;
    if (!models_.emplace(id, std::move(m)).second) {
      throw ConfigError("two models share the id '" + id + "'");
    }
  }
}

const LoadedModel* ApiService::find(const std::string& id) const {
  const auto it = models_.find(id);
  if (it == models_.end()) {
    throw Rejection{404, "unknown_model", "no model with id '" + id + "' is loaded"};
  }
  return it->second.get();
}

ApiResponse ApiService::models() const {
  json list = json::array();
  for (const auto& [id, m] : models_) {
    list.push_back({{"id", id},
                    {"family", family_name(m->config.family)},
                    {"n_layers", m->config.n_layers},
                    {"vocab_size", m->config.vocab_size}});
  }
  return reply(200, {{"models", std::move(list)}});
}

ApiResponse ApiService::analyze(std::string_view body_text) {
  return guarded([&] {
    const json body = json::parse(body_text, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      throw Rejection{400, "malformed_body", "request body must be a JSON object"};
    }
    if (!body.contains("model_id") || !body.at("model_id").is_string()) {
      throw invalid("'model_id' must be a string");
    }
    const LoadedModel& model = *find(body.at("model_id").get<std::string>());
    const AnalysisRequest request = parse_analyze(body, model);
    const auto start = std::chrono::steady_clock::now();
    json doc;
    {
      GateHold hold(gate_);
      doc = run_analysis(model, request).document;
    }
    doc["timing_ms"] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return reply(200, doc);
  });
}

ApiResponse ApiService::distribution(const std::map<std::string, std::string>& params) {
  return guarded([&] {
    const auto get = [&](const std::string& key) -> const std::string* {
      const auto it = params.find(key);
      return it == params.end() ? nullptr : &it->second;
    };
    const auto index = [&](const std::string& key) -> std::optional<std::size_t> {
      const std::string* v = get(key);
      if (v == nullptr) return std::nullopt;
      const std::set<std::size_t> one = parse_positions(*v).explicit_positions;
      if (one.size() != 1 || v->find(',') != std::string::npos) {
        throw invalid("'" + key + "' must be a single index");
      }
      return *one.begin();
    };
    const std::string* model_id = get("model_id");
    const std::string* prompt = get("prompt");
    if (model_id == nullptr) throw invalid("'model_id' is required");
    const LoadedModel& model = *find(*model_id);
    if (prompt == nullptr || prompt->empty()) throw invalid("'prompt' is required");
    const auto layer = index("layer");
    if (!layer) throw invalid("'layer' is required");
    if (*layer >= model.config.n_layers) {
      throw invalid("layer " + std::to_string(*layer) + " out of range; valid layers are 0-" +
                    std::to_string(model.config.n_layers - 1));
    }
    const std::size_t k = index("k").value_or(10);
    if (k == 0 || k > kMaxDistributionK || k > model.config.vocab_size) {
      throw invalid("'k' must be between 1 and " + std::to_string(kMaxDistributionK));
    }
    const InterceptPoint point =
        get("point") ? parse_point(*get("point")) : InterceptPoint::kBlockOutput;
    const std::vector<TokenId> tokens = model.tokenizer.encode(*prompt);
    const std::size_t position = index("position").value_or(tokens.size() - 1);
    check_tokens(tokens, model.config);
    if (position >= tokens.size()) {
      throw invalid("position " + std::to_string(position) + " out of range for " +
                    std::to_string(tokens.size()) + " tokens");
    }
    CaptureSpec spec;
    spec.layers = std::set<std::size_t>{*layer};
    spec.points = {point};
    spec.positions = PositionSelection::at({position});
    spec.decode_top_k = k;
    std::optional<ForwardTrace> trace;
    {
      GateHold hold(gate_);
      trace = instrumented_forward(tokens, model.config, model.weights, spec, model.id);
    }
    const LensDistribution& lens = *trace->records().front().lens();
    const TokenTextFn texts = text_fn(model.tokenizer);
    json topk = json::array();
    for (const TokenProb& tp : lens.topk) topk.push_back(token_prob_json(tp, texts));
    return reply(200, {{"model_id", model.id},
                       {"layer", *layer},
                       {"point", point_name(point)},
                       {"position", position},
                       {"token", {{"token_id", tokens[position]},
                                  {"token_text", texts(tokens[position])}}},
                       {"topk", std::move(topk)},
                       {"entropy", lens.entropy}});
  });
}

class HttpServer::Impl {
 public:
  httplib::Server server;
};

HttpServer::HttpServer(ApiService& api, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>()) {
  httplib::Server& s = impl_->server;
  // Plain SO_REUSEADDR: a second server on a busy port must fail to bind.
  s.set_socket_options([](int sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  s.Get("/api/models", [&api, send](const httplib::Request&, httplib::Response& res) {
    send(res, api.models());
  });
  s.Post("/api/analyze", [&api, send](const httplib::Request& req, httplib::Response& res) {
    send(res, api.analyze(req.body));
  });
  s.Get("/api/distribution", [&api, send](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> params;
    for (const auto& [k, v] : req.params) params.emplace(k, v);
    send(res, api.distribution(params));
  });
  s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
  if (static_dir && !s.set_mount_point("/", static_dir->string())) {
    throw ConfigError("static directory '" + static_dir->string() + "' does not exist");
  }
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace lensforge
