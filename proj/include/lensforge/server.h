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


// JSON-over-HTTP access to loaded models.
//
//   GET  /api/models        {models: [{id, family, n_layers, vocab_size}]}
//   POST /api/analyze       {model_id, prompt, layers?, points?, positions?,
//                            top_k?, steps?, mode?, token_sets?}
//                           -> {trace, grid, timing_ms}
//   GET  /api/distribution  ?model_id&prompt&layer[&position][&k][&point]
//
// Errors are {error, detail} with status 400 (malformed or invalid
// request), 404 (unknown model) or 422 (prompt too long).

#ifndef LENSFORGE_SERVER_H_
#define LENSFORGE_SERVER_H_

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "lensforge/model_loader.h"

namespace lensforge {

struct ApiResponse {
  int status = 200;
  std::string body;
};

// Transport-independent request handling. Thread-safe; at most
// `max_concurrent` forward passes run at once, further requests wait.
class ApiService {
 public:
  static constexpr std::size_t kMaxDistributionK = 100;

  // Throws ConfigError for duplicate model ids.
  explicit ApiService(std::vector<std::shared_ptr<const LoadedModel>> models,
                      std::size_t max_concurrent = 2);

  ApiResponse models() const;
  ApiResponse analyze(std::string_view body);
  ApiResponse distribution(const std::map<std::string, std::string>& params);

 private:
  const LoadedModel* find(const std::string& id) const;

  std::map<std::string, std::shared_ptr<const LoadedModel>> models_;
  std::counting_semaphore<1024> gate_;
};

// HTTP transport for ApiService; static files, when given, are served at /.
class HttpServer {
 public:
  HttpServer(ApiService& api, std::optional<std::filesystem::path> static_dir);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // False when the address cannot be bound, e.g. the port is taken. Port 0
  // picks a free port.
  bool bind(const std::string& host, int port);
  int port() const { return port_; }
  // Serves until stop() is called from another thread.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

}  // namespace lensforge

#endif  // LENSFORGE_SERVER_H_
