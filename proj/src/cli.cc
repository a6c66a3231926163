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


#include "lensforge/cli.h"

#include <csignal>
#include <fstream>
#include <pthread.h>
#include <thread>

#include <CLI11.hpp>

#include "lensforge/analysis.h"
#include "lensforge/errors.h"
#include "lensforge/server.h"

namespace lensforge {
namespace {

// Carries an exit code out of a subcommand.
struct Exit {
  int code;
  std::string message;
};

std::shared_ptr<const LoadedModel> load_or_exit(const std::string& dir) {
  try {
    return load_model(dir);
  } catch (const Error& e) {
    throw Exit{kExitLoad, "cannot load model '" + dir + "': " + e.what()};
  }
}

std::string single_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

struct AnalyzeArgs {
  std::string model;
  std::string prompt;
  std::string layers = "all";
  std::string points = "block_output";
  std::string positions = "all";
  std::size_t top_k = 10;
  std::string mode = "top1_per_position";
  std::string format = "text";
  std::string out;
  bool hidden = false;
  std::size_t steps = 1;
  std::vector<std::string> token_sets;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  AnalysisRequest request;
  RenderFormat format{};
  try {
    format = parse_format(a.format);
    request.mode = parse_mode(a.mode);
    request.points = parse_points(a.points);
    request.positions = parse_positions(a.positions);
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }
  const auto model = load_or_exit(a.model);
  AnalysisResult result;
  try {
    request.prompt = a.prompt;
    request.layers = parse_layer_spec(a.layers, model->config.n_layers);
    request.top_k = a.top_k;
    request.steps = a.steps;
    request.hidden = a.hidden;
    for (const std::string& spec : a.token_sets) {
      request.token_sets.push_back(parse_token_set(spec, model->tokenizer));
    }
    result = run_analysis(*model, request);
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }

  std::string rendered;
  switch (format) {
    case RenderFormat::kJson:
      rendered = result.document.dump(2) + "\n";
      break;
    case RenderFormat::kSvg:
      rendered = render_heatmap(result.steps.back().grid, format);
      break;
    case RenderFormat::kText:
      for (std::size_t i = 0; i < result.steps.size(); ++i) {
        if (result.steps.size() > 1) {
          rendered += (i == 0 ? "" : "\n") + std::string("step ") + std::to_string(i) + ": " +
                      nlohmann::json(result.steps[i].prompt_text)
                          .dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) +
                      "\n";
        }
        rendered += render_heatmap(result.steps[i].grid, format);
      }
      break;
  }
  if (a.out.empty()) {
    out << rendered;
  } else {
    std::ofstream file(a.out, std::ios::binary);
    file << rendered;
    if (!file) throw Exit{kExitFailure, "cannot write '" + a.out + "'"};
  }
  return kExitOk;
}

struct BatchArgs {
  std::string model;
  std::string prompts;
  std::string out;
  std::size_t top_k = 10;
  std::size_t jobs = 1;
};

int cmd_batch(const BatchArgs& a, std::ostream& err) {
  std::ifstream in(a.prompts, std::ios::binary);
  if (!in) throw Exit{kExitUsage, "cannot open prompts file '" + a.prompts + "'"};
  if (a.top_k == 0) throw Exit{kExitUsage, "--top-k must be at least 1"};
  const auto model = load_or_exit(a.model);
  BatchSummary summary;
  try {
    summary = run_batch(*model, in, a.out, {a.top_k, a.jobs});
  } catch (const Error& e) {
    throw Exit{kExitFailure, e.what()};
  }
  if (summary.failed > 0) {
    err << "error: " << summary.failed << " of " << summary.failed + summary.succeeded
        << " prompt lines failed; see " << (std::filesystem::path(a.out) / "summary.json").string()
        << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

struct ServeArgs {
  std::vector<std::string> models;
  std::string addr = "127.0.0.1:8080";
  std::string static_dir;
  std::size_t max_concurrent = 2;
};

int cmd_serve(const ServeArgs& a, std::ostream& err) {
  const auto colon = a.addr.rfind(':');
  int port = -1;
  if (colon != std::string::npos) {
    try {
      std::size_t used = 0;
      port = std::stoi(a.addr.substr(colon + 1), &used);
      if (used != a.addr.size() - colon - 1) port = -1;
    } catch (const std::exception&) {
      port = -1;
    }
  }
  if (colon == std::string::npos || colon == 0 || port < 0 || port > 65535) {
    throw Exit{kExitUsage, "invalid --addr '" + a.addr + "' (expected HOST:PORT)"};
  }
  const std::string host = a.addr.substr(0, colon);
  std::vector<std::shared_ptr<const LoadedModel>> models;
  for (const std::string& dir : a.models) models.push_back(load_or_exit(dir));

  std::optional<ApiService> api;
  std::optional<HttpServer> server;
  try {
    api.emplace(std::move(models), a.max_concurrent);
    server.emplace(*api, a.static_dir.empty() ? std::nullopt
                                              : std::optional<std::filesystem::path>(a.static_dir));
  } catch (const Error& e) {
    throw Exit{kExitUsage, e.what()};
  }
  if (!server->bind(host, port)) {
    throw Exit{kExitBind, "cannot bind " + a.addr + " (address in use or unavailable)"};
  }
  err << "listening on http://" << host << ":" << server->port() << "\n" << std::flush;

  // Stop cleanly on SIGINT/SIGTERM; signals are taken synchronously by a
  // dedicated thread so the handler does no work in signal context.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server->stop();
  }).detach();
  server->run();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Logit-lens analysis of decoder-only transformers", "lensforge"};
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  CLI::App* a = app.add_subcommand("analyze", "Analyze one prompt");
  a->add_option("--model", analyze.model, "Model directory")->required();
  a->add_option("--prompt", analyze.prompt, "Prompt text")->required();
  a->add_option("--layers", analyze.layers, "Layer spec such as 0,3,5-8, or all");
  a->add_option("--points", analyze.points,
                "Comma-separated intercept points (block_output is always captured)");
  a->add_option("--positions", analyze.positions, "all, last or an index list");
  a->add_option("--top-k", analyze.top_k, "Tokens decoded per record")->check(CLI::PositiveNumber);
  a->add_option("--mode", analyze.mode, "top1_per_position, topk_at_position or token_sets");
  a->add_option("--format", analyze.format, "text, svg or json");
  a->add_option("--out", analyze.out, "Output file (default stdout)");
  a->add_flag("--hidden", analyze.hidden, "Retain hidden states in the trace");
  a->add_option("--steps", analyze.steps, "Greedy generation steps")->check(CLI::PositiveNumber);
  a->add_option("--token-set", analyze.token_sets, "NAME=ITEM|ITEM (ITEM is #id or text)");

  BatchArgs batch;
  CLI::App* b = app.add_subcommand("batch", "Analyze a JSONL file of prompts");
  b->add_option("--model", batch.model, "Model directory")->required();
  b->add_option("--prompts", batch.prompts, "JSONL file of {\"id\", \"prompt\"}")->required();
  b->add_option("--out", batch.out, "Output directory")->required();
  b->add_option("--top-k", batch.top_k, "Tokens decoded per record")->check(CLI::PositiveNumber);
  b->add_option("--jobs", batch.jobs, "Prompts processed concurrently")->check(CLI::PositiveNumber);

  ServeArgs serve;
  CLI::App* s = app.add_subcommand("serve", "Serve the JSON API and explorer assets");
  s->add_option("--model", serve.models, "Model directory (repeatable)")->required();
  s->add_option("--addr", serve.addr, "HOST:PORT");
  s->add_option("--static", serve.static_dir, "Directory served at /");
  s->add_option("--max-concurrent", serve.max_concurrent, "Concurrent forward passes")
      ->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << single_line(e.what()) << "\n";
    return kExitUsage;
  }

  try {
    if (a->parsed()) return cmd_analyze(analyze, out);
    if (b->parsed()) return cmd_batch(batch, err);
    return cmd_serve(serve, err);
  } catch (const Exit& e) {
    err << "error: " << single_line(e.message) << "\n";
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << single_line(e.what()) << "\n";
    return kExitFailure;
  }
}

}  // namespace lensforge
