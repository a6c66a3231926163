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

#include <fstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "lensforge/errors.h"
#include "lensforge/synthetic.h"
#include "test_support.h"

namespace lensforge {
namespace {

using nlohmann::json;

std::shared_ptr<const LoadedModel> tiny(const std::string& id, Family family, std::size_t layers) {
  const ModelConfig c = testing::small_config(family, layers, 16, 4, 2, 32, 256, 12);
  return std::make_shared<const LoadedModel>(
      LoadedModel{id, c, synthetic_weights(c, 17), Tokenizer::byte_level()});
}

class ApiServiceTest : public ::testing::Test {
 protected:
  ApiService api_{{tiny("zeta", Family::kLlama, 2), tiny("alpha", Family::kGpt2, 3)}};
};

json body_of(const ApiResponse& r) { return json::parse(r.body); }

TEST_F(ApiServiceTest, ModelsInStableIdOrder) {
  const ApiResponse r = api_.models();
  EXPECT_EQ(r.status, 200);
  const json j = body_of(r);
  ASSERT_EQ(j["models"].size(), 2u);
  EXPECT_EQ(j["models"][0]["id"], "alpha");
  EXPECT_EQ(j["models"][0]["family"], "gpt2");
  EXPECT_EQ(j["models"][0]["n_layers"], 3);
  EXPECT_EQ(j["models"][0]["vocab_size"], 256);
  EXPECT_EQ(j["models"][1]["id"], "zeta");
  EXPECT_EQ(api_.models().body, r.body);
}

TEST(ApiServiceEmptyTest, NoModels) {
  ApiService api({});
  EXPECT_EQ(body_of(api.models()), json::parse(R"({"models":[]})"));
}

TEST(ApiServiceEmptyTest, DuplicateIdsRejected) {
  EXPECT_THROW(ApiService({tiny("a", Family::kGpt2, 1), tiny("a", Family::kLlama, 1)}),
               ConfigError);
}

TEST_F(ApiServiceTest, AnalyzeReturnsTraceGridAndTiming) {
  const ApiResponse r = api_.analyze(R"({"model_id":"alpha","prompt":"abc"})");
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = body_of(r);
  EXPECT_EQ(j["trace"]["model_id"], "alpha");
  EXPECT_EQ(j["trace"]["records"].size(), 9u);
  EXPECT_EQ(j["grid"]["rows"].size(), 3u);
  EXPECT_TRUE(j["timing_ms"].is_number());
}

TEST_F(ApiServiceTest, AnalyzeIsDeterministicApartFromTiming) {
  const std::string req =
      R"({"model_id":"zeta","prompt":"hey","layers":"0-1","points":["mlp_output"],)"
      R"("positions":"last","top_k":3,"mode":"topk","steps":2})";
  json a = body_of(api_.analyze(req));
  json b = body_of(api_.analyze(req));
  a.erase("timing_ms");
  b.erase("timing_ms");
  EXPECT_EQ(a.dump(), b.dump());
  EXPECT_EQ(a["steps"].size(), 2u);
  EXPECT_EQ(a["grid"]["cols"].size(), 3u);
}

TEST_F(ApiServiceTest, AnalyzeAcceptsArraysAndTokenSets) {
  const ApiResponse r = api_.analyze(
      R"({"model_id":"alpha","prompt":"ab","layers":[0,2],"positions":[0,1],)"
      R"("mode":"token_sets","token_sets":{"low":[0,1,2],"high":[200,201]}})");
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = body_of(r);
  EXPECT_EQ(j["grid"]["rows"], json({0, 2}));
  EXPECT_EQ(j["grid"]["cols"], json({"high", "low"}));
  const ApiResponse ordered = api_.analyze(
      R"({"model_id":"alpha","prompt":"ab","mode":"token_sets",)"
      R"("token_sets":[{"name":"low","ids":[0,1]},{"name":"high","ids":[200]}]})");
  ASSERT_EQ(ordered.status, 200) << ordered.body;
  EXPECT_EQ(body_of(ordered)["grid"]["cols"], json({"low", "high"}));
  EXPECT_EQ(api_.analyze(R"({"model_id":"alpha","prompt":"ab","mode":"token_sets",)"
                         R"("token_sets":[{"ids":[1]}]})").status,
            400);
}

TEST_F(ApiServiceTest, AnalyzeErrors) {
  const auto expect = [&](const std::string& body, int status, const std::string& error) {
    const ApiResponse r = api_.analyze(body);
    EXPECT_EQ(r.status, status) << body << " -> " << r.body;
    const json j = body_of(r);
    EXPECT_EQ(j["error"], error) << body;
    EXPECT_TRUE(j["detail"].is_string());
  };
  expect("not json", 400, "malformed_body");
  expect("[1,2]", 400, "malformed_body");
  expect(R"({"prompt":"x"})", 400, "invalid_request");
  expect(R"({"model_id":"nope","prompt":"x"})", 404, "unknown_model");
  expect(R"({"model_id":"alpha","prompt":""})", 400, "invalid_request");
  expect(R"({"model_id":"alpha"})", 400, "invalid_request");
  expect(R"({"model_id":"alpha","prompt":"x","layers":"7"})", 400, "invalid_request");
  expect(R"({"model_id":"alpha","prompt":"x","top_k":"ten"})", 400, "invalid_request");
  expect(R"({"model_id":"alpha","prompt":"x","mode":"weird"})", 400, "invalid_request");
  expect(R"({"model_id":"alpha","prompt":"1234567890123"})", 422, "prompt_too_long");
  expect(R"({"model_id":"alpha","prompt":"ab","positions":[0],"mode":"topk"})", 400,
         "invalid_request");
  EXPECT_EQ(api_.analyze(R"({"model_id":"alpha","prompt":"123456789012"})").status, 200);
}

TEST_F(ApiServiceTest, DistributionTopOneMatchesGridCell) {
  const json grid = body_of(api_.analyze(R"({"model_id":"alpha","prompt":"abcd"})"))["grid"];
  for (std::size_t layer = 0; layer < 3; ++layer) {
    for (std::size_t pos = 0; pos < 4; ++pos) {
      const ApiResponse r = api_.distribution({{"model_id", "alpha"},
                                               {"prompt", "abcd"},
                                               {"layer", std::to_string(layer)},
                                               {"position", std::to_string(pos)},
                                               {"k", "100"}});
      ASSERT_EQ(r.status, 200) << r.body;
      const json j = body_of(r);
      EXPECT_EQ(j["topk"].size(), 100u);
      EXPECT_EQ(j["topk"][0]["token_id"], grid["cells"][layer][pos]["token_id"]);
      EXPECT_EQ(j["topk"][0]["prob"].get<double>(), grid["cells"][layer][pos]["value"].get<double>());
      EXPECT_EQ(j["token"]["token_id"], static_cast<int>("abcd"[pos]));
    }
  }
  const json last = body_of(api_.distribution({{"model_id", "alpha"}, {"prompt", "abcd"}, {"layer", "0"}}));
  EXPECT_EQ(last["position"], 3);
  EXPECT_EQ(last["topk"].size(), 10u);
}

TEST_F(ApiServiceTest, DistributionErrors) {
  using P = std::map<std::string, std::string>;
  const auto status = [&](const P& p) { return api_.distribution(p).status; };
  EXPECT_EQ(status({{"model_id", "nope"}, {"prompt", "a"}, {"layer", "0"}}), 404);
  EXPECT_EQ(status({{"prompt", "a"}, {"layer", "0"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"layer", "0"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "3"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "x"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "0"}, {"k", "101"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "0"}, {"k", "0"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "0"}, {"position", "1"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", "a"}, {"layer", "0"}, {"point", "x"}}), 400);
  EXPECT_EQ(status({{"model_id", "alpha"}, {"prompt", std::string(13, 'a')}, {"layer", "0"}}), 422);
}

TEST_F(ApiServiceTest, ConcurrentRequestsAgree) {
  const std::string req = R"({"model_id":"zeta","prompt":"concurrent"})";
  json expected = body_of(api_.analyze(req));
  expected.erase("timing_ms");
  std::vector<std::string> bodies(6);
  {
    std::vector<std::jthread> threads;
    for (std::size_t i = 0; i < bodies.size(); ++i) {
      threads.emplace_back([&, i] {
        json j = body_of(api_.analyze(req));
        j.erase("timing_ms");
        bodies[i] = j.dump();
      });
    }
  }
  for (const std::string& b : bodies) EXPECT_EQ(b, expected.dump());
}

class HttpServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(static_dir_.path() / "index.html") << "<html>explorer</html>";
    server_ = std::make_unique<HttpServer>(api_, static_dir_.path());
    ASSERT_TRUE(server_->bind("127.0.0.1", 0));
    thread_ = std::jthread([this] { server_->run(); });
    server_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
  }
  void TearDown() override {
    server_->stop();
    thread_.join();
  }

  ApiService api_{{tiny("alpha", Family::kGpt2, 2)}};
  testing::TempDir static_dir_;
  std::unique_ptr<HttpServer> server_;
  std::jthread thread_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpServerTest, ServesApiOverHttp) {
  auto res = client_->Get("/api/models");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["models"][0]["id"], "alpha");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(res->get_header_value("Content-Type"), "application/json");

  res = client_->Post("/api/analyze", R"({"model_id":"alpha","prompt":"hi"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["grid"]["cols"].size(), 2u);

  res = client_->Post("/api/analyze", R"({"model_id":"beta","prompt":"hi"})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "unknown_model");

  res = client_->Get("/api/distribution?model_id=alpha&prompt=hi%20there&layer=1&k=5");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["position"], 7);
}

TEST_F(HttpServerTest, CorsPreflight) {
  auto res = client_->Options("/api/analyze");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
}

TEST_F(HttpServerTest, StaticFilesAtRoot) {
  auto res = client_->Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>explorer</html>");
  res = client_->Get("/");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, "<html>explorer</html>");
}

TEST_F(HttpServerTest, BusyPortCannotBeBoundTwice) {
  HttpServer second(api_, std::nullopt);
  EXPECT_FALSE(second.bind("127.0.0.1", server_->port()));
}

}  // namespace
}  // namespace lensforge
