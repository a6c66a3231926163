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


// Writes a model directory with seeded synthetic weights.
//
//   lensforge-synth --out DIR [--preset gpt2-small] [--family gpt2|llama]
//       [--layers N] [--d-model D] [--heads H] [--kv-heads K] [--d-ff F]
//       [--vocab V] [--ctx T] [--untied] [--qkv-bias] [--seed S]
//       [--tokenizer DIR]

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lensforge/errors.h"
#include "lensforge/model_loader.h"
#include "lensforge/synthetic.h"

int main(int argc, char** argv) {
  CLI::App app{"Write a synthetic model directory", "lensforge-synth"};
  std::string out;
  std::string preset;
  std::string family = "gpt2";
  std::string tokenizer_dir;
  lensforge::ModelConfig c;
  c.n_layers = 2;
  c.d_model = 64;
  c.n_heads = 4;
  c.d_ff = 256;
  c.vocab_size = 256;
  c.max_seq_len = 128;
  c.tie_word_embeddings = true;
  std::size_t kv_heads = 0;
  bool untied = false;
  std::uint64_t seed = 1;
  lensforge::SyntheticScales scales;
  app.add_option("--out", out, "Output directory")->required();
  app.add_option("--preset", preset, "gpt2-small");
  app.add_option("--family", family, "gpt2 or llama");
  app.add_option("--layers", c.n_layers);
  app.add_option("--d-model", c.d_model);
  app.add_option("--heads", c.n_heads);
  app.add_option("--kv-heads", kv_heads);
  app.add_option("--d-ff", c.d_ff);
  app.add_option("--vocab", c.vocab_size);
  app.add_option("--ctx", c.max_seq_len);
  app.add_flag("--untied", untied);
  app.add_flag("--qkv-bias", scales.qkv_bias);
  app.add_option("--seed", seed);
  app.add_option("--tokenizer", tokenizer_dir, "Directory with tokenizer.json [+ merges.txt]");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (preset == "gpt2-small") {
      family = "gpt2";
      c.n_layers = 12;
      c.d_model = 768;
      c.n_heads = 12;
      c.d_ff = 3072;
      c.vocab_size = 50257;
      c.max_seq_len = 1024;
    } else if (!preset.empty()) {
      throw lensforge::ArgumentError("unknown preset '" + preset + "'");
    }
    c.family = lensforge::parse_family(family);
    c.n_kv_heads = kv_heads == 0 || c.family == lensforge::Family::kGpt2 ? c.n_heads : kv_heads;
    c.d_head = c.n_heads == 0 ? 0 : c.d_model / c.n_heads;
    c.tie_word_embeddings = !untied;
    c.validate();
    std::optional<lensforge::Tokenizer> tokenizer;
    if (tokenizer_dir.empty()) {
      tokenizer = lensforge::Tokenizer::byte_level();
    } else {
      const std::filesystem::path dir(tokenizer_dir);
      const auto merges = dir / "merges.txt";
      tokenizer = lensforge::Tokenizer::load(
          dir / "tokenizer.json",
          std::filesystem::exists(merges) ? std::optional(merges) : std::nullopt);
    }
    lensforge::save_model(out, c, lensforge::synthetic_weights(c, seed, scales), *tokenizer);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
