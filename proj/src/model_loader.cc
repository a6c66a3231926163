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


#include "lensforge/model_loader.h"

#include <fstream>
#include <optional>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "lensforge/errors.h"

namespace lensforge {
namespace {

enum class Target {
  kTokenEmbedding,
  kPositionEmbedding,
  kFinalNormGain,
  kFinalNormBias,
  kLmHead,
  kAttnNormGain,
  kAttnNormBias,
  kWq,
  kWk,
  kWv,
  kWo,
  kBq,
  kBk,
  kBv,
  kBo,
  kMlpNormGain,
  kMlpNormBias,
  kWGate,
  kWUp,
  kWDown,
  kBUp,
  kBDown,
};

enum class Need { kRequired, kOptional, kUntiedOnly };

// One checkpoint tensor (or one slice of a fused tensor) and where it goes.
// "{i}" in `source` is the layer index. Fused tensors are split along the
// output dimension into `parts` equal-role slices; rules sharing a source
// are listed adjacently in slice order.
struct NameRule {
  std::string_view source;
  Target target;
  bool transpose = false;  // checkpoint stores [in x out]
  Need need = Need::kRequired;
  int parts = 1;
};

struct NameTable {
  std::vector<std::string_view> prefixes;
  std::vector<NameRule> global;
  std::vector<NameRule> per_layer;
};

const NameTable& gpt2_table() {
  static const NameTable table{
      {"", "transformer."},
      {
          {"wte.weight", Target::kTokenEmbedding},
          {"wpe.weight", Target::kPositionEmbedding},
          {"ln_f.weight", Target::kFinalNormGain},
          {"ln_f.bias", Target::kFinalNormBias},
          {"lm_head.weight", Target::kLmHead, false, Need::kUntiedOnly},
      },
      {
          {"h.{i}.ln_1.weight", Target::kAttnNormGain},
          {"h.{i}.ln_1.bias", Target::kAttnNormBias},
          {"h.{i}.attn.c_attn.weight", Target::kWq, true, Need::kRequired, 3},
          {"h.{i}.attn.c_attn.weight", Target::kWk, true, Need::kRequired, 3},
          {"h.{i}.attn.c_attn.weight", Target::kWv, true, Need::kRequired, 3},
          {"h.{i}.attn.c_attn.bias", Target::kBq, false, Need::kRequired, 3},
          {"h.{i}.attn.c_attn.bias", Target::kBk, false, Need::kRequired, 3},
          {"h.{i}.attn.c_attn.bias", Target::kBv, false, Need::kRequired, 3},
          {"h.{i}.attn.c_proj.weight", Target::kWo, true},
          {"h.{i}.attn.c_proj.bias", Target::kBo},
          {"h.{i}.ln_2.weight", Target::kMlpNormGain},
          {"h.{i}.ln_2.bias", Target::kMlpNormBias},
          {"h.{i}.mlp.c_fc.weight", Target::kWUp, true},
          {"h.{i}.mlp.c_fc.bias", Target::kBUp},
          {"h.{i}.mlp.c_proj.weight", Target::kWDown, true},
          {"h.{i}.mlp.c_proj.bias", Target::kBDown},
      }};
  return table;
}

const NameTable& llama_table() {
  static const NameTable table{
      {""},
      {
          {"model.embed_tokens.weight", Target::kTokenEmbedding},
          {"model.norm.weight", Target::kFinalNormGain},
          {"lm_head.weight", Target::kLmHead, false, Need::kUntiedOnly},
      },
      {
          {"model.layers.{i}.input_layernorm.weight", Target::kAttnNormGain},
          {"model.layers.{i}.self_attn.q_proj.weight", Target::kWq},
          {"model.layers.{i}.self_attn.k_proj.weight", Target::kWk},
          {"model.layers.{i}.self_attn.v_proj.weight", Target::kWv},
          {"model.layers.{i}.self_attn.o_proj.weight", Target::kWo},
          {"model.layers.{i}.self_attn.q_proj.bias", Target::kBq, false, Need::kOptional},
          {"model.layers.{i}.self_attn.k_proj.bias", Target::kBk, false, Need::kOptional},
          {"model.layers.{i}.self_attn.v_proj.bias", Target::kBv, false, Need::kOptional},
          {"model.layers.{i}.self_attn.o_proj.bias", Target::kBo, false, Need::kOptional},
          {"model.layers.{i}.post_attention_layernorm.weight", Target::kMlpNormGain},
          {"model.layers.{i}.mlp.gate_proj.weight", Target::kWGate},
          {"model.layers.{i}.mlp.up_proj.weight", Target::kWUp},
          {"model.layers.{i}.mlp.down_proj.weight", Target::kWDown},
      }};
  return table;
}

const NameTable& table_for(Family family) {
  return family == Family::kGpt2 ? gpt2_table() : llama_table();
}

Shape target_shape(Target t, const ModelConfig& c) {
  const std::size_t d = c.d_model;
  switch (t) {
    case Target::kTokenEmbedding:
    case Target::kLmHead:
      return {c.vocab_size, d};
    case Target::kPositionEmbedding:
      return {c.max_seq_len, d};
    case Target::kWq:
    case Target::kWo:
      return {d, d};
    case Target::kWk:
    case Target::kWv:
      return {c.kv_dim(), d};
    case Target::kBk:
    case Target::kBv:
      return {c.kv_dim()};
    case Target::kWGate:
    case Target::kWUp:
      return {c.d_ff, d};
    case Target::kWDown:
      return {d, c.d_ff};
    case Target::kBUp:
      return {c.d_ff};
    default:
      return {d};
  }
}

struct Slot {
  Tensor* plain = nullptr;
  std::optional<Tensor>* optional = nullptr;

  const Tensor* get() const {
    if (plain != nullptr) return plain->empty() ? nullptr : plain;
    return *optional ? &**optional : nullptr;
  }
  void set(Tensor t) const {
    if (plain != nullptr) {
      *plain = std::move(t);
    } else {
      *optional = std::move(t);
    }
  }
};

Slot slot_for(Target t, Weights& w, LayerWeights* lw) {
  switch (t) {
    case Target::kTokenEmbedding: return {&w.token_embedding};
    case Target::kPositionEmbedding: return {&w.position_embedding};
    case Target::kFinalNormGain: return {&w.final_norm_gain};
    case Target::kFinalNormBias: return {nullptr, &w.final_norm_bias};
    case Target::kLmHead: return {&w.untied_lm_head};
    case Target::kAttnNormGain: return {&lw->attn_norm_gain};
    case Target::kAttnNormBias: return {nullptr, &lw->attn_norm_bias};
    case Target::kWq: return {&lw->wq};
    case Target::kWk: return {&lw->wk};
    case Target::kWv: return {&lw->wv};
    case Target::kWo: return {&lw->wo};
    case Target::kBq: return {nullptr, &lw->bq};
    case Target::kBk: return {nullptr, &lw->bk};
    case Target::kBv: return {nullptr, &lw->bv};
    case Target::kBo: return {nullptr, &lw->bo};
    case Target::kMlpNormGain: return {&lw->mlp_norm_gain};
    case Target::kMlpNormBias: return {nullptr, &lw->mlp_norm_bias};
    case Target::kWGate: return {&lw->w_gate};
    case Target::kWUp: return {&lw->w_up};
    case Target::kWDown: return {&lw->w_down};
    case Target::kBUp: return {nullptr, &lw->b_up};
    case Target::kBDown: return {nullptr, &lw->b_down};
  }
  throw WeightsError("unknown weight slot");
}

Tensor transposed(const Tensor& t) {
  const std::size_t r = t.rows();
  const std::size_t c = t.cols();
  std::vector<float> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    const auto row = t.row(i);
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = row[j];
  }
  return Tensor({c, r}, std::move(out));
}

// Shape the checkpoint tensor must have so that `rule` yields `want`.
Shape source_shape(const NameRule& rule, Shape want) {
  want[0] *= static_cast<std::size_t>(rule.parts);
  if (rule.transpose) std::swap(want[0], want[1]);
  return want;
}

std::string layer_name(std::string_view pattern, std::size_t layer) {
  std::string s(pattern);
  if (const auto at = s.find("{i}"); at != std::string::npos) {
    s.replace(at, 3, std::to_string(layer));
  }
  return s;
}

bool applies(const NameRule& rule, const ModelConfig& config) {
  return rule.need != Need::kUntiedOnly || !config.tie_word_embeddings;
}

// Visits every (rule, layer) in table order; layer is nullopt for globals.
template <typename Fn>
void for_each_rule(const NameTable& table, const ModelConfig& config, Fn&& fn) {
  for (const NameRule& rule : table.global) {
    if (applies(rule, config)) fn(rule, std::optional<std::size_t>());
  }
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    for (const NameRule& rule : table.per_layer) fn(rule, std::optional<std::size_t>(l));
  }
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

}  // namespace

ModelConfig load_config(const std::filesystem::path& config_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(config_json));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed '" + config_json.string() + "': " + e.what());
  }
  return config_from_json(j);
}

Weights weights_from_container(const ModelConfig& config, const Container& container) {
  config.validate();
  const NameTable& table = table_for(config.family);
  std::string_view prefix = table.prefixes.front();
  for (std::string_view p : table.prefixes) {
    if (container.contains(std::string(p) + std::string(table.global.front().source))) {
      prefix = p;
      break;
    }
  }

  Weights w;
  w.tied = config.tie_word_embeddings;
  w.layers.resize(config.n_layers);
  std::string cached_name;
  Tensor cached;
  int part = 0;
  for_each_rule(table, config, [&](const NameRule& rule, std::optional<std::size_t> layer) {
    const std::string base = layer ? layer_name(rule.source, *layer) : std::string(rule.source);
    std::string name = std::string(prefix) + base;
    // Heads such as lm_head sit outside the prefixed body.
    if (!container.contains(name) && container.contains(base)) name = base;
    const Shape want = target_shape(rule.target, config);
    if (name != cached_name) {
      part = 0;
      if (!container.contains(name)) {
        if (rule.need == Need::kOptional) return;
        throw WeightsError("missing tensor '" + name + "' (expected shape " +
                           shape_string(source_shape(rule, want)) + ")");
      }
      const Shape expected = source_shape(rule, want);
      const Shape& actual = container.entry(name).shape;
      if (actual != expected) {
        throw WeightsError("tensor '" + name + "' has shape " + shape_string(actual) +
                           ", expected " + shape_string(expected));
      }
      cached = container.read(name);
      if (rule.transpose) cached = transposed(cached);
      cached_name = name;
    }
    Tensor out = cached;
    if (rule.parts > 1) {
      const std::size_t stride = shape_numel(want);
      const auto all = cached.data();
      out = Tensor(want, std::vector<float>(all.begin() + static_cast<std::ptrdiff_t>(part * stride),
                                            all.begin() + static_cast<std::ptrdiff_t>((part + 1) * stride)));
      ++part;
    }
    slot_for(rule.target, w, layer ? &w.layers[*layer] : nullptr).set(std::move(out));
  });
  validate_weights(config, w);
  return w;
}

std::vector<ContainerTensor> weights_to_tensors(const ModelConfig& config,
                                                const Weights& weights) {
  validate_weights(config, weights);
  const NameTable& table = table_for(config.family);
  const std::string prefix(table.prefixes.front());
  Weights& w = const_cast<Weights&>(weights);  // slots are only read
  std::vector<ContainerTensor> out;
  std::string pending_name;
  std::vector<float> pending;
  Shape pending_shape;
  bool pending_transpose = false;
  const auto flush = [&] {
    if (pending_name.empty()) return;
    Tensor t(pending_shape, std::move(pending));
    if (pending_transpose) t = transposed(t);
    out.push_back(encode_tensor(pending_name, t));
    pending_name.clear();
    pending.clear();
  };
  for_each_rule(table, config, [&](const NameRule& rule, std::optional<std::size_t> layer) {
    const std::string name =
        prefix + (layer ? layer_name(rule.source, *layer) : std::string(rule.source));
    const Tensor* t = slot_for(rule.target, w, layer ? &w.layers[*layer] : nullptr).get();
    if (name != pending_name) flush();
    if (t == nullptr) return;
    if (pending_name.empty()) {
      pending_name = name;
      pending_transpose = rule.transpose;
      pending_shape = t->shape();
      pending_shape[0] = 0;
    }
    pending.insert(pending.end(), t->data().begin(), t->data().end());
    pending_shape[0] += t->shape()[0];
  });
  flush();
  return out;
}

std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("model directory '" + dir.string() + "' does not exist");
  }
  const ModelConfig config = load_config(dir / "config.json");
  const Container container = Container::open(dir / "model.tensors");
  Weights weights = weights_from_container(config, container);
  const auto merges = dir / "merges.txt";
  Tokenizer tokenizer = Tokenizer::load(
      dir / "tokenizer.json",
      std::filesystem::exists(merges) ? std::optional(merges) : std::nullopt);
  if (tokenizer.size() > config.vocab_size) {
    throw ConfigError("tokenizer has " + std::to_string(tokenizer.size()) +
                      " tokens but vocab_size is " + std::to_string(config.vocab_size));
  }
  std::filesystem::path norm = dir.lexically_normal();
  if (norm.filename().empty()) norm = norm.parent_path();
  std::string id = norm.filename().string();
  if (id.empty() || id == ".") id = std::filesystem::absolute(dir).lexically_normal().filename().string();
  return std::make_shared<const LoadedModel>(
      LoadedModel{std::move(id), config, std::move(weights), std::move(tokenizer)});
}

void save_model(const std::filesystem::path& dir, const ModelConfig& config,
                const Weights& weights, const Tokenizer& tokenizer) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");
  write_container(dir / "model.tensors", weights_to_tensors(config, weights));
  write_text(dir / "tokenizer.json", tokenizer.to_json());
  const std::string merges = tokenizer.merges_text();
  if (!merges.empty()) write_text(dir / "merges.txt", merges);
}

}  // namespace lensforge
