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

// Model directories and checkpoint tensor naming.
//
// A model directory holds config.json, model.tensors, tokenizer.json and an
// optional merges.txt. Tensor names follow the upstream checkpoint
// conventions of each family and are mapped onto Weights by a per-family
// table. Llama-family q/k projection rows are expected in interleaved-pair
// rotary order (the converter script permutes them).

#ifndef LENSFORGE_MODEL_LOADER_H_
#define LENSFORGE_MODEL_LOADER_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lensforge/container.h"
#include "lensforge/model_config.h"
#include "lensforge/tokenizer.h"
#include "lensforge/weights.h"

namespace lensforge {

struct LoadedModel {
  std::string id;  // directory name
  ModelConfig config;
  Weights weights;
  Tokenizer tokenizer;
};

// Throws ConfigError, ContainerError, TokenizerError or WeightsError.
std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& dir);

ModelConfig load_config(const std::filesystem::path& config_json);

// Maps container tensors onto Weights for `config`. Tensors the table does
// not mention are ignored. Missing or mis-shaped tensors throw WeightsError
// naming the checkpoint tensor and both shapes.
Weights weights_from_container(const ModelConfig& config, const Container& container);

// Inverse mapping, producing checkpoint-named f32 tensors.
std::vector<ContainerTensor> weights_to_tensors(const ModelConfig& config,
                                                const Weights& weights);

// Writes a complete model directory.
void save_model(const std::filesystem::path& dir, const ModelConfig& config,
                const Weights& weights, const Tokenizer& tokenizer);

}  // namespace lensforge

#endif  // LENSFORGE_MODEL_LOADER_H_
