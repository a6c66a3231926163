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


// Layer-by-column prediction grids built from BlockOutput lens records.
//
//   kTopOnePerPosition  rows = layers, cols = positions, cell = top-1 token
//   kTopKAtPosition     rows = layers, cols = ranks 1..K at the last position
//   kTokenSets          rows = layers, cols = user token sets; the cell value
//                       is the set's share of the layer's top-K mass at the
//                       last position, z[row] is that mass

#ifndef LENSFORGE_HEATMAP_H_
#define LENSFORGE_HEATMAP_H_

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lensforge/instrumentation.h"

namespace lensforge {

enum class HeatmapMode { kTopOnePerPosition, kTopKAtPosition, kTokenSets };

// "top1_per_position", "topk_at_position", "token_sets".
std::string_view mode_name(HeatmapMode mode);
// Also accepts the short forms "top1", "topk" and "sets". Throws
// HeatmapError.
HeatmapMode parse_mode(std::string_view name);

struct TokenSet {
  std::string name;
  std::set<TokenId> ids;
};

struct HeatmapCell {
  TokenId token_id = -1;  // -1 when a token set has no member in the top-K
  std::string token_text;
  double value = 0.0;

  friend bool operator==(const HeatmapCell&, const HeatmapCell&) = default;
};

struct HeatmapGrid {
  HeatmapMode mode = HeatmapMode::kTopOnePerPosition;
  std::vector<std::size_t> rows;  // layer indices, ascending
  std::vector<std::string> cols;
  std::vector<std::vector<HeatmapCell>> cells;  // [rows][cols]
  std::vector<double> z;                        // per row, token-set mode only

  friend bool operator==(const HeatmapGrid&, const HeatmapGrid&) = default;
};

using TokenTextFn = std::function<std::string(TokenId)>;

struct HeatmapOptions {
  HeatmapMode mode = HeatmapMode::kTopOnePerPosition;
  // Ranks (or top-K mass) considered; 0 uses every decoded token.
  std::size_t k = 10;
  std::vector<TokenSet> token_sets;
  // Defaults: every layer / position holding a BlockOutput record.
  std::optional<std::vector<std::size_t>> layers;
  std::optional<std::vector<std::size_t>> positions;
};

// Throws HeatmapError naming the first (layer, position) without a
// BlockOutput lens, or describing invalid options.
HeatmapGrid build_heatmap(const ForwardTrace& trace, const HeatmapOptions& options,
                          const TokenTextFn& token_text);

enum class RenderFormat { kText, kSvg, kJson };
RenderFormat parse_format(std::string_view name);

// Text puts the first layer at the top and the final layer at the bottom;
// SVG stacks layers upward from the first.
std::string render_heatmap(const HeatmapGrid& grid, RenderFormat format);

nlohmann::json grid_to_json(const HeatmapGrid& grid);
// Throws HeatmapError for documents that do not describe a grid.
HeatmapGrid grid_from_json(const nlohmann::json& j);

// RGB in [0, 1] on the viridis ramp; 0 is dark, 1 is bright.
std::array<double, 3> viridis(double value);

}  // namespace lensforge

#endif  // LENSFORGE_HEATMAP_H_
