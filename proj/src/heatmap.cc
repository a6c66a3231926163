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


#include "lensforge/heatmap.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "lensforge/errors.h"

namespace lensforge {
namespace {

using nlohmann::json;

// matplotlib viridis sampled at 17 evenly spaced stops.
constexpr std::array<std::array<double, 3>, 17> kViridisStops = {{
    {0.267004, 0.004874, 0.329415},
    {0.282327, 0.094955, 0.417331},
    {0.278826, 0.175490, 0.483397},
    {0.258965, 0.251537, 0.524736},
    {0.229739, 0.322361, 0.545706},
    {0.199430, 0.387607, 0.554642},
    {0.172719, 0.448791, 0.557885},
    {0.149039, 0.508051, 0.557250},
    {0.127568, 0.566949, 0.550556},
    {0.120638, 0.625828, 0.533488},
    {0.157851, 0.683765, 0.501686},
    {0.246070, 0.738910, 0.452024},
    {0.369214, 0.788888, 0.382914},
    {0.515992, 0.831158, 0.294279},
    {0.678489, 0.863742, 0.189503},
    {0.845561, 0.887322, 0.099702},
    {0.993248, 0.906157, 0.143936},
}};

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string quoted(const std::string& s) {
  return json(s).dump(-1, ' ', false, json::error_handler_t::replace);
}

std::size_t display_width(std::string_view s) {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string pad(const std::string& s, std::size_t width) {
  const std::size_t w = display_width(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters are not allowed in XML 1.0 text.
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t') {
          out += "\xEF\xBF\xBD";
        } else {
          out += c;
        }
    }
  }
  return out;
}

// Truncates to at most `n` code points, marking the cut.
std::string shorten(const std::string& s, std::size_t n) {
  if (display_width(s) <= n) return s;
  std::string out;
  std::size_t count = 0;
  for (char c : s) {
    const bool lead = (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    if (lead && ++count > n - 1) break;
    out += c;
  }
  return out + "\xE2\x80\xA6";
}

std::string hex_color(const std::array<double, 3>& rgb) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(std::lround(rgb[0] * 255)),
                static_cast<int>(std::lround(rgb[1] * 255)),
                static_cast<int>(std::lround(rgb[2] * 255)));
  return buf;
}

std::string render_text(const HeatmapGrid& g) {
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> body(g.rows.size());
  std::size_t label_w = display_width("layer");
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    labels.push_back("L" + std::to_string(g.rows[r]));
    label_w = std::max(label_w, display_width(labels.back()));
  }
  std::vector<std::size_t> widths;
  std::vector<std::string> header;
  for (std::size_t c = 0; c < g.cols.size(); ++c) {
    header.push_back(quoted(g.cols[c]));
    widths.push_back(display_width(header.back()));
  }
  for (std::size_t r = 0; r < g.rows.size(); ++r) {
    for (std::size_t c = 0; c < g.cols.size(); ++c) {
      const HeatmapCell& cell = g.cells[r][c];
      body[r].push_back(quoted(cell.token_text) + " " + fixed3(cell.value));
      widths[c] = std::max(widths[c], display_width(body[r].back()));
    }
  }
  const auto line = [&](const std::string& label, const std::vector<std::string>& row) {
    std::string out = pad(label, label_w);
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += " | ";
      out += c + 1 == row.size() ? row[c] : pad(row[c], widths[c]);
    }
    return out + "\n";
  };
  std::string out = line("layer", header);
  for (std::size_t r = 0; r < g.rows.size(); ++r) out += line(labels[r], body[r]);
  return out;
}

std::string render_svg(const HeatmapGrid& g) {
  constexpr int kCellW = 96;
  constexpr int kCellH = 28;
  constexpr int kLeft = 56;
  constexpr int kTop = 12;
  constexpr int kBottom = 40;
  const int n_rows = static_cast<int>(g.rows.size());
  const int n_cols = static_cast<int>(g.cols.size());
  const int width = kLeft + n_cols * kCellW + 12;
  const int height = kTop + n_rows * kCellH + kBottom;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
       "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
       " " + std::to_string(height) +
       "\" font-family=\"monospace\" font-size=\"11\">\n";
  s += "<title>" + xml_escape(mode_name(g.mode)) + "</title>\n";
  for (int r = 0; r < n_rows; ++r) {
    // The first layer sits on the bottom row.
    const int y = kTop + (n_rows - 1 - r) * kCellH;
    s += "<text class=\"row-label\" x=\"" + std::to_string(kLeft - 6) + "\" y=\"" +
         std::to_string(y + kCellH / 2 + 4) + "\" text-anchor=\"end\">L" +
         std::to_string(g.rows[static_cast<std::size_t>(r)]) + "</text>\n";
    for (int c = 0; c < n_cols; ++c) {
      const HeatmapCell& cell = g.cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const int x = kLeft + c * kCellW;
      s += "<rect class=\"cell\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
           "\" width=\"" + std::to_string(kCellW) + "\" height=\"" + std::to_string(kCellH) +
           "\" fill=\"" + hex_color(viridis(cell.value)) + "\"><title>layer " +
           std::to_string(g.rows[static_cast<std::size_t>(r)]) + ", " +
           xml_escape(quoted(g.cols[static_cast<std::size_t>(c)])) + ": " +
           xml_escape(quoted(cell.token_text)) + " " + fixed3(cell.value) + "</title></rect>\n";
      s += "<text class=\"cell-label\" x=\"" + std::to_string(x + kCellW / 2) + "\" y=\"" +
           std::to_string(y + kCellH / 2 + 4) + "\" text-anchor=\"middle\" fill=\"" +
           (cell.value < 0.5 ? "#ffffff" : "#000000") + "\">" +
           xml_escape(shorten(cell.token_text, 10)) + "</text>\n";
    }
  }
  for (int c = 0; c < n_cols; ++c) {
    s += "<text class=\"col-label\" x=\"" + std::to_string(kLeft + c * kCellW + kCellW / 2) +
         "\" y=\"" + std::to_string(kTop + n_rows * kCellH + 16) + "\" text-anchor=\"middle\">" +
         xml_escape(shorten(g.cols[static_cast<std::size_t>(c)], 12)) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace

std::string_view mode_name(HeatmapMode mode) {
  switch (mode) {
    case HeatmapMode::kTopOnePerPosition: return "top1_per_position";
    case HeatmapMode::kTopKAtPosition: return "topk_at_position";
    case HeatmapMode::kTokenSets: return "token_sets";
  }
  return "unknown";
}

HeatmapMode parse_mode(std::string_view name) {
  if (name == "top1_per_position" || name == "top1") return HeatmapMode::kTopOnePerPosition;
  if (name == "topk_at_position" || name == "topk") return HeatmapMode::kTopKAtPosition;
  if (name == "token_sets" || name == "sets") return HeatmapMode::kTokenSets;
  throw HeatmapError("unknown heatmap mode '" + std::string(name) +
                     "' (expected top1_per_position, topk_at_position or token_sets)");
}

RenderFormat parse_format(std::string_view name) {
  if (name == "text") return RenderFormat::kText;
  if (name == "svg") return RenderFormat::kSvg;
  if (name == "json") return RenderFormat::kJson;
  throw HeatmapError("unknown format '" + std::string(name) + "' (expected text, svg or json)");
}

std::array<double, 3> viridis(double value) {
  const double v = std::clamp(value, 0.0, 1.0) * (kViridisStops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(v), kViridisStops.size() - 2);
  const double f = v - static_cast<double>(i);
  std::array<double, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) {
    out[c] = kViridisStops[i][c] + f * (kViridisStops[i + 1][c] - kViridisStops[i][c]);
  }
  return out;
}

HeatmapGrid build_heatmap(const ForwardTrace& trace, const HeatmapOptions& options,
                          const TokenTextFn& token_text) {
  std::map<std::pair<std::size_t, std::size_t>, const LensDistribution*> lens_at;
  std::set<std::size_t> layers_seen;
  std::set<std::size_t> positions_seen;
  for (const TraceRecord& r : trace.records()) {
    if (r.point() != InterceptPoint::kBlockOutput || !r.lens()) continue;
    lens_at[{r.layer(), r.position()}] = &*r.lens();
    layers_seen.insert(r.layer());
    positions_seen.insert(r.position());
  }
  const auto prompt = trace.prompt_tokens();
  if (prompt.empty()) throw HeatmapError("trace has no prompt tokens");
  const std::vector<std::size_t> layers =
      options.layers ? *options.layers
                     : std::vector<std::size_t>(layers_seen.begin(), layers_seen.end());
  if (layers.empty()) throw HeatmapError("trace holds no block_output lens records");

  const auto lens = [&](std::size_t layer, std::size_t pos) -> const LensDistribution& {
    const auto it = lens_at.find({layer, pos});
    if (it == lens_at.end()) {
      throw HeatmapError("no block_output lens for layer " + std::to_string(layer) +
                         ", position " + std::to_string(pos));
    }
    return *it->second;
  };
  const std::size_t last = prompt.size() - 1;
  // Number of ranks used from a distribution.
  const auto ranks = [&](std::size_t layer, const LensDistribution& d) {
    if (options.k == 0) return d.topk.size();
    if (options.k > d.topk.size()) {
      throw HeatmapError("layer " + std::to_string(layer) + " decodes only " +
                         std::to_string(d.topk.size()) + " tokens, k=" +
                         std::to_string(options.k) + " requested");
    }
    return options.k;
  };

  HeatmapGrid g;
  g.mode = options.mode;
  g.rows = layers;
  switch (options.mode) {
    case HeatmapMode::kTopOnePerPosition: {
      std::vector<std::size_t> positions =
          options.positions
              ? *options.positions
              : std::vector<std::size_t>(positions_seen.begin(), positions_seen.end());
      for (std::size_t p : positions) {
        if (p >= prompt.size()) {
          throw HeatmapError("position " + std::to_string(p) + " outside the prompt");
        }
        g.cols.push_back(token_text(prompt[p]));
      }
      for (std::size_t layer : layers) {
        auto& row = g.cells.emplace_back();
        for (std::size_t p : positions) {
          const TokenProb& top = lens(layer, p).topk.front();
          row.push_back({top.token_id, token_text(top.token_id), static_cast<double>(top.prob)});
        }
      }
      break;
    }
    case HeatmapMode::kTopKAtPosition: {
      std::size_t k = 0;
      for (std::size_t layer : layers) {
        const LensDistribution& d = lens(layer, last);
        const std::size_t n = ranks(layer, d);
        if (g.cells.empty()) k = n;
        k = std::min(k, n);
        auto& row = g.cells.emplace_back();
        for (std::size_t i = 0; i < n; ++i) {
          row.push_back({d.topk[i].token_id, token_text(d.topk[i].token_id),
                         static_cast<double>(d.topk[i].prob)});
        }
      }
      for (auto& row : g.cells) row.resize(k);
      for (std::size_t i = 1; i <= k; ++i) g.cols.push_back(std::to_string(i));
      break;
    }
    case HeatmapMode::kTokenSets: {
      if (options.token_sets.empty()) throw HeatmapError("token_sets mode needs at least one set");
      std::map<TokenId, std::size_t> owner;
      for (std::size_t j = 0; j < options.token_sets.size(); ++j) {
        const TokenSet& set = options.token_sets[j];
        if (set.ids.empty()) throw HeatmapError("token set '" + set.name + "' is empty");
        for (TokenId id : set.ids) {
          const auto [it, inserted] = owner.emplace(id, j);
          if (!inserted) {
            throw HeatmapError("token " + std::to_string(id) + " is in both '" +
                               options.token_sets[it->second].name + "' and '" + set.name +
                               "'; token sets must be disjoint");
          }
        }
        g.cols.push_back(set.name);
      }
      for (std::size_t layer : layers) {
        const LensDistribution& d = lens(layer, last);
        const std::size_t n = ranks(layer, d);
        double z = 0.0;
        std::vector<double> mass(options.token_sets.size(), 0.0);
        std::vector<const TokenProb*> best(options.token_sets.size(), nullptr);
        for (std::size_t i = 0; i < n; ++i) {
          const TokenProb& tp = d.topk[i];
          z += tp.prob;
          if (const auto it = owner.find(tp.token_id); it != owner.end()) {
            mass[it->second] += tp.prob;
            if (best[it->second] == nullptr) best[it->second] = &tp;
          }
        }
        auto& row = g.cells.emplace_back();
        for (std::size_t j = 0; j < mass.size(); ++j) {
          HeatmapCell cell;
          if (best[j] != nullptr) {
            cell.token_id = best[j]->token_id;
            cell.token_text = token_text(best[j]->token_id);
          }
          cell.value = z > 0.0 ? mass[j] / z : 0.0;
          row.push_back(std::move(cell));
        }
        g.z.push_back(z);
      }
      break;
    }
  }
  return g;
}

std::string render_heatmap(const HeatmapGrid& grid, RenderFormat format) {
  switch (format) {
    case RenderFormat::kText: return render_text(grid);
    case RenderFormat::kSvg: return render_svg(grid);
    case RenderFormat::kJson: return grid_to_json(grid).dump(2) + "\n";
  }
  return {};
}

json grid_to_json(const HeatmapGrid& g) {
  json cells = json::array();
  for (const auto& row : g.cells) {
    json jr = json::array();
    for (const HeatmapCell& c : row) {
      jr.push_back({{"token_id", c.token_id}, {"token_text", c.token_text}, {"value", c.value}});
    }
    cells.push_back(std::move(jr));
  }
  return {{"mode", mode_name(g.mode)},
          {"rows", g.rows},
          {"cols", g.cols},
          {"cells", std::move(cells)},
          {"z", g.z}};
}

HeatmapGrid grid_from_json(const json& j) {
  try {
    HeatmapGrid g;
    g.mode = parse_mode(j.at("mode").get<std::string>());
    g.rows = j.at("rows").get<std::vector<std::size_t>>();
    g.cols = j.at("cols").get<std::vector<std::string>>();
    g.z = j.at("z").get<std::vector<double>>();
    const json& cells = j.at("cells");
    if (!cells.is_array() || cells.size() != g.rows.size()) {
      throw HeatmapError("grid 'cells' must have one row per layer");
    }
    for (const json& jr : cells) {
      if (!jr.is_array() || jr.size() != g.cols.size()) {
        throw HeatmapError("grid row must have one cell per column");
      }
      auto& row = g.cells.emplace_back();
      for (const json& jc : jr) {
        HeatmapCell c{jc.at("token_id").get<TokenId>(), jc.at("token_text").get<std::string>(),
                      jc.at("value").get<double>()};
        if (!(c.value >= 0.0 && c.value <= 1.0)) {
          throw HeatmapError("grid cell value outside [0, 1]");
        }
        row.push_back(std::move(c));
      }
    }
    if (!g.z.empty() && g.z.size() != g.rows.size()) {
      throw HeatmapError("grid 'z' must be empty or have one entry per row");
    }
    return g;
  } catch (const json::exception& e) {
    throw HeatmapError(std::string("malformed grid JSON: ") + e.what());
  }
}

}  // namespace lensforge
