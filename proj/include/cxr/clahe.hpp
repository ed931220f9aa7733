//*****************************************************************************
// Copyright 2026 The cxr Authors
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
//*****************************************************************************
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cxr/errors.hpp"
#include "cxr/image.hpp"

namespace cxr::imaging {

struct ClaheParams {
  std::size_t tile_rows = 8;
  std::size_t tile_cols = 8;
  // Clip limit as a multiple of the uniform bin height (tile pixels / n_bins).
  double clip_factor = 2.0;
  std::size_t n_bins = 256;

  void validate() const {
    if (tile_rows < 1 || tile_cols < 1) throw ConfigError("clahe: tile grid must be at least 1x1");
    if (n_bins < 2) throw ConfigError("clahe: n_bins must be >= 2");
    if (!(clip_factor >= 1.0) || !std::isfinite(clip_factor))
      throw ConfigError("clahe: clip_factor must be a finite value >= 1");
  }
};

inline std::size_t intensity_bin(double v, std::size_t n_bins) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * static_cast<double>(n_bins));
  return std::min(static_cast<std::size_t>(scaled), n_bins - 1);
}

// Caps every bin at `limit` and spreads the removed mass uniformly over all
// bins in a single pass. Bins may end slightly above the limit.
inline std::vector<double> clip_histogram(std::span<const double> hist, double limit) {
  std::vector<double> out(hist.begin(), hist.end());
  if (out.empty()) return out;
  double excess = 0.0;
  for (double& h : out) {
    if (h > limit) {
      excess += h - limit;
      h = limit;
    }
  }
  const double share = excess / static_cast<double>(out.size());
  for (double& h : out) h += share;
  return out;
}

// Gray-level mapping of one tile: level -> (p_max - p_min) * G(level) + p_min,
// with G the cumulative distribution of the clipped tile histogram.
struct TileMapping {
  double p_min = 0.0;
  double p_max = 0.0;
  std::vector<double> lut;  // indexed by intensity bin

  double operator()(double v) const { return lut[intensity_bin(v, lut.size())]; }
};

template <typename Pixels>
TileMapping tile_mapping(const Pixels& values, const ClaheParams& params) {
  TileMapping m;
  std::vector<double> hist(params.n_bins, 0.0);
  m.p_min = 1.0;
  m.p_max = 0.0;
  std::size_t count = 0;
  for (const auto v : values) {
    hist[intensity_bin(v, params.n_bins)] += 1.0;
    m.p_min = std::min<double>(m.p_min, v);
    m.p_max = std::max<double>(m.p_max, v);
    ++count;
  }
  if (count == 0) throw ConfigError("clahe: empty tile");

  const double limit = params.clip_factor * static_cast<double>(count) /
                       static_cast<double>(params.n_bins);
  const std::vector<double> clipped = clip_histogram(hist, limit);

  double total = 0.0;
  for (double h : clipped) total += h;
  m.lut.resize(params.n_bins);
  double running = 0.0;
  const double range = m.p_max - m.p_min;
  for (std::size_t b = 0; b < params.n_bins; ++b) {
    running += clipped[b];
    const double g = std::min(running / total, 1.0);
    m.lut[b] = range * g + m.p_min;
  }
  return m;
}

namespace detail {

// For each coordinate along one axis, the two nearest tile centers and the
// interpolation weight toward the second one. Clamped at the borders.
struct AxisBlend {
  std::vector<std::size_t> lo, hi;
  std::vector<double> w;
};

inline std::vector<std::size_t> tile_edges(std::size_t extent, std::size_t tiles) {
  std::vector<std::size_t> edges(tiles + 1);
  for (std::size_t i = 0; i <= tiles; ++i) edges[i] = i * extent / tiles;
  return edges;
}

inline AxisBlend axis_blend(std::size_t extent, const std::vector<std::size_t>& edges) {
  const std::size_t tiles = edges.size() - 1;
  std::vector<double> centers(tiles);
  for (std::size_t i = 0; i < tiles; ++i)
    centers[i] = 0.5 * static_cast<double>(edges[i] + edges[i + 1] - 1);

  AxisBlend ab;
  ab.lo.resize(extent);
  ab.hi.resize(extent);
  ab.w.resize(extent);
  std::size_t t = 0;
  for (std::size_t p = 0; p < extent; ++p) {
    const double pos = static_cast<double>(p);
    while (t + 1 < tiles && centers[t + 1] <= pos) ++t;
    if (pos <= centers[0]) {
      ab.lo[p] = ab.hi[p] = 0;
      ab.w[p] = 0.0;
    } else if (t + 1 >= tiles) {
      ab.lo[p] = ab.hi[p] = tiles - 1;
      ab.w[p] = 0.0;
    } else {
      ab.lo[p] = t;
      ab.hi[p] = t + 1;
      ab.w[p] = (pos - centers[t]) / (centers[t + 1] - centers[t]);
    }
  }
  return ab;
}

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace detail

// Contrast-limited adaptive histogram equalization. Each tile gets its own
// clipped-CDF mapping; every pixel blends the mappings of the (up to four)
// nearest tile centers bilinearly.
inline GrayImage clahe(const GrayImage& img, const ClaheParams& params) {
  params.validate();
  if (img.height < params.tile_rows || img.width < params.tile_cols)
    throw ConfigError("clahe: image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " smaller than tile grid " +
                      std::to_string(params.tile_cols) + "x" + std::to_string(params.tile_rows));

  const auto row_edges = detail::tile_edges(img.height, params.tile_rows);
  const auto col_edges = detail::tile_edges(img.width, params.tile_cols);

  std::vector<TileMapping> maps;
  maps.reserve(params.tile_rows * params.tile_cols);
  std::vector<float> tile;
  for (std::size_t ty = 0; ty < params.tile_rows; ++ty) {
    for (std::size_t tx = 0; tx < params.tile_cols; ++tx) {
      tile.clear();
      for (std::size_t y = row_edges[ty]; y < row_edges[ty + 1]; ++y)
        for (std::size_t x = col_edges[tx]; x < col_edges[tx + 1]; ++x)
          tile.push_back(img.at(x, y));
      maps.push_back(tile_mapping(tile, params));
    }
  }

  const auto rows = detail::axis_blend(img.height, row_edges);
  const auto cols = detail::axis_blend(img.width, col_edges);
  auto map_at = [&](std::size_t ty, std::size_t tx, std::size_t bin) {
    return maps[ty * params.tile_cols + tx].lut[bin];
  };

  GrayImage out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const std::size_t bin = intensity_bin(img.at(x, y), params.n_bins);
      const double top = detail::lerp(map_at(rows.lo[y], cols.lo[x], bin),
                                      map_at(rows.lo[y], cols.hi[x], bin), cols.w[x]);
      const double bottom = detail::lerp(map_at(rows.hi[y], cols.lo[x], bin),
                                         map_at(rows.hi[y], cols.hi[x], bin), cols.w[x]);
      out.at(x, y) = static_cast<float>(std::clamp(detail::lerp(top, bottom, rows.w[y]), 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace cxr::imaging
