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
#include <cstdint>
#include <numbers>

#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/random.hpp"

namespace cxr::augment {

using imaging::GrayImage;

struct AugmentParams {
  double max_rotation_deg = 20.0;
  double shear_range = 0.2;
  double hflip_probability = 0.5;

  void validate() const {
    if (!(max_rotation_deg >= 0.0) || !std::isfinite(max_rotation_deg))
      throw ConfigError("augment: max_rotation_deg must be >= 0");
    if (!(shear_range >= 0.0) || !std::isfinite(shear_range))
      throw ConfigError("augment: shear_range must be >= 0");
    if (!(hflip_probability >= 0.0 && hflip_probability <= 1.0))
      throw ConfigError("augment: hflip_probability must be in [0, 1]");
  }
};

// One sampled, replayable transform.
struct AugmentSpec {
  bool flip = false;
  double rotation_deg = 0.0;
  double shear = 0.0;

  bool is_identity() const { return !flip && rotation_deg == 0.0 && shear == 0.0; }
  friend bool operator==(const AugmentSpec&, const AugmentSpec&) = default;
};

struct AugmentKey {
  std::uint64_t global_seed = 0;
  std::uint64_t fold = 0;
  std::uint64_t epoch = 0;
  std::uint64_t sample_index = 0;
};

// Domain tag keeping augmentation draws apart from other keyed streams.
inline constexpr std::uint64_t kAugmentStreamTag = 0x61756700;

inline AugmentSpec sample_augment(const AugmentParams& params, const AugmentKey& key) {
  KeyedStream rng{kAugmentStreamTag, key.global_seed, key.fold, key.epoch, key.sample_index};
  AugmentSpec spec;
  spec.rotation_deg = params.max_rotation_deg * (2.0 * rng.uniform() - 1.0);
  spec.shear = params.shear_range * (2.0 * rng.uniform() - 1.0);
  spec.flip = rng.uniform() < params.hflip_probability;
  // degenerate ranges can produce -0.0
  if (spec.rotation_deg == 0.0) spec.rotation_deg = 0.0;
  if (spec.shear == 0.0) spec.shear = 0.0;
  return spec;
}

namespace detail {

// Bilinear sample treating everything outside the raster as 0.
inline double sample_zero_fill(const GrayImage& img, double x, double y) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  if (fx < -1.0 || fy < -1.0 || fx >= static_cast<double>(img.width) ||
      fy >= static_cast<double>(img.height))
    return 0.0;
  const auto x0 = static_cast<long long>(fx);
  const auto y0 = static_cast<long long>(fy);
  const auto w = static_cast<long long>(img.width);
  const auto h = static_cast<long long>(img.height);
  auto px = [&](long long xx, long long yy) -> double {
    if (xx < 0 || yy < 0 || xx >= w || yy >= h) return 0.0;
    return img.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
  };
  const double tx = x - fx;
  const double ty = y - fy;
  const double top = px(x0, y0) + tx * (px(x0 + 1, y0) - px(x0, y0));
  const double bot = px(x0, y0 + 1) + tx * (px(x0 + 1, y0 + 1) - px(x0, y0 + 1));
  return top + ty * (bot - top);
}

}  // namespace detail

// Applies flip(rotate(shear(p))) about the image center by inverse mapping.
// Source positions outside the image read as 0. Dimensions are unchanged.
inline GrayImage apply_affine(const GrayImage& img, const AugmentSpec& spec) {
  if (img.empty()) throw ConfigError("apply_affine: empty image");
  if (spec.rotation_deg == 0.0 && spec.shear == 0.0) {
    if (!spec.flip) return img;
    GrayImage out(img.width, img.height);
    for (std::size_t y = 0; y < img.height; ++y)
      for (std::size_t x = 0; x < img.width; ++x) out.at(x, y) = img.at(img.width - 1 - x, y);
    return out;
  }

  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = 0.5 * static_cast<double>(img.width - 1);
  const double cy = 0.5 * static_cast<double>(img.height - 1);

  GrayImage out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double ux = static_cast<double>(x) - cx;
      const double uy = static_cast<double>(y) - cy;
      if (spec.flip) ux = -ux;
      // inverse rotation
      const double vx = c * ux + s * uy;
      const double vy = -s * ux + c * uy;
      // inverse shear
      const double sx = vx - spec.shear * vy;
      const double v = detail::sample_zero_fill(img, sx + cx, vy + cy);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

}  // namespace cxr::augment
