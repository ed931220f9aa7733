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

#include "cxr/errors.hpp"
#include "cxr/image.hpp"

namespace cxr::imaging {

// Placement of the scaled content inside the square output canvas.
struct ContentBox {
  std::size_t left = 0;
  std::size_t top = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

// Scales the longer side to `target` and centers the result. Odd padding
// remainders go to the bottom/right.
inline ContentBox content_box(std::size_t width, std::size_t height, std::size_t target) {
  const double s = static_cast<double>(target) / static_cast<double>(std::max(width, height));
  auto scaled = [&](std::size_t side) {
    if (side == std::max(width, height)) return target;
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(side * s)), 1, target);
  };
  ContentBox box;
  box.width = scaled(width);
  box.height = scaled(height);
  box.left = (target - box.width) / 2;
  box.top = (target - box.height) / 2;
  return box;
}

// Proportional resize to target x target with a black (0) border filling the
// shorter dimension. Content is resampled bilinearly at pixel centers.
inline GrayImage resize_preserve_aspect(const GrayImage& img, std::size_t target) {
  if (img.empty()) throw ConfigError("resize_preserve_aspect: empty image");
  if (target == 0) throw ConfigError("resize_preserve_aspect: target must be >= 1");

  const ContentBox box = content_box(img.width, img.height, target);
  const double sx = static_cast<double>(img.width) / static_cast<double>(box.width);
  const double sy = static_cast<double>(img.height) / static_cast<double>(box.height);

  GrayImage out(target, target, 0.0f);
  for (std::size_t y = 0; y < box.height; ++y) {
    const double src_y = (static_cast<double>(y) + 0.5) * sy - 0.5;
    for (std::size_t x = 0; x < box.width; ++x) {
      const double src_x = (static_cast<double>(x) + 0.5) * sx - 0.5;
      out.at(box.left + x, box.top + y) = static_cast<float>(sample_clamped(img, src_x, src_y));
    }
  }
  return out;
}

}  // namespace cxr::imaging
