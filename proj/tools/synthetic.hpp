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
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>

#include "cxr/dataset.hpp"
#include "cxr/image.hpp"
#include "cxr/random.hpp"

// Four-class toy radiograph corpus: a dim noisy background with one bright
// Gaussian blob whose vertical position depends on the class. The blob sits
// on the vertical midline so horizontal flips keep it separable.
namespace cxr::synthetic {

struct CorpusSpec {
  std::size_t per_class = 100;
  std::size_t side = 128;
  std::uint64_t seed = 7;
  double background = 0.15;
  double noise_sigma = 0.05;
  double blob_amplitude = 0.7;
  double blob_sigma_frac = 0.055;
  double jitter_frac = 0.025;
};

inline constexpr std::uint64_t kSyntheticStreamTag = 0x73796e74;

inline imaging::GrayImage make_image(const CorpusSpec& spec, std::size_t cls, std::size_t index) {
  KeyedStream rng{kSyntheticStreamTag, spec.seed, cls, index};
  const auto side = static_cast<double>(spec.side);
  const double jitter = spec.jitter_frac * side;
  const double bx = 0.5 * side + rng.uniform(-jitter, jitter);
  const double by = (0.2 + 0.2 * static_cast<double>(cls)) * side + rng.uniform(-jitter, jitter);
  const double sigma = spec.blob_sigma_frac * side;

  imaging::GrayImage img(spec.side, spec.side);
  for (std::size_t y = 0; y < spec.side; ++y) {
    for (std::size_t x = 0; x < spec.side; ++x) {
      // Box-Muller
      const double u1 = std::max(rng.uniform(), 1e-300);
      const double u2 = rng.uniform();
      const double gauss = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      const double dx = static_cast<double>(x) - bx;
      const double dy = static_cast<double>(y) - by;
      const double blob = spec.blob_amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      img.at(x, y) = static_cast<float>(
          std::clamp(spec.background + blob + spec.noise_sigma * gauss, 0.0, 1.0));
    }
  }
  return img;
}

struct CorpusFiles {
  std::filesystem::path manifest;
  std::filesystem::path config;
};

// Writes images/, manifest.csv and an experiment config (5 folds, 30 epochs,
// builtin backend, images kept at their native side) into `dir`.
inline CorpusFiles write_corpus(const std::filesystem::path& dir, const CorpusSpec& spec,
                                const std::string& output_dir = "out") {
  std::filesystem::create_directories(dir / "images");
  std::string manifest = "path,label\n";
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < data::kNumClasses; ++c) {
      const std::string rel = "images/" + std::string(data::kLabelNames[c]) + "_" +
                              std::to_string(i) + ".pgm";
      imaging::write_file(dir / rel, imaging::save_pgm(make_image(spec, c, i), 255));
      manifest += rel + "," + std::string(data::kLabelNames[c]) + "\n";
    }
  }
  CorpusFiles files{dir / "manifest.csv", dir / "experiment.cfg"};
  imaging::write_file(files.manifest,
                      std::span(reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()));
  const std::string cfg =
      "# synthetic four-class corpus\n"
      "manifest = manifest.csv\n"
      "output_dir = " + output_dir + "\n"
      "k = 5\n"
      "seed = " + std::to_string(spec.seed) + "\n"
      "image_side = " + std::to_string(spec.side) + "\n"
      "train.epochs = 30\n"
      "train.batch_size = 16\n"
      "train.feature_grid = 32\n";
  imaging::write_file(files.config,
                      std::span(reinterpret_cast<const std::uint8_t*>(cfg.data()), cfg.size()));
  return files;
}

}  // namespace cxr::synthetic
