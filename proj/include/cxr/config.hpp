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

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <string_view>

#include "cxr/augmentation.hpp"
#include "cxr/clahe.hpp"
#include "cxr/classifier.hpp"
#include "cxr/dataset.hpp"
#include "cxr/digest.hpp"
#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/report.hpp"

namespace cxr {

inline constexpr std::string_view kBuiltinBackend = "builtin";

// Whole experiment, parsed from a flat `key = value` file. Dotted prefixes
// select the component (clahe., augment., train., backend.). Keys under
// `model.` are free-form metadata (architecture name, parameter counts, ...)
// carried into the run record without interpretation.
struct ExperimentConfig {
  std::filesystem::path manifest_path;
  std::filesystem::path output_dir;
  std::size_t k = 10;
  std::uint64_t global_seed = 0;
  std::size_t image_side = 512;
  imaging::ClaheParams clahe;
  augment::AugmentParams augment;
  model::TrainConfig train;
  std::string backend = std::string(kBuiltinBackend);
  double backend_timeout_s = 1800.0;
  std::map<std::string, std::string> metadata;

  bool builtin_backend() const { return backend == kBuiltinBackend; }
  std::filesystem::path cache_dir() const { return output_dir / "cache"; }

  void validate() const {
    if (manifest_path.empty()) throw ConfigError("config: 'manifest' is required");
    if (output_dir.empty()) throw ConfigError("config: 'output_dir' is required");
    if (k < 2) throw ConfigError("config: k must be >= 2");
    if (image_side < 1) throw ConfigError("config: image_side must be >= 1");
    clahe.validate();
    augment.validate();
    train.validate();
    if (image_side < clahe.tile_rows || image_side < clahe.tile_cols)
      throw ConfigError("config: image_side smaller than the CLAHE tile grid");
    if (builtin_backend() && image_side % train.feature_grid != 0)
      throw ConfigError("config: image_side must be divisible by train.feature_grid");
    if (backend.empty()) throw ConfigError("config: backend must be 'builtin' or a command line");
    if (!(backend_timeout_s > 0.0)) throw ConfigError("config: backend.timeout_s must be > 0");
  }

  // Stable key = value rendering of every setting that affects results (the
  // output location does not); hashed into the run record.
  std::string canonical() const {
    std::string out;
    auto kv = [&](std::string_view key, const std::string& value) {
      out.append(key).append(" = ").append(value).append("\n");
    };
    auto num = [](double v) { return eval::format_real(v); };
    kv("manifest", manifest_path.generic_string());
    kv("k", std::to_string(k));
    kv("seed", std::to_string(global_seed));
    kv("image_side", std::to_string(image_side));
    kv("clahe.tile_rows", std::to_string(clahe.tile_rows));
    kv("clahe.tile_cols", std::to_string(clahe.tile_cols));
    kv("clahe.clip_factor", num(clahe.clip_factor));
    kv("clahe.n_bins", std::to_string(clahe.n_bins));
    kv("augment.max_rotation_deg", num(augment.max_rotation_deg));
    kv("augment.shear_range", num(augment.shear_range));
    kv("augment.hflip_probability", num(augment.hflip_probability));
    kv("train.epochs", std::to_string(train.epochs));
    kv("train.batch_size", std::to_string(train.batch_size));
    kv("train.lr", num(train.lr));
    kv("train.beta1", num(train.beta1));
    kv("train.beta2", num(train.beta2));
    kv("train.epsilon", num(train.epsilon));
    kv("train.feature_grid", std::to_string(train.feature_grid));
    kv("backend", backend);
    kv("backend.timeout_s", num(backend_timeout_s));
    for (const auto& [key, value] : metadata) kv(key, value);
    return out;
  }

  std::string digest() const { return sha256_hex(canonical()); }

  // Identifies everything that affects a preprocessed cache image.
  std::string preprocessing_fingerprint() const {
    return "cxr-preprocess-v1;pgm16;side=" + std::to_string(image_side) +
           ";tiles=" + std::to_string(clahe.tile_rows) + "x" + std::to_string(clahe.tile_cols) +
           ";clip=" + eval::format_real(clahe.clip_factor) +
           ";bins=" + std::to_string(clahe.n_bins);
  }
};

namespace detail {

template <typename T>
T parse_integer(std::string_view key, std::string_view v, std::size_t line) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config line " + std::to_string(line) + ": '" + std::string(key) +
                      "' expects a nonnegative integer, got '" + std::string(v) + "'");
  return out;
}

inline double parse_real(std::string_view key, std::string_view v, std::size_t line) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(std::string(v), &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size())
    throw ConfigError("config line " + std::to_string(line) + ": '" + std::string(key) +
                      "' expects a number, got '" + std::string(v) + "'");
  return out;
}

}  // namespace detail

// Relative paths in the file are resolved against `base_dir` (normally the
// directory holding the config file).
inline ExperimentConfig parse_config(std::string_view text,
                                     const std::filesystem::path& base_dir = {}) {
  ExperimentConfig cfg;
  auto path_value = [&](std::string_view v) {
    std::filesystem::path p{std::string(v)};
    return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
  };

  using Setter = std::function<void(std::string_view, std::string_view, std::size_t)>;
  auto size_key = [](std::size_t& dst) -> Setter {
    return [&dst](auto k, auto v, auto l) { dst = detail::parse_integer<std::size_t>(k, v, l); };
  };
  auto real_key = [](double& dst) -> Setter {
    return [&dst](auto k, auto v, auto l) { dst = detail::parse_real(k, v, l); };
  };
  const std::map<std::string, Setter, std::less<>> setters = {
      {"manifest", [&](auto, auto v, auto) { cfg.manifest_path = path_value(v); }},
      {"output_dir", [&](auto, auto v, auto) { cfg.output_dir = path_value(v); }},
      {"k", size_key(cfg.k)},
      {"seed",
       [&](auto k, auto v, auto l) { cfg.global_seed = detail::parse_integer<std::uint64_t>(k, v, l); }},
      {"image_side", size_key(cfg.image_side)},
      {"clahe.tile_rows", size_key(cfg.clahe.tile_rows)},
      {"clahe.tile_cols", size_key(cfg.clahe.tile_cols)},
      {"clahe.clip_factor", real_key(cfg.clahe.clip_factor)},
      {"clahe.n_bins", size_key(cfg.clahe.n_bins)},
      {"augment.max_rotation_deg", real_key(cfg.augment.max_rotation_deg)},
      {"augment.shear_range", real_key(cfg.augment.shear_range)},
      {"augment.hflip_probability", real_key(cfg.augment.hflip_probability)},
      {"train.epochs", size_key(cfg.train.epochs)},
      {"train.batch_size", size_key(cfg.train.batch_size)},
      {"train.lr", real_key(cfg.train.lr)},
      {"train.beta1", real_key(cfg.train.beta1)},
      {"train.beta2", real_key(cfg.train.beta2)},
      {"train.epsilon", real_key(cfg.train.epsilon)},
      {"train.feature_grid", size_key(cfg.train.feature_grid)},
      {"backend", [&](auto, auto v, auto) { cfg.backend = std::string(v); }},
      {"backend.timeout_s", real_key(cfg.backend_timeout_s)},
  };

  const auto lines = data::detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = data::detail::trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = data::detail::trim(line.substr(0, eq));
    const auto value = data::detail::trim(line.substr(eq + 1));
    if (key.starts_with("model.")) {
      cfg.metadata[std::string(key)] = std::string(value);
      continue;
    }
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" +
                        std::string(key) + "'");
    it->second(key, value, line_no);
  }
  cfg.train.seed = cfg.global_seed;
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text, path.parent_path());
}

}  // namespace cxr
