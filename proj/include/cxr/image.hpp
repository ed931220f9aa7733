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
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "cxr/errors.hpp"

namespace cxr::imaging {

// Grayscale raster with intensities normalized to [0, 1], stored row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, float fill = 0.0f)
      : width(w), height(h), pixels(w * h, fill) {}
  GrayImage(std::size_t w, std::size_t h, std::vector<float> data)
      : width(w), height(h), pixels(std::move(data)) {
    if (pixels.size() != w * h)
      throw ConfigError("GrayImage: pixel count does not match " + std::to_string(w) + "x" +
                        std::to_string(h));
  }

  bool empty() const noexcept { return pixels.empty(); }
  float& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("read failed for " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

namespace detail {

class PgmHeaderReader {
 public:
  explicit PgmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const { return pos_; }

  void skip_whitespace_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_whitespace_and_comments();
    const std::size_t start = pos_;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 30)) throw ParseError(std::string("PGM ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PGM expected ") + field, start);
    return value;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ParseError("PGM expected whitespace after maxval", pos_);
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

}  // namespace detail

// Decodes a binary ("P5") PGM. Samples are divided by maxval.
inline GrayImage load_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
    throw ParseError("unsupported image magic (expected binary PGM \"P5\")", 0);
  detail::PgmHeaderReader hdr(bytes);
  const std::size_t width = hdr.read_uint("width");
  const std::size_t height = hdr.read_uint("height");
  const std::size_t maxval_at = hdr.pos();
  const std::size_t maxval = hdr.read_uint("maxval");
  if (maxval == 0 || maxval > 65535) throw ParseError("PGM maxval out of range", maxval_at);
  if (width == 0 || height == 0) throw ParseError("PGM has zero dimension", maxval_at);
  hdr.expect_single_whitespace();

  const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
  const std::size_t offset = hdr.pos();
  const std::size_t need = width * height * sample_bytes;
  if (bytes.size() - offset < need)
    throw ParseError("PGM payload truncated (need " + std::to_string(need) + " bytes, have " +
                         std::to_string(bytes.size() - offset) + ")",
                     bytes.size());

  GrayImage img(width, height);
  const double scale = 1.0 / static_cast<double>(maxval);
  const std::uint8_t* p = bytes.data() + offset;
  for (std::size_t i = 0; i < width * height; ++i) {
    std::size_t v = sample_bytes == 2 ? (std::size_t{p[2 * i]} << 8) | p[2 * i + 1] : p[i];
    if (v > maxval) throw ParseError("PGM sample exceeds maxval", offset + i * sample_bytes);
    img.pixels[i] = static_cast<float>(static_cast<double>(v) * scale);
  }
  return img;
}

// Encodes as binary PGM with maxval 255 or 65535; samples are rounded half up.
inline std::vector<std::uint8_t> save_pgm(const GrayImage& img, unsigned maxval = 255) {
  if (maxval != 255 && maxval != 65535) throw ConfigError("save_pgm: maxval must be 255 or 65535");
  const std::string header = "P5\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n" + std::to_string(maxval) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.pixels.size() * (maxval > 255 ? 2 : 1));
  for (float px : img.pixels) {
    const double clamped = std::clamp(static_cast<double>(px), 0.0, 1.0);
    const auto v = static_cast<std::uint32_t>(std::floor(clamped * maxval + 0.5));
    if (maxval > 255) out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  return out;
}

inline GrayImage load_pgm_file(const std::filesystem::path& path) {
  try {
    return load_pgm(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

// Bilinear sample with edge clamping. x, y are pixel-center coordinates.
inline double sample_clamped(const GrayImage& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const auto x0 = static_cast<std::size_t>(x);
  const auto y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = img.at(x0, y0) + fx * (img.at(x1, y0) - img.at(x0, y0));
  const double bot = img.at(x0, y1) + fx * (img.at(x1, y1) - img.at(x0, y1));
  return top + fy * (bot - top);
}

}  // namespace cxr::imaging
