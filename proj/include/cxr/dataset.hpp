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
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cxr/digest.hpp"
#include "cxr/errors.hpp"
#include "cxr/random.hpp"

namespace cxr::data {

// Index order is fixed: it is the row/column order of every confusion matrix.
enum class ClassLabel : std::uint8_t {
  Covid19 = 0,
  Normal = 1,
  ViralPneumonia = 2,
  BacterialPneumonia = 3,
};

inline constexpr std::size_t kNumClasses = 4;

inline constexpr std::array<std::string_view, kNumClasses> kLabelNames = {"covid19", "normal",
                                                                          "viral", "bacterial"};

// Composition of the curated four-class chest X-ray corpus the methodology was
// evaluated on, in ClassLabel order.
inline constexpr std::array<std::size_t, kNumClasses> kReferenceCorpusCounts = {1281, 1300, 1300,
                                                                                1300};

inline std::size_t index_of(ClassLabel label) { return static_cast<std::size_t>(label); }

inline ClassLabel label_from_index(std::size_t i) {
  if (i >= kNumClasses) throw ConfigError("class index out of range: " + std::to_string(i));
  return static_cast<ClassLabel>(i);
}

inline std::string_view label_name(ClassLabel label) { return kLabelNames[index_of(label)]; }

inline std::optional<ClassLabel> parse_label(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (lower == kLabelNames[i]) return static_cast<ClassLabel>(i);
  return std::nullopt;
}

struct Sample {
  std::string path;
  ClassLabel label;
};

struct Manifest {
  std::vector<Sample> samples;
  std::string source_digest;  // sha256 of the raw manifest bytes
  std::filesystem::path base_dir;

  std::size_t size() const { return samples.size(); }

  std::filesystem::path resolve(std::size_t i) const {
    std::filesystem::path p(samples[i].path);
    return p.is_absolute() ? p : base_dir / p;
  }

  std::vector<ClassLabel> labels() const {
    std::vector<ClassLabel> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Splits text into lines, dropping a UTF-8 BOM and carriage returns.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// Locates named columns in a CSV header line. Missing names raise an
// IngestionError on line 1.
inline std::vector<std::size_t> header_columns(std::string_view header,
                                               std::span<const std::string_view> names) {
  const auto fields = split_commas(header);
  std::vector<std::size_t> cols;
  for (auto name : names) {
    auto it = std::find_if(fields.begin(), fields.end(), [&](std::string_view f) {
      return f.size() == name.size() &&
             std::equal(f.begin(), f.end(), name.begin(), [](char a, char b) {
               return std::tolower(static_cast<unsigned char>(a)) == b;
             });
    });
    if (it == fields.end())
      throw IngestionError("header is missing column '" + std::string(name) + "'", 1);
    cols.push_back(static_cast<std::size_t>(it - fields.begin()));
  }
  return cols;
}

}  // namespace detail

// Parses a `path,label` CSV. Sample order follows the file.
inline Manifest load_manifest(std::string_view csv, std::filesystem::path base_dir = {}) {
  Manifest m;
  m.source_digest = sha256_hex(csv);
  m.base_dir = std::move(base_dir);

  const auto lines = detail::split_lines(csv);
  if (lines.empty()) throw IngestionError("empty manifest", 1);
  static constexpr std::array<std::string_view, 2> kColumns = {"path", "label"};
  const auto cols = detail::header_columns(lines[0], kColumns);
  const std::size_t need = std::max(cols[0], cols[1]) + 1;

  std::unordered_set<std::string> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (detail::trim(lines[i]).empty()) continue;
    const auto fields = detail::split_commas(lines[i]);
    if (fields.size() < need) throw IngestionError("missing column", line_no);
    const std::string path(fields[cols[0]]);
    if (path.empty()) throw IngestionError("empty path", line_no);
    const auto label = parse_label(fields[cols[1]]);
    if (!label)
      throw IngestionError("unknown label '" + std::string(fields[cols[1]]) + "'", line_no);
    if (!seen.insert(path).second) throw IngestionError("duplicate path '" + path + "'", line_no);
    m.samples.push_back({path, *label});
  }
  return m;
}

inline std::array<std::size_t, kNumClasses> class_counts(std::span<const ClassLabel> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto l : labels) ++counts[index_of(l)];
  return counts;
}

inline std::array<std::size_t, kNumClasses> class_counts(const Manifest& m) {
  return class_counts(m.labels());
}

// Partition of sample indices into K stratified folds. Each fold is sorted.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::vector<std::size_t>> folds;
  std::uint64_t seed = 0;

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

inline constexpr std::uint64_t kFoldStreamTag = 0x666f6c64;

// Per class, shuffles the class's indices with a stream keyed by (seed, class)
// and deals them round-robin. The deal position carries over between classes
// so overall fold sizes also differ by at most one.
inline FoldPlan stratified_kfold(std::span<const ClassLabel> labels, std::size_t k,
                                 std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (k < 2) throw ConfigError("stratified_kfold: K must be >= 2");
  if (k > n)
    throw ConfigError("stratified_kfold: K=" + std::to_string(k) + " exceeds sample count " +
                      std::to_string(n));

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);

  std::size_t next = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (index_of(labels[i]) == c) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < k)
      warn("class '" + std::string(kLabelNames[c]) + "' has " + std::to_string(members.size()) +
           " samples, fewer than K=" + std::to_string(k) + "; some folds will miss it");
    KeyedStream rng{kFoldStreamTag, seed, c};
    rng.shuffle(members);
    for (std::size_t idx : members) {
      plan.folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

inline FoldPlan stratified_kfold(const Manifest& m, std::size_t k, std::uint64_t seed) {
  const auto labels = m.labels();
  return stratified_kfold(labels, k, seed);
}

// Roles of every sample for one cross-validation round.
struct SplitAssignment {
  std::size_t fold = 0;
  std::vector<std::size_t> test;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> train;
};

// test = fold k, validation = fold (k+1) mod K, train = the rest.
inline SplitAssignment make_splits(const FoldPlan& plan, std::size_t k) {
  if (k >= plan.k)
    throw ConfigError("make_splits: fold index " + std::to_string(k) + " out of range for K=" +
                      std::to_string(plan.k));
  SplitAssignment s;
  s.fold = k;
  s.test = plan.folds[k];
  const std::size_t val = (k + 1) % plan.k;
  s.validation = plan.folds[val];
  for (std::size_t f = 0; f < plan.k; ++f)
    if (f != k && f != val) s.train.insert(s.train.end(), plan.folds[f].begin(), plan.folds[f].end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

}  // namespace cxr::data
