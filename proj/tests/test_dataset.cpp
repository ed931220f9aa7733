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
#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "cxr/dataset.hpp"
#include "cxr/random.hpp"

namespace cxr::data {
namespace {

std::vector<ClassLabel> make_labels(std::initializer_list<std::size_t> counts) {
  std::vector<ClassLabel> out;
  std::size_t c = 0;
  for (auto n : counts) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(label_from_index(c));
    ++c;
  }
  return out;
}

void expect_valid_plan(const FoldPlan& plan, std::span<const ClassLabel> labels) {
  std::vector<int> seen(labels.size(), 0);
  for (const auto& fold : plan.folds)
    for (auto i : fold) ++seen[i];
  for (std::size_t i = 0; i < seen.size(); ++i) ASSERT_EQ(seen[i], 1) << "index " << i;

  const auto totals = class_counts(labels);
  for (const auto& fold : plan.folds) {
    std::vector<ClassLabel> fl;
    for (auto i : fold) fl.push_back(labels[i]);
    const auto counts = class_counts(fl);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      ASSERT_GE(counts[c], totals[c] / plan.k);
      ASSERT_LE(counts[c], (totals[c] + plan.k - 1) / plan.k);
    }
  }
}

TEST(Labels, ParseIsCaseInsensitive) {
  EXPECT_EQ(parse_label("COVID19"), ClassLabel::Covid19);
  EXPECT_EQ(parse_label("Bacterial"), ClassLabel::BacterialPneumonia);
  EXPECT_EQ(parse_label("fungal"), std::nullopt);
  EXPECT_EQ(index_of(ClassLabel::ViralPneumonia), 2u);
}

TEST(Manifest, KeepsFileOrder) {
  const auto m = load_manifest("path,label\nb.pgm,normal\na.pgm,covid19\n", "/data");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.samples[0].path, "b.pgm");
  EXPECT_EQ(m.samples[0].label, ClassLabel::Normal);
  EXPECT_EQ(m.samples[1].label, ClassLabel::Covid19);
  EXPECT_EQ(m.resolve(1), std::filesystem::path("/data/a.pgm"));
}

TEST(Manifest, ToleratesCrlfAndBlankLines) {
  const auto m = load_manifest("path,label\r\nx.pgm,Viral\r\n\r\ny.pgm,BACTERIAL\r\n");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.samples[1].label, ClassLabel::BacterialPneumonia);
}

TEST(Manifest, UnknownLabelNamesLine) {
  try {
    load_manifest("path,label\na.pgm,normal\nb.pgm,fungal\n");
    FAIL() << "expected IngestionError";
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("fungal"), std::string::npos);
  }
}

TEST(Manifest, DuplicatePathRejected) {
  try {
    load_manifest("path,label\na.pgm,normal\na.pgm,viral\n");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Manifest, MissingColumnRejected) {
  EXPECT_THROW(load_manifest("path\na.pgm\n"), IngestionError);
  try {
    load_manifest("path,label\na.pgm\n");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Manifest, DigestTracksBytes) {
  const std::string a = "path,label\na.pgm,normal\n";
  const std::string b = "path,label\na.pgm,Normal\n";
  EXPECT_EQ(load_manifest(a).source_digest, load_manifest(a).source_digest);
  EXPECT_NE(load_manifest(a).source_digest, load_manifest(b).source_digest);
  EXPECT_EQ(load_manifest(a).source_digest.size(), 64u);
}

TEST(Manifest, ReferenceCorpusComposition) {
  std::string csv = "path,label\n";
  const std::array<std::size_t, 4> counts = {1281, 1300, 1300, 1300};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < counts[c]; ++i)
      csv += std::string(kLabelNames[c]) + "/" + std::to_string(i) + ".pgm," +
             std::string(kLabelNames[c]) + "\n";
  const auto m = load_manifest(csv);
  EXPECT_EQ(class_counts(m), kReferenceCorpusCounts);
  EXPECT_EQ(m.size(), 5181u);
}

TEST(StratifiedKFold, ExactDivisibility) {
  const auto labels = make_labels({4, 4});
  const auto plan = stratified_kfold(labels, 2, 1);
  for (const auto& fold : plan.folds) {
    std::vector<ClassLabel> fl;
    for (auto i : fold) fl.push_back(labels[i]);
    EXPECT_EQ(class_counts(fl)[0], 2u);
    EXPECT_EQ(class_counts(fl)[1], 2u);
  }
}

TEST(StratifiedKFold, UnevenSingleClass) {
  const auto labels = make_labels({10});
  const auto plan = stratified_kfold(labels, 3, 5);
  std::multiset<std::size_t> sizes;
  for (const auto& f : plan.folds) sizes.insert(f.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{3, 3, 4}));
}

TEST(StratifiedKFold, DeterministicInSeed) {
  const auto labels = make_labels({13, 7, 22, 9});
  EXPECT_EQ(stratified_kfold(labels, 5, 77), stratified_kfold(labels, 5, 77));
  EXPECT_NE(stratified_kfold(labels, 5, 77).folds, stratified_kfold(labels, 5, 78).folds);
}

TEST(StratifiedKFold, RejectsBadK) {
  const auto labels = make_labels({3, 3});
  EXPECT_THROW(stratified_kfold(labels, 1, 0), ConfigError);
  EXPECT_THROW(stratified_kfold(labels, 7, 0), ConfigError);
}

TEST(StratifiedKFold, SmallClassWarns) {
  std::vector<std::string> warnings;
  set_warning_handler([&](const std::string& m) { warnings.push_back(m); });
  const auto labels = make_labels({10, 2});
  const auto plan = stratified_kfold(labels, 5, 0);
  set_warning_handler([](const std::string& m) { std::cerr << "warning: " << m << "\n"; });
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("normal"), std::string::npos);
  expect_valid_plan(plan, labels);
}

TEST(StratifiedKFold, RandomManifestsAreStratifiedPartitions) {
  set_warning_handler({});
  KeyedStream rng{2024};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = std::array<std::size_t, 3>{2, 5, 10}[rng.below(3)];
    std::vector<ClassLabel> labels;
    const std::size_t n = 5 + rng.below(396);
    for (std::size_t i = 0; i < n; ++i) labels.push_back(label_from_index(rng.below(4)));
    if (n < k) continue;
    expect_valid_plan(stratified_kfold(labels, k, rng.next_u64()), labels);
  }
  set_warning_handler([](const std::string& m) { std::cerr << "warning: " << m << "\n"; });
}

TEST(MakeSplits, FirstFold) {
  const auto plan = stratified_kfold(make_labels({30, 30, 30, 30}), 10, 3);
  const auto s = make_splits(plan, 0);
  EXPECT_EQ(s.test, plan.folds[0]);
  EXPECT_EQ(s.validation, plan.folds[1]);
  std::vector<std::size_t> expected_train;
  for (std::size_t f = 2; f < 10; ++f)
    expected_train.insert(expected_train.end(), plan.folds[f].begin(), plan.folds[f].end());
  std::sort(expected_train.begin(), expected_train.end());
  EXPECT_EQ(s.train, expected_train);
}

TEST(MakeSplits, LastFoldWrapsValidation) {
  const auto plan = stratified_kfold(make_labels({30, 30, 30, 30}), 10, 3);
  const auto s = make_splits(plan, 9);
  EXPECT_EQ(s.test, plan.folds[9]);
  EXPECT_EQ(s.validation, plan.folds[0]);
}

TEST(MakeSplits, RolesPartitionIndices) {
  const auto labels = make_labels({17, 23, 5, 31});
  for (std::size_t k : {3u, 5u}) {
    const auto plan = stratified_kfold(labels, k, 9);
    for (std::size_t f = 0; f < k; ++f) {
      const auto s = make_splits(plan, f);
      std::vector<int> seen(labels.size(), 0);
      for (auto i : s.train) ++seen[i];
      for (auto i : s.validation) ++seen[i];
      for (auto i : s.test) ++seen[i];
      for (int v : seen) ASSERT_EQ(v, 1);
    }
  }
}

TEST(MakeSplits, RejectsOutOfRangeFold) {
  const auto plan = stratified_kfold(make_labels({4, 4}), 2, 0);
  EXPECT_THROW(make_splits(plan, 2), ConfigError);
}

}  // namespace
}  // namespace cxr::data
