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

#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "cxr/classifier.hpp"
#include "cxr/dataset.hpp"
#include "cxr/store.hpp"
#include "oracles.hpp"

namespace cxr::model {
namespace {

using data::ClassLabel;

TEST(Features, ConstantImage) {
  const auto f = extract_features(imaging::GrayImage(64, 64, 0.5f), 32);
  ASSERT_EQ(f.size(), 1024u);
  for (double v : f) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Features, HalfBrightImage) {
  imaging::GrayImage img(64, 64, 0.0f);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 32; ++x) img.at(x, y) = 1.0f;
  const auto f = extract_features(img, 32);
  for (std::size_t gy = 0; gy < 32; ++gy)
    for (std::size_t gx = 0; gx < 32; ++gx) EXPECT_EQ(f[gy * 32 + gx], gx < 16 ? 1.0 : 0.0);
}

TEST(Features, MatchDirectBlockMeans) {
  const auto img = oracle::random_image(96, 64, 4);
  const std::size_t grid = 8;
  const auto f = extract_features(img, grid);
  for (std::size_t gy = 0; gy < grid; ++gy)
    for (std::size_t gx = 0; gx < grid; ++gx) {
      double sum = 0.0;
      for (std::size_t y = gy * 8; y < gy * 8 + 8; ++y)
        for (std::size_t x = gx * 12; x < gx * 12 + 12; ++x) sum += img.at(x, y);
      EXPECT_NEAR(f[gy * grid + gx], sum / 96.0, 1e-6);
    }
}

TEST(Features, RejectsIndivisibleGrid) {
  EXPECT_THROW(extract_features(imaging::GrayImage(100, 100), 32), ConfigError);
}

TEST(Softmax, ZeroModelIsUniform) {
  SoftmaxModel m(5);
  const auto p = predict_proba(m, std::vector<double>{1, 2, 3, 4, 5});
  for (double v : p) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  const auto p = softmax({1000.0, 0.0, 0.0, 0.0});
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[1], 0.0, 1e-12);
  for (double v : p) EXPECT_TRUE(std::isfinite(v));
}

TEST(Softmax, LogLogitsRecoverProportions) {
  const auto p = softmax({std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0)});
  EXPECT_NEAR(p[0], 0.1, 1e-9);
  EXPECT_NEAR(p[1], 0.2, 1e-9);
  EXPECT_NEAR(p[2], 0.3, 1e-9);
  EXPECT_NEAR(p[3], 0.4, 1e-9);
}

TEST(Softmax, AlwaysAValidDistribution) {
  KeyedStream rng{17};
  for (int trial = 0; trial < 500; ++trial) {
    SoftmaxModel m(6);
    for (double& w : m.params()) w = rng.uniform(-50.0, 50.0);
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const auto p = predict_proba(m, x);
    double sum = 0.0;
    for (double v : p) {
      ASSERT_GE(v, 0.0);
      sum += v;
    }
    ASSERT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(CrossEntropy, KnownValues) {
  EXPECT_DOUBLE_EQ(cross_entropy({0, 1, 0, 0}, ClassLabel::Normal), 0.0);
  EXPECT_NEAR(cross_entropy({0.25, 0.25, 0.25, 0.25}, ClassLabel::Covid19), std::log(4.0), 1e-12);
  EXPECT_NEAR(cross_entropy({0.1, 0.2, 0.3, 0.4}, ClassLabel::Normal), 1.6094379124341003, 1e-12);
}

TEST(CrossEntropy, FloorsZeroProbability) {
  EXPECT_NEAR(cross_entropy({1, 0, 0, 0}, ClassLabel::Normal), -std::log(1e-12), 1e-9);
}

TEST(Gradient, ZeroWhenPredictionIsExact) {
  SoftmaxModel m(2);
  m.bias(2) = 1000.0;
  const std::vector<double> x{0.3, 0.7};
  const std::vector<Example> batch{{x, ClassLabel::ViralPneumonia}};
  for (double g : gradient(m, batch)) EXPECT_NEAR(g, 0.0, 1e-12);
}

TEST(Gradient, ZeroModelSingleSample) {
  SoftmaxModel m(3);
  const std::vector<double> x{1.0, -2.0, 0.5};
  const std::vector<Example> batch{{x, ClassLabel::Normal}};
  const auto g = gradient(m, batch);
  for (std::size_t c = 0; c < 4; ++c) {
    const double coeff = 0.25 - (c == 1 ? 1.0 : 0.0);
    for (std::size_t f = 0; f < 3; ++f) EXPECT_DOUBLE_EQ(g[c * 3 + f], coeff * x[f]);
    EXPECT_DOUBLE_EQ(g[12 + c], coeff);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  KeyedStream rng{31};
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t nf = 1 + rng.below(8);
    SoftmaxModel m(nf);
    for (double& w : m.params()) w = rng.uniform(-2.0, 2.0);
    std::vector<std::vector<double>> xs(1 + rng.below(6), std::vector<double>(nf));
    std::vector<Example> batch;
    for (auto& x : xs) {
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      batch.push_back({x, data::label_from_index(rng.below(4))});
    }
    const auto g = gradient(m, batch);
    auto mean_loss = [&](const std::vector<double>& params) {
      SoftmaxModel probe(nf);
      std::copy(params.begin(), params.end(), probe.params().begin());
      double loss = 0.0;
      for (const auto& ex : batch) loss += cross_entropy(predict_proba(probe, ex.x), ex.y);
      return loss / static_cast<double>(batch.size());
    };
    const auto fd = oracle::finite_difference(
        mean_loss, std::vector<double>(m.params().begin(), m.params().end()), 1e-5);
    double diff = 0.0, ng = 0.0, nfd = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      diff += (g[i] - fd[i]) * (g[i] - fd[i]);
      ng += g[i] * g[i];
      nfd += fd[i] * fd[i];
    }
    ASSERT_LE(std::sqrt(diff) / std::max({std::sqrt(ng), std::sqrt(nfd), 1e-12}), 1e-4)
        << "draw " << draw;
  }
}

TEST(Adam, ZeroGradientLeavesParams) {
  AdamState st(3, 0.1);
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  adam_step(st, p, g);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  AdamState st(1, 0.1);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  adam_step(st, p, g);
  // m_hat = v_hat = 1 after bias correction
  EXPECT_NEAR(p[0], -0.1 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0], -0.09999999, 1e-7);
}

TEST(Adam, TwoStepsFollowRecurrence) {
  AdamState st(1, 0.1);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  adam_step(st, p, g);
  adam_step(st, p, g);
  // step 2: m = 0.19, v = 0.001999; m_hat = 0.19/0.19 = 1, v_hat = 0.001999/0.001999 = 1
  double expected = 0.0;
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    expected -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_NEAR(p[0], expected, 1e-12);
  EXPECT_NEAR(p[0], -0.2 / (1.0 + 1e-8), 1e-12);
}

TEST(Adam, RejectsShapeMismatch) {
  AdamState st(2, 0.1);
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  EXPECT_THROW(adam_step(st, p, g), ConfigError);
}

TEST(Adam, SmallStepsReduceLossOnFixedBatch) {
  KeyedStream rng{5};
  SoftmaxModel m(4);
  std::vector<std::vector<double>> xs(8, std::vector<double>(4));
  std::vector<Example> batch;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (double& v : xs[i]) v = rng.uniform();
    batch.push_back({xs[i], data::label_from_index(i % 4)});
  }
  AdamState st(m.param_count(), 1e-4);
  double initial = 0.0, final_loss = 0.0;
  gradient(m, batch, &initial);
  for (int step = 0; step < 100; ++step) adam_step(st, m.params(), gradient(m, batch));
  gradient(m, batch, &final_loss);
  EXPECT_LT(final_loss, initial);
}

// Four well-separated clusters on 2x2 images: left half / right half brightness.
struct ToyData {
  std::vector<imaging::GrayImage> images;
  std::vector<ClassLabel> labels;
};

ToyData make_toy(std::size_t per_class, std::uint64_t seed) {
  ToyData d;
  KeyedStream rng{seed};
  const double centers[4][2] = {{0.2, 0.2}, {0.8, 0.2}, {0.2, 0.8}, {0.8, 0.8}};
  for (std::size_t i = 0; i < per_class; ++i)
    for (std::size_t c = 0; c < 4; ++c) {
      const auto a = static_cast<float>(centers[c][0] + rng.uniform(-0.08, 0.08));
      const auto b = static_cast<float>(centers[c][1] + rng.uniform(-0.08, 0.08));
      d.images.emplace_back(2, 2, std::vector<float>{a, b, a, b});
      d.labels.push_back(data::label_from_index(c));
    }
  return d;
}

// Multiclass perceptron; converges to zero errors iff the data is linearly
// separable (given enough passes).
bool perceptron_separates(const ToyData& d) {
  double w[4][3] = {};
  for (int pass = 0; pass < 1000; ++pass) {
    int errors = 0;
    for (std::size_t i = 0; i < d.images.size(); ++i) {
      const double x[3] = {d.images[i].pixels[0], d.images[i].pixels[1], 1.0};
      std::size_t best = 0;
      double best_score = -1e300;
      for (std::size_t c = 0; c < 4; ++c) {
        const double s = w[c][0] * x[0] + w[c][1] * x[1] + w[c][2] * x[2];
        if (s > best_score) {
          best_score = s;
          best = c;
        }
      }
      const std::size_t y = data::index_of(d.labels[i]);
      if (best != y) {
        ++errors;
        for (int j = 0; j < 3; ++j) {
          w[y][j] += x[j];
          w[best][j] -= x[j];
        }
      }
    }
    if (errors == 0) return true;
  }
  return false;
}

TrainConfig toy_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.lr = 0.05;
  cfg.seed = 3;
  cfg.feature_grid = 2;
  return cfg;
}

TEST(Train, LearnsSeparableData) {
  const auto toy = make_toy(30, 12);
  ASSERT_TRUE(perceptron_separates(toy));
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  const auto splits = data::make_splits(data::stratified_kfold(toy.labels, 5, 1), 0);
  FoldReader reader(store);
  const auto res = train(splits, reader, toy_config(50), {0.0, 0.0, 0.0});
  ASSERT_EQ(res.log.size(), 50u);
  EXPECT_EQ(res.log.back().val_accuracy, 1.0);
  EXPECT_EQ(res.log[res.best_epoch - 1].val_accuracy, 1.0);

  std::size_t correct = 0;
  for (auto idx : splits.validation)
    correct += argmax(predict_proba(res.model, extract_features(store.image(idx), 2))) ==
               data::index_of(toy.labels[idx]);
  EXPECT_EQ(correct, splits.validation.size());
}

TEST(Train, BestEpochHasMinimumValidationLoss) {
  const auto toy = make_toy(20, 4);
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  const auto splits = data::make_splits(data::stratified_kfold(toy.labels, 4, 2), 1);
  FoldReader reader(store);
  const auto res = train(splits, reader, toy_config(15), {20.0, 0.2, 0.5});
  for (const auto& e : res.log) EXPECT_GE(e.val_loss, res.log[res.best_epoch - 1].val_loss);
  for (std::size_t e = 0; e + 1 < res.best_epoch; ++e)
    EXPECT_GT(res.log[e].val_loss, res.log[res.best_epoch - 1].val_loss);
}

TEST(Train, SingleEpochIsBest) {
  const auto toy = make_toy(10, 5);
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  const auto splits = data::make_splits(data::stratified_kfold(toy.labels, 5, 2), 3);
  FoldReader reader(store);
  const auto res = train(splits, reader, toy_config(1), {});
  EXPECT_EQ(res.best_epoch, 1u);
  EXPECT_EQ(res.log.size(), 1u);
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  const auto toy = make_toy(15, 6);
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  const auto splits = data::make_splits(data::stratified_kfold(toy.labels, 5, 2), 2);
  FoldReader r1(store), r2(store);
  const auto a = train(splits, r1, toy_config(8), {});
  const auto b = train(splits, r2, toy_config(8), {});
  EXPECT_EQ(a.log, b.log);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.best_epoch, b.best_epoch);
}

TEST(Train, AugmentsOnlyTrainingReads) {
  const auto toy = make_toy(10, 7);
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  const auto splits = data::make_splits(data::stratified_kfold(toy.labels, 5, 2), 0);
  FoldReader reader(store);
  const auto res = train(splits, reader, toy_config(4), {});
  EXPECT_EQ(res.augmented_samples, 4 * splits.train.size());

  std::set<std::size_t> val(splits.validation.begin(), splits.validation.end());
  std::set<std::size_t> test(splits.test.begin(), splits.test.end());
  std::size_t val_reads = 0;
  for (const auto& a : reader.log()) {
    EXPECT_NE(a.role, AccessRole::Test);
    EXPECT_EQ(test.count(a.index), 0u);
    if (a.role == AccessRole::Validation) {
      ++val_reads;
      EXPECT_EQ(val.count(a.index), 1u);
    }
  }
  // validation features are computed once, from the unaugmented images
  EXPECT_EQ(val_reads, splits.validation.size());
}

TEST(Train, RejectsEmptySplits) {
  const auto toy = make_toy(2, 7);
  const auto store = ImageStore::in_memory(toy.images, toy.labels);
  data::SplitAssignment s;
  s.validation = {0};
  FoldReader reader(store);
  EXPECT_THROW(train(s, reader, toy_config(1), {}), ConfigError);
  s.train = {1};
  s.validation.clear();
  EXPECT_THROW(train(s, reader, toy_config(1), {}), ConfigError);
}

}  // namespace
}  // namespace cxr::model
