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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cxr/augmentation.hpp"
#include "cxr/dataset.hpp"
#include "cxr/errors.hpp"
#include "cxr/image.hpp"
#include "cxr/random.hpp"
#include "cxr/store.hpp"

namespace cxr::model {

using data::ClassLabel;
using data::kNumClasses;

using FeatureVector = std::vector<double>;
using Probabilities = std::array<double, kNumClasses>;

// Mean intensity of each cell of a grid x grid partition, row-major.
inline FeatureVector extract_features(const imaging::GrayImage& img, std::size_t grid = 32) {
  if (grid == 0 || img.width % grid != 0 || img.height % grid != 0)
    throw ConfigError("extract_features: image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " not divisible into a " +
                      std::to_string(grid) + "x" + std::to_string(grid) + " grid");
  const std::size_t bw = img.width / grid;
  const std::size_t bh = img.height / grid;
  FeatureVector f(grid * grid, 0.0);
  for (std::size_t y = 0; y < img.height; ++y) {
    double* row = f.data() + (y / bh) * grid;
    for (std::size_t x = 0; x < img.width; ++x) row[x / bw] += img.at(x, y);
  }
  const double inv = 1.0 / static_cast<double>(bw * bh);
  for (double& v : f) v *= inv;
  return f;
}

// Multinomial logistic regression. Parameters are stored flat: the 4 x F
// weight matrix row by row, followed by the 4 biases.
class SoftmaxModel {
 public:
  SoftmaxModel() = default;
  explicit SoftmaxModel(std::size_t features)
      : features_(features), params_(kNumClasses * features + kNumClasses, 0.0) {}

  std::size_t feature_count() const { return features_; }
  std::size_t param_count() const { return params_.size(); }

  double& weight(std::size_t c, std::size_t f) { return params_[c * features_ + f]; }
  double weight(std::size_t c, std::size_t f) const { return params_[c * features_ + f]; }
  double& bias(std::size_t c) { return params_[kNumClasses * features_ + c]; }
  double bias(std::size_t c) const { return params_[kNumClasses * features_ + c]; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Probabilities logits(std::span<const double> x) const {
    if (x.size() != features_)
      throw ConfigError("SoftmaxModel: feature length " + std::to_string(x.size()) +
                        " != " + std::to_string(features_));
    Probabilities z{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      double acc = bias(c);
      const double* w = params_.data() + c * features_;
      for (std::size_t f = 0; f < features_; ++f) acc += w[f] * x[f];
      z[c] = acc;
    }
    return z;
  }

  friend bool operator==(const SoftmaxModel&, const SoftmaxModel&) = default;

 private:
  std::size_t features_ = 0;
  std::vector<double> params_;
};

// Max-subtracted softmax.
inline Probabilities softmax(const Probabilities& z) {
  const double zmax = *std::max_element(z.begin(), z.end());
  Probabilities p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p[c] = std::exp(z[c] - zmax);
    sum += p[c];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline Probabilities predict_proba(const SoftmaxModel& model, std::span<const double> x) {
  return softmax(model.logits(x));
}

inline constexpr double kProbabilityFloor = 1e-12;

// Categorical cross-entropy of one prediction.
inline double cross_entropy(const Probabilities& probs, ClassLabel label) {
  return -std::log(std::max(probs[data::index_of(label)], kProbabilityFloor));
}

struct Example {
  std::span<const double> x;
  ClassLabel y;
};

// Mean over the batch of (p - onehot(y)) x^T for the weights and (p - onehot(y))
// for the biases, laid out like SoftmaxModel::params(). Optionally accumulates
// the mean loss of the batch.
inline std::vector<double> gradient(const SoftmaxModel& model, std::span<const Example> batch,
                                    double* mean_loss = nullptr) {
  if (batch.empty()) throw ConfigError("gradient: empty batch");
  const std::size_t nf = model.feature_count();
  std::vector<double> g(model.param_count(), 0.0);
  double loss = 0.0;
  for (const auto& ex : batch) {
    Probabilities p = predict_proba(model, ex.x);
    loss += cross_entropy(p, ex.y);
    p[data::index_of(ex.y)] -= 1.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      double* row = g.data() + c * nf;
      for (std::size_t f = 0; f < nf; ++f) row[f] += p[c] * ex.x[f];
      g[kNumClasses * nf + c] += p[c];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : g) v *= inv;
  if (mean_loss) *mean_loss = loss * inv;
  return g;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr = 1e-3;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

inline void adam_step(AdamState& st, std::span<double> params, std::span<const double> grad) {
  if (params.size() != grad.size() || st.m.size() != params.size() || st.v.size() != params.size())
    throw ConfigError("adam_step: shape mismatch");
  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double m_hat = st.m[i] / c1;
    const double v_hat = st.v[i] / c2;
    params[i] -= st.lr * m_hat / (std::sqrt(v_hat) + st.epsilon);
  }
}

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  // Linear model scale; the 5e-7 rates used for fine-tuning deep pretrained
  // networks are far too small here.
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t feature_grid = 32;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be > 0");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
      throw ConfigError("train: Adam betas must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("train: epsilon must be > 0");
    if (feature_grid < 1) throw ConfigError("train: feature_grid must be >= 1");
  }
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  SoftmaxModel model;  // weights of the best epoch
  std::size_t best_epoch = 0;
  std::vector<EpochLog> log;
  std::size_t augmented_samples = 0;
};

inline constexpr std::uint64_t kShuffleStreamTag = 0x73687566;

inline std::size_t argmax(const Probabilities& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Mean loss and accuracy of `model` over precomputed features.
inline std::pair<double, double> evaluate_loss_accuracy(const SoftmaxModel& model,
                                                        std::span<const FeatureVector> xs,
                                                        std::span<const ClassLabel> ys) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto p = predict_proba(model, xs[i]);
    loss += cross_entropy(p, ys[i]);
    if (argmax(p) == data::index_of(ys[i])) ++correct;
  }
  const auto n = static_cast<double>(xs.size());
  return {loss / n, static_cast<double>(correct) / n};
}

// Minibatch Adam on the training split with on-the-fly augmentation; after
// every epoch the unaugmented validation split is scored. Returns the weights
// of the epoch with the lowest validation loss (earliest epoch on ties).
inline TrainResult train(const data::SplitAssignment& splits, FoldReader& reader,
                         const TrainConfig& config, const augment::AugmentParams& aug) {
  config.validate();
  aug.validate();
  if (splits.train.empty()) throw ConfigError("train: empty training split");
  if (splits.validation.empty()) throw ConfigError("train: empty validation split");

  std::vector<FeatureVector> val_x;
  std::vector<ClassLabel> val_y;
  for (std::size_t idx : splits.validation) {
    val_x.push_back(extract_features(reader.read(idx, AccessRole::Validation), config.feature_grid));
    val_y.push_back(reader.label(idx));
  }

  SoftmaxModel model(val_x.front().size());
  AdamState adam(model.param_count(), config.lr);
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.epsilon = config.epsilon;

  TrainResult result;
  result.model = model;
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order = splits.train;
  std::vector<FeatureVector> batch_x;
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order = splits.train;
    KeyedStream rng{kShuffleStreamTag, config.seed, splits.fold, epoch};
    rng.shuffle(order);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch_x.clear();
      batch.clear();
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t idx = order[j];
        const auto spec = augment::sample_augment(aug, {config.seed, splits.fold, epoch, idx});
        const auto augmented = augment::apply_affine(reader.read(idx, AccessRole::Train), spec);
        ++result.augmented_samples;
        batch_x.push_back(extract_features(augmented, config.feature_grid));
      }
      for (std::size_t j = start; j < end; ++j)
        batch.push_back({batch_x[j - start], reader.label(order[j])});
      double batch_loss = 0.0;
      const auto g = gradient(model, batch, &batch_loss);
      loss_sum += batch_loss * static_cast<double>(batch.size());
      adam_step(adam, model.params(), g);
    }

    const auto [val_loss, val_acc] = evaluate_loss_accuracy(model, val_x, val_y);
    result.log.push_back(
        {epoch, loss_sum / static_cast<double>(order.size()), val_loss, val_acc});
    if (result.best_epoch == 0 || val_loss < best_val) {
      best_val = val_loss;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

}  // namespace cxr::model
