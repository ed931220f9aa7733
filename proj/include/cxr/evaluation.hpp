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
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cxr/classifier.hpp"
#include "cxr/dataset.hpp"
#include "cxr/errors.hpp"

namespace cxr::eval {

using data::ClassLabel;
using data::kNumClasses;

// Rows are the true class, columns the predicted class, in ClassLabel order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
      for (auto v : row) t += v;
    return t;
  }
  std::uint64_t row_sum(std::size_t c) const {
    return std::accumulate(counts[c].begin(), counts[c].end(), std::uint64_t{0});
  }
  std::uint64_t col_sum(std::size_t c) const {
    std::uint64_t s = 0;
    for (const auto& row : counts) s += row[c];
    return s;
  }
  std::uint64_t trace() const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) s += counts[c][c];
    return s;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion_matrix(std::span<const ClassLabel> truth,
                                        std::span<const ClassLabel> predicted) {
  if (truth.size() != predicted.size())
    throw EvaluationError("confusion_matrix: " + std::to_string(truth.size()) + " truths vs " +
                          std::to_string(predicted.size()) + " predictions");
  if (truth.empty()) throw EvaluationError("confusion_matrix: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++cm.counts[data::index_of(truth[i])][data::index_of(predicted[i])];
  return cm;
}

// One-vs-rest metrics of a single class. Empty when the denominator is zero or
// the class does not occur in the ground truth.
struct ClassMetrics {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> f1;
  std::optional<double> auc;
};

// Macro values average the defined per-class values of classes present in the
// ground truth.
struct MetricsReport {
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;
  std::array<ClassMetrics, kNumClasses> per_class{};
};

namespace detail {

inline double macro_mean(const std::array<ClassMetrics, kNumClasses>& pc,
                         std::optional<double> ClassMetrics::*field,
                         const std::array<bool, kNumClasses>& present) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (present[c] && (pc[c].*field)) {
      sum += *(pc[c].*field);
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace detail

inline MetricsReport metrics_from_cm(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  if (total == 0) throw EvaluationError("metrics_from_cm: empty confusion matrix");

  MetricsReport r;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  std::array<bool, kNumClasses> present{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double fn = static_cast<double>(cm.row_sum(c)) - tp;
    const double fp = static_cast<double>(cm.col_sum(c)) - tp;
    const double tn = static_cast<double>(total) - tp - fn - fp;
    present[c] = tp + fn > 0;
    auto& m = r.per_class[c];
    if (present[c]) {
      m.sensitivity = tp / (tp + fn);
      // equals 2*precision*recall/(precision+recall) whenever precision is defined
      m.f1 = 2.0 * tp / (2.0 * tp + fp + fn);
    } else {
      warn("class '" + std::string(data::kLabelNames[c]) +
           "' absent from ground truth; excluded from macro metrics");
    }
    if (tn + fp > 0) m.specificity = tn / (tn + fp);
  }
  r.sensitivity = detail::macro_mean(r.per_class, &ClassMetrics::sensitivity, present);
  r.specificity = detail::macro_mean(r.per_class, &ClassMetrics::specificity, present);
  r.f1 = detail::macro_mean(r.per_class, &ClassMetrics::f1, present);
  return r;
}

struct RocPoint {
  double threshold;  // predictions with score >= threshold count as positive
  double fpr;
  double tpr;
};

// Starts at (0, 0) with a +inf threshold and ends at (1, 1).
struct RocCurve {
  std::vector<RocPoint> points;
};

// One point per distinct score, swept from high to low; tied scores move
// together.
inline RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positives) {
  if (scores.size() != positives.size())
    throw EvaluationError("roc_curve: score and label counts differ");
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw EvaluationError("roc_curve: NaN score");
    if (positives[i]) ++n_pos;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw EvaluationError("roc_curve: need at least one positive and one negative sample");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      positives[order[i]] ? ++tp : ++fp;
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return curve;
}

// Trapezoidal area under the curve.
inline double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  return std::clamp(area, 0.0, 1.0);
}

struct MacroAuc {
  std::optional<double> macro;
  std::array<std::optional<double>, kNumClasses> per_class{};
};

// Mean of the one-vs-rest AUCs, each scored by that class's probability.
// Classes without both positives and negatives are excluded with a warning.
inline MacroAuc macro_auc(std::span<const model::Probabilities> probs,
                          std::span<const ClassLabel> truth) {
  if (probs.size() != truth.size())
    throw EvaluationError("macro_auc: probability and label counts differ");
  MacroAuc out;
  std::vector<double> scores(probs.size());
  auto pos = std::make_unique<bool[]>(probs.size());
  const std::span<const bool> positives(pos.get(), probs.size());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores[i] = probs[i][c];
      pos[i] = data::index_of(truth[i]) == c;
      n_pos += pos[i] ? 1 : 0;
    }
    if (n_pos == 0 || n_pos == probs.size()) {
      warn("class '" + std::string(data::kLabelNames[c]) +
           "' lacks positives or negatives; excluded from macro AUC");
      continue;
    }
    const double a = auc(roc_curve(scores, positives));
    out.per_class[c] = a;
    sum += a;
    ++n;
  }
  if (n > 0) out.macro = sum / static_cast<double>(n);
  return out;
}

// Full report for one evaluated split: confusion-matrix metrics plus AUC.
inline MetricsReport evaluate_predictions(std::span<const model::Probabilities> probs,
                                          std::span<const ClassLabel> truth) {
  std::vector<ClassLabel> predicted;
  predicted.reserve(probs.size());
  for (const auto& p : probs) predicted.push_back(data::label_from_index(model::argmax(p)));
  MetricsReport r = metrics_from_cm(confusion_matrix(truth, predicted));
  const MacroAuc a = macro_auc(probs, truth);
  r.auc = a.macro;
  for (std::size_t c = 0; c < kNumClasses; ++c) r.per_class[c].auc = a.per_class[c];
  return r;
}

struct MeanStd {
  double mean = 0.0;
  std::optional<double> stddev;  // sample (n-1) deviation; absent for n < 2
};

inline MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) {
    out.mean = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

struct FoldAggregate {
  std::size_t folds = 0;
  MeanStd accuracy, sensitivity, specificity, f1, auc;
};

inline FoldAggregate aggregate_folds(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw EvaluationError("aggregate_folds: no reports");
  FoldAggregate agg;
  agg.folds = reports.size();
  auto collect = [&](auto getter) {
    std::vector<double> v;
    for (const auto& r : reports)
      if (auto x = getter(r)) v.push_back(*x);
    return mean_std(v);
  };
  agg.accuracy = collect([](const MetricsReport& r) { return std::optional<double>(r.accuracy); });
  agg.sensitivity = collect([](const MetricsReport& r) { return std::optional<double>(r.sensitivity); });
  agg.specificity = collect([](const MetricsReport& r) { return std::optional<double>(r.specificity); });
  agg.f1 = collect([](const MetricsReport& r) { return std::optional<double>(r.f1); });
  agg.auc = collect([](const MetricsReport& r) { return r.auc; });
  return agg;
}

}  // namespace cxr::eval
