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

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <string>

#include "cxr/dataset.hpp"
#include "cxr/evaluation.hpp"

// CSV renderings of evaluation results. Everything is produced as text so the
// caller decides where it goes.
namespace cxr::eval {

inline std::string format_fixed(double v, int decimals) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// "mean±std" (or just "mean" when the deviation is undefined).
inline std::string format_mean_std(const MeanStd& ms, double scale, int decimals) {
  std::string out = format_fixed(ms.mean * scale, decimals);
  if (ms.stddev) out += "±" + format_fixed(*ms.stddev * scale, decimals);
  return out;
}

inline std::string confusion_csv(const ConfusionMatrix& cm) {
  std::string out = "true\\predicted";
  for (auto name : data::kLabelNames) out += "," + std::string(name);
  out += "\n";
  for (std::size_t t = 0; t < data::kNumClasses; ++t) {
    out += data::kLabelNames[t];
    for (auto v : cm.counts[t]) out += "," + std::to_string(v);
    out += "\n";
  }
  return out;
}

inline std::string roc_csv(const RocCurve& curve) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : curve.points)
    out += format_real(p.threshold) + "," + format_real(p.fpr) + "," + format_real(p.tpr) + "\n";
  return out;
}

struct FoldRow {
  std::size_t fold;
  MetricsReport report;
};

inline constexpr const char* kMetricsHeader =
    "fold,accuracy_pct,sensitivity_macro_pct,specificity_macro_pct,f1_macro_pct,auc_macro\n";

// Per-fold rows followed by one aggregate row labelled "mean±std".
// Percentages use two decimals, AUC four.
inline std::string metrics_csv(std::span<const FoldRow> rows, const FoldAggregate& agg) {
  std::string out = kMetricsHeader;
  for (const auto& r : rows) {
    out += std::to_string(r.fold);
    out += "," + format_fixed(r.report.accuracy * 100.0, 2);
    out += "," + format_fixed(r.report.sensitivity * 100.0, 2);
    out += "," + format_fixed(r.report.specificity * 100.0, 2);
    out += "," + format_fixed(r.report.f1 * 100.0, 2);
    out += "," + (r.report.auc ? format_fixed(*r.report.auc, 4) : std::string("NA"));
    out += "\n";
  }
  out += "mean±std";
  out += "," + format_mean_std(agg.accuracy, 100.0, 2);
  out += "," + format_mean_std(agg.sensitivity, 100.0, 2);
  out += "," + format_mean_std(agg.specificity, 100.0, 2);
  out += "," + format_mean_std(agg.f1, 100.0, 2);
  out += "," + format_mean_std(agg.auc, 1.0, 4);
  out += "\n";
  return out;
}

// Human-readable summary of one report, used by the `evaluate` command.
inline std::string describe(const MetricsReport& r, const ConfusionMatrix& cm) {
  std::string out = confusion_csv(cm);
  out += "\nclass,sensitivity,specificity,f1,auc\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("NA"); };
  for (std::size_t c = 0; c < data::kNumClasses; ++c) {
    const auto& m = r.per_class[c];
    out += std::string(data::kLabelNames[c]) + "," + opt(m.sensitivity) + "," +
           opt(m.specificity) + "," + opt(m.f1) + "," + opt(m.auc) + "\n";
  }
  out += "\naccuracy," + format_fixed(r.accuracy, 4) + "\n";
  out += "sensitivity_macro," + format_fixed(r.sensitivity, 4) + "\n";
  out += "specificity_macro," + format_fixed(r.specificity, 4) + "\n";
  out += "f1_macro," + format_fixed(r.f1, 4) + "\n";
  out += "auc_macro," + opt(r.auc) + "\n";
  return out;
}

}  // namespace cxr::eval
