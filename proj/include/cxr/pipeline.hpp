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
#include <atomic>
#include <chrono>
#include <cstddef>
#include <exception>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "cxr/augmentation.hpp"
#include "cxr/backend.hpp"
#include "cxr/clahe.hpp"
#include "cxr/classifier.hpp"
#include "cxr/config.hpp"
#include "cxr/dataset.hpp"
#include "cxr/digest.hpp"
#include "cxr/errors.hpp"
#include "cxr/evaluation.hpp"
#include "cxr/image.hpp"
#include "cxr/report.hpp"
#include "cxr/resize.hpp"
#include "cxr/store.hpp"
#include "cxr/version.hpp"

namespace cxr::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline void write_text(const fs::path& path, const std::string& text) {
  imaging::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline std::string read_text(const fs::path& path) {
  const auto bytes = imaging::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

// Proportional resize onto a black square canvas followed by CLAHE.
inline imaging::GrayImage preprocess_image(const imaging::GrayImage& img, std::size_t side,
                                           const imaging::ClaheParams& params) {
  return imaging::clahe(imaging::resize_preserve_aspect(img, side), params);
}

struct PreprocessResult {
  data::Manifest manifest;
  std::vector<fs::path> cache_files;  // parallel to manifest.samples
  std::size_t written = 0;
  std::size_t reused = 0;
};

// Preprocesses every manifest sample into `<output_dir>/cache/<hash>.pgm`,
// where the hash covers the source bytes and the preprocessing settings.
// Existing entries are reused untouched. Failing images are collected and
// reported together after the remaining samples have been cached.
inline PreprocessResult preprocess_corpus(const ExperimentConfig& cfg) {
  PreprocessResult res;
  res.manifest = data::load_manifest(read_text(cfg.manifest_path), cfg.manifest_path.parent_path());
  const fs::path cache = cfg.cache_dir();
  std::error_code ec;
  fs::create_directories(cache, ec);
  if (ec) throw ConfigError("cannot create cache directory " + cache.string() + ": " + ec.message());

  const std::string fingerprint = cfg.preprocessing_fingerprint();
  std::vector<std::string> failures;
  std::string index = "path,label,cache_file\n";
  res.cache_files.resize(res.manifest.size());
  for (std::size_t i = 0; i < res.manifest.size(); ++i) {
    const auto& sample = res.manifest.samples[i];
    const fs::path source = res.manifest.resolve(i);
    try {
      const auto bytes = imaging::read_file(source);
      const std::string key = Sha256().update(bytes).update(fingerprint).hex();
      const fs::path target = cache / (key + ".pgm");
      if (fs::exists(target)) {
        ++res.reused;
      } else {
        const auto out = preprocess_image(imaging::load_pgm(bytes), cfg.image_side, cfg.clahe);
        const fs::path tmp = cache / (key + ".pgm.tmp");
        imaging::write_file(tmp, imaging::save_pgm(out, 65535));
        fs::rename(tmp, target);
        ++res.written;
      }
      res.cache_files[i] = target;
      index += sample.path + "," + std::string(data::label_name(sample.label)) + "," +
               target.filename().string() + "\n";
    } catch (const Error& e) {
      failures.push_back(sample.path + ": " + e.what());
    }
  }

  const fs::path index_file = cache / "index.csv";
  if (!fs::exists(index_file) || read_text(index_file) != index) write_text(index_file, index);

  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " image(s) failed preprocessing:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw DataError(msg);
  }
  return res;
}

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<std::vector<std::size_t>> folds;  // all folds when empty
};

struct FoldOutcome {
  std::size_t fold = 0;
  eval::MetricsReport report;
  eval::ConfusionMatrix confusion;
  std::size_t best_epoch = 0;  // 0 for external backends
  std::vector<std::string> artifacts;
  std::vector<FoldReader::Access> access_log;
  double seconds = 0.0;
};

struct RunRecord {
  std::string config_digest;
  std::string manifest_digest;
  std::string tool_version = kVersion;
  std::string backend_name;
  std::vector<FoldOutcome> folds;
  eval::FoldAggregate aggregate;
  std::size_t best_fold = 0;
  std::vector<std::string> artifacts;
  double total_seconds = 0.0;
};

// Shared, read-only state of one experiment.
struct FoldContext {
  const ExperimentConfig& config;
  const data::Manifest& manifest;
  const ImageStore& store;
  const data::FoldPlan& plan;
};

namespace detail {

inline std::string predictions_csv(const data::Manifest& manifest,
                                   std::span<const std::size_t> indices,
                                   std::span<const model::Probabilities> probs) {
  std::string out = "path,label";
  for (auto name : data::kLabelNames) out += "," + std::string(name);
  out += "\n";
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& s = manifest.samples[indices[i]];
    out += s.path + "," + std::string(data::label_name(s.label));
    for (double p : probs[i]) out += "," + eval::format_real(p);
    out += "\n";
  }
  return out;
}

inline std::string train_log_csv(std::span<const model::EpochLog> log) {
  std::string out = "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& e : log)
    out += std::to_string(e.epoch) + "," + eval::format_real(e.train_loss) + "," +
           eval::format_real(e.val_loss) + "," + eval::format_real(e.val_accuracy) + "\n";
  return out;
}

inline json model_json(const model::SoftmaxModel& m, std::size_t best_epoch) {
  return {{"classes", data::kLabelNames},
          {"features", m.feature_count()},
          {"best_epoch", best_epoch},
          {"params", std::vector<double>(m.params().begin(), m.params().end())}};
}

[[noreturn]] inline void rethrow_for_fold(std::exception_ptr e, std::size_t k) {
  const std::string prefix = "fold " + std::to_string(k) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const BackendError& x) {
    throw BackendError(prefix + x.what());
  } catch (const ConfigError& x) {
    throw ConfigError(prefix + x.what());
  } catch (const DataError& x) {
    throw DataError(prefix + x.what());
  } catch (const std::exception& x) {
    throw Error(prefix + x.what());
  }
}

}  // namespace detail

// Trains on one split and scores its test fold.
inline std::vector<model::Probabilities> predict_builtin(const FoldContext& ctx,
                                                         const data::SplitAssignment& splits,
                                                         FoldOutcome& outcome,
                                                         const fs::path& out_dir) {
  FoldReader reader(ctx.store);
  const auto trained = model::train(splits, reader, ctx.config.train, ctx.config.augment);

  const std::unordered_set<std::size_t> test_set(splits.test.begin(), splits.test.end());
  for (const auto& a : reader.log())
    if (a.role == AccessRole::Test || test_set.count(a.index))
      throw Error("test-fold image " + std::to_string(a.index) + " was read during training");

  std::vector<model::Probabilities> probs;
  probs.reserve(splits.test.size());
  for (std::size_t idx : splits.test)
    probs.push_back(model::predict_proba(
        trained.model, model::extract_features(reader.read(idx, AccessRole::Test),
                                               ctx.config.train.feature_grid)));

  const std::string k = std::to_string(splits.fold);
  write_text(out_dir / ("train_log_fold" + k + ".csv"), detail::train_log_csv(trained.log));
  write_text(out_dir / ("model_fold" + k + ".json"),
             detail::model_json(trained.model, trained.best_epoch).dump(1) + "\n");
  outcome.artifacts.push_back("train_log_fold" + k + ".csv");
  outcome.artifacts.push_back("model_fold" + k + ".json");
  outcome.best_epoch = trained.best_epoch;
  outcome.access_log = reader.log();
  return probs;
}

inline std::vector<model::Probabilities> predict_external(const FoldContext& ctx,
                                                          const data::SplitAssignment& splits,
                                                          std::string* backend_name) {
  bridge::BackendHandle::Options opts;
  opts.timeout = std::chrono::milliseconds(
      static_cast<long long>(ctx.config.backend_timeout_s * 1000.0));
  auto handle = bridge::BackendHandle::launch(ctx.config.backend, opts);
  handle.handshake();
  if (backend_name) *backend_name = handle.name();

  auto items = [&](std::span<const std::size_t> indices) {
    std::vector<bridge::LabeledPath> out;
    for (std::size_t i : indices)
      out.push_back({fs::absolute(ctx.store.file(i)).string(), ctx.store.label(i)});
    return out;
  };
  handle.train(items(splits.train), items(splits.validation));
  std::vector<std::string> paths;
  for (std::size_t i : splits.test) paths.push_back(fs::absolute(ctx.store.file(i)).string());
  auto probs = handle.predict(paths);
  handle.shutdown();
  return probs;
}

// One cross-validation round: train, predict the test fold, evaluate, and
// write the per-fold reports into the output directory.
inline FoldOutcome run_fold(const FoldContext& ctx, std::size_t k,
                            std::string* backend_name = nullptr) {
  const auto started = std::chrono::steady_clock::now();
  const fs::path out_dir = ctx.config.output_dir;
  const auto splits = data::make_splits(ctx.plan, k);

  FoldOutcome outcome;
  outcome.fold = k;
  const auto probs = ctx.config.builtin_backend()
                         ? predict_builtin(ctx, splits, outcome, out_dir)
                         : predict_external(ctx, splits, backend_name);

  std::vector<data::ClassLabel> truth;
  std::vector<data::ClassLabel> predicted;
  for (std::size_t i = 0; i < splits.test.size(); ++i) {
    truth.push_back(ctx.store.label(splits.test[i]));
    predicted.push_back(data::label_from_index(model::argmax(probs[i])));
  }
  outcome.confusion = eval::confusion_matrix(truth, predicted);
  outcome.report = eval::evaluate_predictions(probs, truth);

  const std::string ks = std::to_string(k);
  write_text(out_dir / ("confusion_fold" + ks + ".csv"), eval::confusion_csv(outcome.confusion));
  outcome.artifacts.push_back("confusion_fold" + ks + ".csv");
  write_text(out_dir / ("predictions_fold" + ks + ".csv"),
             detail::predictions_csv(ctx.manifest, splits.test, probs));
  outcome.artifacts.push_back("predictions_fold" + ks + ".csv");

  std::vector<double> scores(probs.size());
  auto positives = std::make_unique<bool[]>(probs.size());
  for (std::size_t c = 0; c < data::kNumClasses; ++c) {
    if (!outcome.report.per_class[c].auc) continue;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      scores[i] = probs[i][c];
      positives[i] = data::index_of(truth[i]) == c;
    }
    const auto curve =
        eval::roc_curve(scores, std::span<const bool>(positives.get(), probs.size()));
    const std::string name = "roc_fold" + ks + "_class" + std::to_string(c) + ".csv";
    write_text(out_dir / name, eval::roc_csv(curve));
    outcome.artifacts.push_back(name);
  }
  std::sort(outcome.artifacts.begin(), outcome.artifacts.end());
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return outcome;
}

inline std::string run_json(const RunRecord& rec, const ExperimentConfig& cfg) {
  json folds = json::array();
  for (const auto& f : rec.folds) {
    json entry = {{"fold", f.fold},
                  {"accuracy", f.report.accuracy},
                  {"sensitivity_macro", f.report.sensitivity},
                  {"specificity_macro", f.report.specificity},
                  {"f1_macro", f.report.f1},
                  {"artifacts", f.artifacts}};
    entry["auc_macro"] = f.report.auc ? json(*f.report.auc) : json(nullptr);
    if (f.best_epoch > 0) entry["best_epoch"] = f.best_epoch;
    folds.push_back(entry);
  }
  json doc = {{"tool", "cxr"},
              {"tool_version", rec.tool_version},
              {"config_digest", rec.config_digest},
              {"manifest_digest", rec.manifest_digest},
              {"backend", rec.backend_name},
              {"k", cfg.k},
              {"seed", cfg.global_seed},
              {"metadata", cfg.metadata},
              {"folds", folds},
              {"best_fold", rec.best_fold},
              {"best_fold_rule", "highest test accuracy, lowest fold index on ties"},
              {"artifacts", rec.artifacts}};
  return doc.dump(2) + "\n";
}

inline std::string timing_json(const RunRecord& rec) {
  json folds = json::array();
  for (const auto& f : rec.folds) folds.push_back({{"fold", f.fold}, {"seconds", f.seconds}});
  return json({{"folds", folds}, {"total_seconds", rec.total_seconds}}).dump(2) + "\n";
}

// Full cross-validated experiment. Folds run on up to `jobs` threads; every
// output except timing.json is a pure function of the inputs, so the thread
// count never changes the bytes written.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + cfg.output_dir.string());

  auto prep = preprocess_corpus(cfg);
  ImageStore store(prep.cache_files, prep.manifest.labels());
  const auto plan = data::stratified_kfold(prep.manifest, cfg.k, cfg.global_seed);

  std::vector<std::size_t> selected;
  if (opts.folds && !opts.folds->empty()) {
    selected = *opts.folds;
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
    for (auto f : selected)
      if (f >= cfg.k)
        throw ConfigError("fold " + std::to_string(f) + " out of range for K=" + std::to_string(cfg.k));
  } else {
    for (std::size_t f = 0; f < cfg.k; ++f) selected.push_back(f);
  }

  const FoldContext ctx{cfg, prep.manifest, store, plan};
  std::vector<std::optional<FoldOutcome>> outcomes(selected.size());
  std::vector<std::exception_ptr> errors(selected.size());
  std::vector<std::string> names(selected.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&] {
    while (!failed.load()) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= selected.size()) return;
      try {
        outcomes[slot] = run_fold(ctx, selected[slot], &names[slot]);
      } catch (...) {
        errors[slot] = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(opts.jobs, 1, selected.size());
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t s = 0; s < selected.size(); ++s)
    if (errors[s]) detail::rethrow_for_fold(errors[s], selected[s]);

  RunRecord rec;
  rec.config_digest = cfg.digest();
  rec.manifest_digest = prep.manifest.source_digest;
  rec.backend_name = cfg.builtin_backend() ? std::string(kBuiltinBackend) : names.front();
  std::vector<eval::FoldRow> rows;
  std::vector<eval::MetricsReport> reports;
  for (auto& o : outcomes) {
    rows.push_back({o->fold, o->report});
    reports.push_back(o->report);
    rec.artifacts.insert(rec.artifacts.end(), o->artifacts.begin(), o->artifacts.end());
    rec.folds.push_back(std::move(*o));
  }
  rec.aggregate = eval::aggregate_folds(reports);
  double best_accuracy = -1.0;
  for (const auto& f : rec.folds) {
    if (f.report.accuracy > best_accuracy) {
      best_accuracy = f.report.accuracy;
      rec.best_fold = f.fold;
    }
  }

  write_text(cfg.output_dir / "metrics.csv", eval::metrics_csv(rows, rec.aggregate));
  rec.artifacts.push_back("metrics.csv");
  rec.artifacts.push_back("run.json");
  rec.artifacts.push_back("timing.json");
  std::sort(rec.artifacts.begin(), rec.artifacts.end());
  write_text(cfg.output_dir / "run.json", run_json(rec, cfg));
  rec.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(cfg.output_dir / "timing.json", timing_json(rec));
  return rec;
}

struct EvaluationResult {
  eval::MetricsReport report;
  eval::ConfusionMatrix confusion;
};

// Metrics over an externally produced score table. `pred_csv` has a `path`
// column plus one score column per class name; `truth_csv` is a manifest.
// Predictions are joined to truth by path.
inline EvaluationResult evaluate_tables(std::string_view pred_csv, std::string_view truth_csv) {
  const auto truth = data::load_manifest(truth_csv);
  std::unordered_map<std::string, data::ClassLabel> by_path;
  for (const auto& s : truth.samples) by_path.emplace(s.path, s.label);

  const auto lines = data::detail::split_lines(pred_csv);
  if (lines.empty()) throw IngestionError("empty prediction table", 1);
  std::vector<std::string_view> wanted = {"path"};
  for (auto n : data::kLabelNames) wanted.push_back(n);
  const auto cols = data::detail::header_columns(lines[0], wanted);
  const std::size_t need = *std::max_element(cols.begin(), cols.end()) + 1;

  std::vector<model::Probabilities> probs;
  std::vector<data::ClassLabel> labels;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (data::detail::trim(lines[i]).empty()) continue;
    const auto fields = data::detail::split_commas(lines[i]);
    if (fields.size() < need) throw IngestionError("missing column", line_no);
    const std::string path(fields[cols[0]]);
    const auto it = by_path.find(path);
    if (it == by_path.end()) throw IngestionError("no ground truth for '" + path + "'", line_no);
    model::Probabilities p{};
    for (std::size_t c = 0; c < data::kNumClasses; ++c) {
      const auto text = fields[cols[c + 1]];
      try {
        std::size_t used = 0;
        p[c] = std::stod(std::string(text), &used);
        if (used != text.size() || !std::isfinite(p[c])) throw std::invalid_argument("bad");
      } catch (const std::exception&) {
        throw IngestionError("invalid score '" + std::string(text) + "'", line_no);
      }
    }
    probs.push_back(p);
    labels.push_back(it->second);
  }
  if (probs.empty()) throw DataError("prediction table has no rows");

  std::vector<data::ClassLabel> predicted;
  for (const auto& p : probs) predicted.push_back(data::label_from_index(model::argmax(p)));
  EvaluationResult r;
  r.confusion = eval::confusion_matrix(labels, predicted);
  r.report = eval::evaluate_predictions(probs, labels);
  return r;
}

}  // namespace cxr::pipeline
