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
// Command-line driver: preprocess, run, evaluate.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cxr/cxr.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kDataError = 3,
  kBackendError = 4,
};

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return kOk;
  } catch (const cxr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const cxr::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kBackendError;
  } catch (const cxr::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chest X-ray classification pipeline: preprocessing, cross-validated training, evaluation"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print the version and exit");

  std::string config_path;
  auto* preprocess = app.add_subcommand("preprocess", "Resize and CLAHE-enhance every manifest image into the cache");
  preprocess->add_option("--config", config_path, "Experiment config file")->required();

  std::size_t jobs = 1;
  std::vector<std::size_t> folds;
  auto* run = app.add_subcommand("run", "Run the cross-validated experiment");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--jobs", jobs, "Folds to run concurrently")->check(CLI::PositiveNumber);
  run->add_option("--folds", folds, "Comma-separated fold indices (default: all)")->delimiter(',');

  std::string pred_path, truth_path;
  auto* evaluate = app.add_subcommand("evaluate", "Metrics for an external prediction table");
  evaluate->add_option("--pred", pred_path, "CSV with path plus one score column per class")->required();
  evaluate->add_option("--truth", truth_path, "Manifest-format CSV with path,label")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  if (show_version) {
    std::cout << "cxr " << cxr::kVersion << "\n";
    return kOk;
  }

  if (*preprocess) {
    return guarded([&] {
      const auto cfg = cxr::load_config_file(config_path);
      const auto res = cxr::pipeline::preprocess_corpus(cfg);
      std::cout << "preprocessed " << res.manifest.size() << " images (" << res.written
                << " written, " << res.reused << " up to date) into " << cfg.cache_dir().string()
                << "\n";
    });
  }
  if (*run) {
    return guarded([&] {
      const auto cfg = cxr::load_config_file(config_path);
      cxr::pipeline::RunOptions opts;
      opts.jobs = jobs;
      if (!folds.empty()) opts.folds = folds;
      const auto rec = cxr::pipeline::run_experiment(cfg, opts);
      std::cout << cxr::pipeline::read_text(cfg.output_dir / "metrics.csv");
      std::cout << "best fold: " << rec.best_fold << "; outputs in " << cfg.output_dir.string()
                << "\n";
    });
  }
  if (*evaluate) {
    return guarded([&] {
      const auto res = cxr::pipeline::evaluate_tables(cxr::pipeline::read_text(pred_path),
                                                      cxr::pipeline::read_text(truth_path));
      std::cout << cxr::eval::describe(res.report, res.confusion);
    });
  }
  std::cout << app.help();
  return kOk;
}
