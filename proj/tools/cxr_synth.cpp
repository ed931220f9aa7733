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
// Generates the synthetic four-class corpus used for smoke runs.

#include <iostream>

#include "CLI11.hpp"
#include "synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic four-class radiograph corpus"};
  std::string out;
  cxr::synthetic::CorpusSpec spec;
  app.add_option("--out", out, "Destination directory")->required();
  app.add_option("--per-class", spec.per_class, "Images per class")->check(CLI::PositiveNumber);
  app.add_option("--side", spec.side, "Image side in pixels")->check(CLI::PositiveNumber);
  app.add_option("--seed", spec.seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto files = cxr::synthetic::write_corpus(out, spec);
    std::cout << "manifest: " << files.manifest.string() << "\nconfig:   " << files.config.string()
              << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
