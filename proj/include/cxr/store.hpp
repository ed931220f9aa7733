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

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "cxr/dataset.hpp"
#include "cxr/errors.hpp"
#include "cxr/image.hpp"

namespace cxr {

// Preprocessed images addressed by manifest index. File-backed entries are
// decoded on first use; concurrent readers are safe.
class ImageStore {
 public:
  ImageStore(std::vector<std::filesystem::path> files, std::vector<data::ClassLabel> labels)
      : files_(std::move(files)),
        labels_(std::move(labels)),
        images_(files_.size()),
        once_(std::make_unique<std::once_flag[]>(files_.size())) {
    if (files_.size() != labels_.size())
      throw ConfigError("ImageStore: file and label counts differ");
  }

  static ImageStore in_memory(std::vector<imaging::GrayImage> images,
                              std::vector<data::ClassLabel> labels) {
    ImageStore store(std::vector<std::filesystem::path>(images.size()), std::move(labels));
    for (std::size_t i = 0; i < images.size(); ++i) {
      store.images_[i] = std::move(images[i]);
      std::call_once(store.once_[i], [] {});
    }
    return store;
  }

  std::size_t size() const { return labels_.size(); }
  data::ClassLabel label(std::size_t i) const { return labels_.at(i); }
  const std::vector<data::ClassLabel>& labels() const { return labels_; }
  const std::filesystem::path& file(std::size_t i) const { return files_.at(i); }

  const imaging::GrayImage& image(std::size_t i) const {
    if (i >= size()) throw ConfigError("ImageStore: index out of range");
    std::call_once(once_[i], [&] { images_[i] = imaging::load_pgm_file(files_[i]); });
    return images_[i];
  }

 private:
  std::vector<std::filesystem::path> files_;
  std::vector<data::ClassLabel> labels_;
  mutable std::vector<imaging::GrayImage> images_;
  mutable std::unique_ptr<std::once_flag[]> once_;
};

enum class AccessRole { Train, Validation, Test };

// Per-fold view of the store that records every read with the role it was
// made for. Single-threaded; one reader per fold.
class FoldReader {
 public:
  struct Access {
    std::size_t index;
    AccessRole role;
  };

  explicit FoldReader(const ImageStore& store) : store_(&store) {}

  const imaging::GrayImage& read(std::size_t i, AccessRole role) {
    log_.push_back({i, role});
    return store_->image(i);
  }

  data::ClassLabel label(std::size_t i) const { return store_->label(i); }
  const ImageStore& store() const { return *store_; }
  const std::vector<Access>& log() const { return log_; }

 private:
  const ImageStore* store_;
  std::vector<Access> log_;
};

}  // namespace cxr
