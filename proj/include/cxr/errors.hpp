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
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>

namespace cxr {

// Base of every error the library throws. The CLI maps the subclasses onto
// process exit codes (config 2, data 3, backend 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters, configuration files, or violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input data (images, manifests, score tables).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed binary image payload. Carries the byte offset of the fault.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " at byte offset " + std::to_string(offset)),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Manifest / CSV ingestion failure. Carries the 1-based line number.
class IngestionError : public DataError {
 public:
  IngestionError(const std::string& what, std::size_t line)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Metric computation over degenerate inputs (e.g. ROC with one class only).
class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

// External classifier process misbehaved: protocol violation, timeout,
// invalid probabilities, or an explicit error frame.
class BackendError : public Error {
 public:
  using Error::Error;
};

namespace detail {

struct WarningSink {
  std::mutex mu;
  std::function<void(const std::string&)> fn = [](const std::string& msg) {
    std::cerr << "warning: " << msg << '\n';
  };
};

inline WarningSink& warning_sink() {
  static WarningSink sink;
  return sink;
}

}  // namespace detail

// Replaces the process-wide warning handler. Passing an empty function
// silences warnings.
inline void set_warning_handler(std::function<void(const std::string&)> fn) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mu);
  sink.fn = std::move(fn);
}

inline void warn(const std::string& msg) {
  auto& sink = detail::warning_sink();
  std::lock_guard lock(sink.mu);
  if (sink.fn) sink.fn(msg);
}

}  // namespace cxr
