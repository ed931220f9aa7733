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

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "cxr/classifier.hpp"
#include "cxr/dataset.hpp"
#include "cxr/errors.hpp"

extern char** environ;

namespace cxr::bridge {

using json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 256u << 20;
inline constexpr double kProbabilitySumTolerance = 1e-6;

// 4-byte big-endian length followed by the UTF-8 JSON text.
inline std::vector<std::uint8_t> encode_frame(const json& msg) {
  const std::string body = msg.dump();
  if (body.size() > kMaxFrameBytes) throw BackendError("outgoing frame too large");
  const auto n = static_cast<std::uint32_t>(body.size());
  std::vector<std::uint8_t> out{static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16),
                                static_cast<std::uint8_t>(n >> 8), static_cast<std::uint8_t>(n)};
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

struct LabeledPath {
  std::string path;
  data::ClassLabel label;
};

// Checks one "proba" row: four finite, nonnegative entries summing to 1.
inline model::Probabilities parse_probability_row(const json& row, const std::string& where) {
  if (!row.is_array() || row.size() != data::kNumClasses)
    throw BackendError(where + ": probability row must have " +
                       std::to_string(data::kNumClasses) + " entries");
  model::Probabilities p{};
  double sum = 0.0;
  for (std::size_t c = 0; c < data::kNumClasses; ++c) {
    if (!row[c].is_number()) throw BackendError(where + ": non-numeric probability");
    p[c] = row[c].get<double>();
    if (!std::isfinite(p[c]) || p[c] < 0.0 || p[c] > 1.0 + kProbabilitySumTolerance)
      throw BackendError(where + ": probability out of range");
    sum += p[c];
  }
  if (std::abs(sum - 1.0) > kProbabilitySumTolerance)
    throw BackendError(where + ": probabilities sum to " + std::to_string(sum));
  return p;
}

struct BackendOptions {
  std::chrono::milliseconds timeout{std::chrono::minutes(30)};
};

// Connection to an external classifier process speaking the bridge protocol
// over its stdin/stdout. Single owner; requests are strictly sequential.
class BackendHandle {
 public:
  using Options = BackendOptions;

  // Starts `command` through /bin/sh. The child's stderr is inherited.
  static BackendHandle launch(const std::string& command, Options opts = {}) {
    int to_child[2];
    int from_child[2];
    if (pipe2(to_child, O_CLOEXEC) != 0) throw BackendError("pipe: " + std::string(std::strerror(errno)));
    if (pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw BackendError("pipe: " + std::string(std::strerror(errno)));
    }
    ignore_sigpipe();

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    sigset_t defaults;
    sigemptyset(&defaults);
    sigaddset(&defaults, SIGPIPE);
    posix_spawnattr_setsigdefault(&attr, &defaults);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETSIGDEF);

    std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    pid_t pid = -1;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    posix_spawnattr_destroy(&attr);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw BackendError("failed to launch backend '" + command + "': " + std::strerror(rc));
    }
    return BackendHandle(pid, to_child[1], from_child[0], opts);
  }

  BackendHandle(BackendHandle&& o) noexcept { *this = std::move(o); }
  BackendHandle& operator=(BackendHandle&& o) noexcept {
    if (this != &o) {
      terminate();
      pid_ = std::exchange(o.pid_, -1);
      in_ = std::exchange(o.in_, -1);
      out_ = std::exchange(o.out_, -1);
      opts_ = o.opts_;
      name_ = std::move(o.name_);
      version_ = o.version_;
      frames_in_ = o.frames_in_;
      ready_ = std::exchange(o.ready_, false);
    }
    return *this;
  }
  BackendHandle(const BackendHandle&) = delete;
  BackendHandle& operator=(const BackendHandle&) = delete;
  ~BackendHandle() { terminate(); }

  const std::string& name() const { return name_; }
  int version() const { return version_; }
  bool ready() const { return ready_; }

  void handshake() {
    send({{"type", "hello"}, {"version", kProtocolVersion}});
    const json reply = receive("hello_ack");
    if (!reply.contains("version") || !reply["version"].is_number_integer())
      throw BackendError(frame_name("hello_ack") + ": missing version");
    version_ = reply["version"].get<int>();
    if (version_ != kProtocolVersion)
      throw BackendError("protocol version mismatch: backend speaks " + std::to_string(version_) +
                         ", pipeline speaks " + std::to_string(kProtocolVersion));
    name_ = reply.contains("name") && reply["name"].is_string() ? reply["name"].get<std::string>()
                                                                  : std::string("unnamed");
    ready_ = true;
  }

  void train(const std::vector<LabeledPath>& train_set, const std::vector<LabeledPath>& val_set) {
    require_ready();
    auto encode = [](const std::vector<LabeledPath>& items) {
      json arr = json::array();
      for (const auto& it : items)
        arr.push_back({{"path", it.path}, {"label", data::index_of(it.label)}});
      return arr;
    };
    send({{"type", "train"}, {"train", encode(train_set)}, {"val", encode(val_set)}});
    receive("train_done");
  }

  std::vector<model::Probabilities> predict(const std::vector<std::string>& paths) {
    require_ready();
    send({{"type", "predict"}, {"paths", paths}});
    const json reply = receive("proba");
    const std::string where = frame_name("proba");
    if (!reply.contains("rows") || !reply["rows"].is_array())
      throw BackendError(where + ": missing rows");
    const json& rows = reply["rows"];
    if (rows.size() != paths.size())
      throw BackendError(where + ": expected " + std::to_string(paths.size()) + " rows, got " +
                         std::to_string(rows.size()));
    std::vector<model::Probabilities> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.push_back(parse_probability_row(rows[i], where + " row " + std::to_string(i)));
    return out;
  }

  // Sends the shutdown message and reaps the process.
  void shutdown() { terminate(); }

 private:
  BackendHandle(pid_t pid, int in, int out, Options opts)
      : pid_(pid), in_(in), out_(out), opts_(opts) {}

  static void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
  }

  void require_ready() const {
    if (!ready_) throw BackendError("backend request before successful handshake");
  }

  std::string frame_name(const std::string& expected) const {
    return "frame #" + std::to_string(frames_in_) + " (expected '" + expected + "')";
  }

  void send(const json& msg) {
    if (in_ < 0) throw BackendError("backend connection is closed");
    const auto bytes = encode_frame(msg);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = ::write(in_, bytes.data() + off, bytes.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError("backend write failed for '" + msg.value("type", std::string("?")) +
                           "' message: " + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void read_exact(std::uint8_t* dst, std::size_t len, const std::string& expected,
                  std::chrono::steady_clock::time_point deadline) {
    std::size_t got = 0;
    while (got < len) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BackendError(frame_name(expected) + ": timed out");
      pollfd pfd{out_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (pr < 0) {
        if (errno == EINTR) continue;
        throw BackendError(frame_name(expected) + ": poll failed");
      }
      if (pr == 0) continue;
      const ssize_t n = ::read(out_, dst + got, len - got);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError(frame_name(expected) + ": read failed");
      }
      if (n == 0) throw BackendError(frame_name(expected) + ": backend closed the connection");
      got += static_cast<std::size_t>(n);
    }
  }

  json receive(const std::string& expected) {
    if (out_ < 0) throw BackendError("backend connection is closed");
    ++frames_in_;
    const auto deadline = std::chrono::steady_clock::now() + opts_.timeout;
    std::uint8_t hdr[4];
    read_exact(hdr, 4, expected, deadline);
    const std::uint32_t len = (std::uint32_t{hdr[0]} << 24) | (std::uint32_t{hdr[1]} << 16) |
                              (std::uint32_t{hdr[2]} << 8) | std::uint32_t{hdr[3]};
    if (len > kMaxFrameBytes)
      throw BackendError(frame_name(expected) + ": frame length " + std::to_string(len) + " too large");
    std::string body(len, '\0');
    read_exact(reinterpret_cast<std::uint8_t*>(body.data()), len, expected, deadline);

    json msg = json::parse(body, nullptr, false);
    if (msg.is_discarded() || !msg.is_object())
      throw BackendError(frame_name(expected) + ": not a JSON object");
    if (!msg.contains("type") || !msg["type"].is_string())
      throw BackendError(frame_name(expected) + ": missing type");
    const auto type = msg["type"].get<std::string>();
    if (type == "error")
      throw BackendError(frame_name(expected) + ": backend error: " +
                         msg.value("message", std::string("(no message)")));
    if (type != expected)
      throw BackendError(frame_name(expected) + ": unexpected message type '" + type + "'");
    return msg;
  }

  void terminate() noexcept {
    if (pid_ < 0) return;
    if (in_ >= 0) {
      try {
        if (ready_) send({{"type", "shutdown"}});
      } catch (...) {
      }
      ::close(in_);
      in_ = -1;
    }
    if (out_ >= 0) {
      ::close(out_);
      out_ = -1;
    }
    int status = 0;
    for (int i = 0; i < 200; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) != 0) {
        pid_ = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (pid_ >= 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    ready_ = false;
  }

  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  Options opts_;
  std::string name_;
  int version_ = 0;
  std::size_t frames_in_ = 0;
  bool ready_ = false;
};

}  // namespace cxr::bridge
