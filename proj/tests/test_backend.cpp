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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cxr/backend.hpp"

namespace cxr::bridge {
namespace {

namespace fs = std::filesystem;

std::string fake(const std::string& mode, const std::string& log = "") {
  std::string cmd = std::string(CXR_FAKE_BACKEND) + " " + mode;
  if (!log.empty()) cmd += " '" + log + "'";
  return cmd;
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

BackendHandle::Options quick() {
  BackendHandle::Options o;
  o.timeout = std::chrono::milliseconds(5000);
  return o;
}

TEST(Frame, BigEndianLengthPrefix) {
  const auto bytes = encode_frame({{"type", "hello"}});
  const std::string body = R"({"type":"hello"})";
  ASSERT_EQ(bytes.size(), 4 + body.size());
  EXPECT_EQ(bytes[0], 0);
  EXPECT_EQ(bytes[3], body.size());
  EXPECT_EQ(std::string(bytes.begin() + 4, bytes.end()), body);
}

TEST(ProbabilityRow, Validation) {
  EXPECT_NO_THROW(parse_probability_row(json::array({0.1, 0.2, 0.3, 0.4}), "r"));
  EXPECT_THROW(parse_probability_row(json::array({0.5, 0.5}), "r"), BackendError);
  EXPECT_THROW(parse_probability_row(json::array({0.5, 0.5, 0.5, 0.5}), "r"), BackendError);
  EXPECT_THROW(parse_probability_row(json::array({1.5, -0.5, 0.0, 0.0}), "r"), BackendError);
  EXPECT_THROW(parse_probability_row(json::array({"a", 0.5, 0.25, 0.25}), "r"), BackendError);
}

TEST(Bridge, UniformPredictions) {
  auto h = BackendHandle::launch(fake("uniform"), quick());
  h.handshake();
  EXPECT_TRUE(h.ready());
  EXPECT_EQ(h.version(), kProtocolVersion);
  EXPECT_EQ(h.name(), "fake-uniform");
  h.train({{"a.pgm", data::ClassLabel::Covid19}}, {{"b.pgm", data::ClassLabel::Normal}});
  const auto p = h.predict({"x1.pgm", "x2.pgm"});
  ASSERT_EQ(p.size(), 2u);
  for (const auto& row : p)
    for (double v : row) EXPECT_EQ(v, 0.25);
  h.shutdown();
}

TEST(Bridge, KeepsRequestOrder) {
  auto h = BackendHandle::launch(fake("indexed"), quick());
  h.handshake();
  h.train({}, {});
  const auto p = h.predict({"img_2.pgm", "img_0.pgm", "img_7.pgm"});
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(model::argmax(p[0]), 2u);
  EXPECT_EQ(model::argmax(p[1]), 0u);
  EXPECT_EQ(model::argmax(p[2]), 3u);
}

TEST(Bridge, VersionMismatchStopsBeforeTraining) {
  const fs::path log = fs::temp_directory_path() / "cxr_fake_backend_version.log";
  fs::remove(log);
  {
    auto h = BackendHandle::launch(fake("badversion", log.string()), quick());
    EXPECT_THROW(h.handshake(), BackendError);
    EXPECT_FALSE(h.ready());
    EXPECT_THROW(h.train({}, {}), BackendError);
  }
  const auto seen = read_lines(log);
  ASSERT_FALSE(seen.empty());
  EXPECT_EQ(seen.front(), "hello");
  for (const auto& t : seen) EXPECT_NE(t, "train");
  fs::remove(log);
}

TEST(Bridge, RequestBeforeHandshakeFails) {
  auto h = BackendHandle::launch(fake("uniform"), quick());
  EXPECT_THROW(h.predict({"a.pgm"}), BackendError);
}

void expect_failure(const std::string& mode, const std::string& needle) {
  auto h = BackendHandle::launch(fake(mode), quick());
  try {
    h.handshake();
    h.train({{"a.pgm", data::ClassLabel::Normal}}, {});
    h.predict({"a.pgm", "b.pgm"});
    ADD_FAILURE() << mode << ": expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << mode << ": " << e.what();
  }
}

TEST(Bridge, ProtocolViolationsAreBackendErrors) {
  expect_failure("exit_at_hello", "hello_ack");
  expect_failure("exit_after_train", "train_done");
  expect_failure("garbage_proba", "sum");
  expect_failure("error_frame", "out of memory");
  expect_failure("wrong_rows", "expected 2 rows");
}

TEST(Bridge, LaunchFailureSurfacesAtHandshake) {
  auto h = BackendHandle::launch("/nonexistent/backend/binary", quick());
  EXPECT_THROW(h.handshake(), BackendError);
}

TEST(Bridge, TimesOutOnSilentPeer) {
  BackendHandle::Options o;
  o.timeout = std::chrono::milliseconds(200);
  auto h = BackendHandle::launch("sleep 5", o);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(h.handshake(), BackendError);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(3));
}

}  // namespace
}  // namespace cxr::bridge
